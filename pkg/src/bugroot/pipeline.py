"""Report -> tokens -> TF-IDF -> SMOTE -> logistic regression, end to end."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from bugroot.balance import LabeledDataset, smote
from bugroot.corpus import ROOT_CAUSES, BugReport, RootCause
from bugroot.model import Hyperparams, Model, predict_proba, train
from bugroot.textprep import PrepConfig, TokenStream, normalize
from bugroot.vectorize import fit_vocabulary, tfidf_matrix


@dataclass(frozen=True)
class FeatureConfig:
    min_df: int = 2
    max_df_ratio: float = 0.95
    l2_normalize: bool = False


@dataclass(frozen=True)
class ClassifierConfig:
    prep: PrepConfig = field(default_factory=PrepConfig.classifier)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    balance: bool = True
    smote_k: int = 5
    smote_metric: str = "euclidean"


def report_text(report: BugReport, use_title: bool = False) -> str:
    """Classifier input text: the summary, optionally preceded by the title."""
    return f"{report.title}\n{report.summary}" if use_title else report.summary


def tokenize_reports(reports: Sequence[BugReport], prep: PrepConfig) -> list[TokenStream]:
    return [normalize(report_text(r, prep.use_title), prep, r.id) for r in reports]


def label_indices(reports: Sequence[BugReport]) -> np.ndarray:
    if any(r.label is None for r in reports):
        raise ValueError("all reports must be labeled")
    return np.array([r.label.index for r in reports], dtype=np.int64)


def fit_from_tokens(
    tokens: Sequence[TokenStream],
    y: np.ndarray,
    config: ClassifierConfig,
    seed: int = 0,
    smote_seed: int | None = None,
) -> Model:
    vocab = fit_vocabulary(tokens, config.features.min_df, config.features.max_df_ratio)
    X = tfidf_matrix(tokens, vocab, l2_normalize=config.features.l2_normalize)
    data = LabeledDataset(X, y)
    if config.balance:
        data = smote(
            data, config.smote_k, seed if smote_seed is None else smote_seed,
            metric=config.smote_metric, strict=False,
        )
    model = train(data, config.hyper, seed)
    model.vocab = vocab
    model.prep = config.prep
    model.l2_normalize = config.features.l2_normalize
    return model


def fit_model(reports: Sequence[BugReport], config: ClassifierConfig | None = None, seed: int = 0) -> Model:
    """Train on every labeled report in ``reports``."""
    config = config or ClassifierConfig()
    labeled = [r for r in reports if r.label is not None]
    if not labeled:
        raise ValueError("no labeled reports to train on")
    return fit_from_tokens(tokenize_reports(labeled, config.prep), label_indices(labeled), config, seed)


def featurize(model: Model, reports: Sequence[BugReport]) -> np.ndarray:
    if model.vocab is None or model.prep is None:
        raise ValueError("model carries no vocabulary/preprocessing state")
    tokens = tokenize_reports(reports, model.prep)
    return tfidf_matrix(tokens, model.vocab, l2_normalize=model.l2_normalize)


@dataclass(frozen=True)
class Classification:
    report_id: str
    label: RootCause
    probabilities: dict[RootCause, float]
    zero_vector: bool

    def to_dict(self) -> dict:
        return {
            "predicted": self.label.value,
            "probabilities": {rc.value: p for rc, p in self.probabilities.items()},
            "warnings": ["zero-vector"] if self.zero_vector else [],
        }


def classify(model: Model, reports: Sequence[BugReport]) -> list[Classification]:
    if not reports:
        return []
    X = featurize(model, reports)
    P = predict_proba(model, X)
    out = []
    for report, row, probs in zip(reports, X, P):
        out.append(
            Classification(
                report.id,
                ROOT_CAUSES[int(np.argmax(probs))],
                {rc: float(p) for rc, p in zip(ROOT_CAUSES, probs)},
                not row.any(),
            )
        )
    return out
