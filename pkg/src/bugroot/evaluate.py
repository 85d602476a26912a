"""Repeated stratified k-fold cross-validation of the classifier.

Aggregation: within a run, fold confusion matrices are summed and held-out
probabilities pooled, then per-class precision/recall/F/MCC/AUC are computed
for that run. Reported values are means over runs. The overall row is the
unweighted mean over the categories that occur in the corpus.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from bugroot.corpus import ROOT_CAUSES, Corpus, RootCause
from bugroot.metrics import auc_roc, confusion_matrix, f_measure, mcc, precision, recall, stratified_kfold
from bugroot.model import Hyperparams, TrainingDiverged, predict_proba
from bugroot.pipeline import ClassifierConfig, fit_from_tokens, label_indices, tokenize_reports
from bugroot.textprep import PrepConfig, TokenStream
from bugroot.vectorize import VocabularyError, tfidf_matrix

logger = logging.getLogger(__name__)

N_CLASSES = len(ROOT_CAUSES)
METRIC_NAMES = ("precision", "recall", "f_measure", "auc_roc", "mcc")


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f_measure: float
    auc_roc: float | None
    mcc: float

    def to_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass
class MetricsReport:
    per_class: dict[RootCause, ClassMetrics]
    overall: ClassMetrics
    runs: int
    folds: int
    seed: int
    support: dict[RootCause, int] = field(default_factory=dict)
    failed_folds: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "runs": self.runs,
            "folds": self.folds,
            "seed": self.seed,
            "per_class": {rc.value: m.to_dict() for rc, m in self.per_class.items()},
            "support": {rc.value: n for rc, n in self.support.items()},
            "overall": self.overall.to_dict(),
            "failed_folds": self.failed_folds,
            "warnings": list(self.warnings),
            "conventions": CONVENTIONS,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def render_table(self) -> str:
        def pct(v: float | None) -> str:
            return "-" if v is None else str(int(round(v * 100)))

        width = max(len(rc.title) for rc in ROOT_CAUSES)
        lines = [f"{'Category':<{width}}  {'P':>3} {'R':>3} {'F-M':>3} {'AR':>3} {'MCC':>3}"]
        rows = [(rc.title, self.per_class[rc]) for rc in ROOT_CAUSES if rc in self.per_class]
        rows.append(("Overall", self.overall))
        for name, m in rows:
            cells = " ".join(f"{pct(getattr(m, k)):>3}" for k in METRIC_NAMES)
            lines.append(f"{name:<{width}}  {cells}")
        lines.append("")
        lines.append(f"{self.runs} x {self.folds}-fold stratified CV, seed {self.seed}; values in percent.")
        lines.append(CONVENTIONS)
        if self.failed_folds:
            lines.append(f"{self.failed_folds} fold(s) failed and were skipped.")
        return "\n".join(lines)


CONVENTIONS = (
    "0/0 precision, recall, F-measure and MCC are reported as 0; AUC is '-' when a class "
    "never occurs in a run; Overall is the unweighted mean over categories present in the corpus."
)


@dataclass
class _RunResult:
    cm: np.ndarray
    proba: np.ndarray  # (n, N_CLASSES); NaN rows for instances of failed folds
    warnings: list[str]
    failed: int


def _run_once(
    run: int,
    tokens: Sequence[TokenStream],
    y: np.ndarray,
    config: ClassifierConfig,
    k: int,
    seed: int,
) -> _RunResult:
    run_seed = seed + run
    folds = stratified_kfold(y.tolist(), k, run_seed)
    n = len(y)
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    proba = np.full((n, N_CLASSES), np.nan)
    warnings: list[str] = []
    failed = 0
    all_idx = np.arange(n)
    for f, test in enumerate(folds):
        if len(test) == 0:
            continue
        train_idx = np.setdiff1d(all_idx, test)
        train_tokens = [tokens[i] for i in train_idx]
        try:
            model = fit_from_tokens(
                train_tokens, y[train_idx], config, seed=run_seed, smote_seed=run_seed * 1000 + f
            )
        except (TrainingDiverged, VocabularyError) as exc:
            warnings.append(f"run {run} fold {f}: {exc}")
            failed += 1
            continue
        X_test = tfidf_matrix([tokens[i] for i in test], model.vocab, l2_normalize=model.l2_normalize)
        P = predict_proba(model, X_test)
        proba[test] = P
        cm += confusion_matrix(y[test], np.argmax(P, axis=1), N_CLASSES)
    return _RunResult(cm, proba, warnings, failed)


def _run_metrics(result: _RunResult, y: np.ndarray) -> dict[int, ClassMetrics]:
    evaluated = ~np.isnan(result.proba[:, 0])
    out = {}
    for c in range(N_CLASSES):
        auc = auc_roc(result.proba[evaluated, c], y[evaluated] == c) if evaluated.any() else None
        out[c] = ClassMetrics(
            precision(result.cm, c), recall(result.cm, c), f_measure(result.cm, c), auc, mcc(result.cm, c)
        )
    return out


def _mean_or_none(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def cross_validate(
    corpus: Corpus,
    prep: PrepConfig | None = None,
    hyper: Hyperparams | None = None,
    k: int = 10,
    runs: int = 100,
    seed: int = 0,
    *,
    config: ClassifierConfig | None = None,
    jobs: int = 1,
) -> MetricsReport:
    """Evaluate the classifier with ``runs`` repetitions of stratified ``k``-fold CV.

    Run ``r`` uses seed ``seed + r`` for its folds and model; fold ``f`` of
    that run oversamples with seed ``(seed + r) * 1000 + f``. Vocabulary and
    SMOTE are fitted on the training split only.
    """
    config = config or ClassifierConfig()
    if prep is not None:
        config = replace(config, prep=prep)
    if hyper is not None:
        config = replace(config, hyper=hyper)
    if runs < 1:
        raise ValueError("runs must be >= 1")

    labeled = corpus.labeled_subset().reports
    if not labeled:
        raise ValueError("corpus has no labeled reports")
    tokens = tokenize_reports(labeled, config.prep)
    y = label_indices(labeled)

    if jobs > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(_run_once, range(runs), *([x] * runs for x in (tokens, y, config, k, seed)))
            )
    else:
        results = [_run_once(r, tokens, y, config, k, seed) for r in range(runs)]

    failed = sum(r.failed for r in results)
    total_folds = runs * k
    if failed == total_folds:
        raise RuntimeError("every fold failed; see warnings: " + "; ".join(results[0].warnings[:3]))
    warnings = [w for r in results for w in r.warnings]
    for w in warnings:
        logger.warning(w)

    per_run = [_run_metrics(r, y) for r in results]
    support_counts = np.bincount(y, minlength=N_CLASSES)
    per_class = {}
    for c, rc in enumerate(ROOT_CAUSES):
        per_class[rc] = ClassMetrics(
            precision=float(np.mean([m[c].precision for m in per_run])),
            recall=float(np.mean([m[c].recall for m in per_run])),
            f_measure=float(np.mean([m[c].f_measure for m in per_run])),
            auc_roc=_mean_or_none([m[c].auc_roc for m in per_run]),
            mcc=float(np.mean([m[c].mcc for m in per_run])),
        )
    present = [rc for c, rc in enumerate(ROOT_CAUSES) if support_counts[c] > 0]
    overall = ClassMetrics(
        precision=float(np.mean([per_class[rc].precision for rc in present])),
        recall=float(np.mean([per_class[rc].recall for rc in present])),
        f_measure=float(np.mean([per_class[rc].f_measure for rc in present])),
        auc_roc=_mean_or_none([per_class[rc].auc_roc for rc in present]),
        mcc=float(np.mean([per_class[rc].mcc for rc in present])),
    )
    return MetricsReport(
        per_class=per_class,
        overall=overall,
        runs=runs,
        folds=k,
        seed=seed,
        support={rc: int(support_counts[c]) for c, rc in enumerate(ROOT_CAUSES)},
        failed_folds=failed,
        warnings=warnings,
    )
