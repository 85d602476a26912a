"""Multinomial logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from bugroot.balance import LabeledDataset, smote
from bugroot.corpus import ROOT_CAUSES, RootCause
from bugroot.metrics import confusion_matrix, macro_f, stratified_kfold
from bugroot.textprep import PrepConfig
from bugroot.vectorize import FeatureVector, Vocabulary

logger = logging.getLogger(__name__)

MODEL_SCHEMA = "bugroot.model"
MODEL_VERSION = 1
# classes absent from the training data keep zero weights and this fixed bias
ABSENT_CLASS_BIAS = -30.0
_MAX_HALVINGS = 50


class TrainingDiverged(ArithmeticError):
    """The loss became non-finite; the learning rate is too high for the data scale."""

    def __init__(self, epoch: int, learning_rate: float) -> None:
        super().__init__(f"non-finite loss at epoch {epoch} (step size {learning_rate:g})")
        self.epoch = epoch
        self.learning_rate = learning_rate

    def to_dict(self) -> dict[str, Any]:
        return {"error": "training-diverged", "epoch": self.epoch, "learning_rate": self.learning_rate}


@dataclass(frozen=True)
class Hyperparams:
    l2_strength: float = 0.001
    learning_rate: float = 1.0
    max_epochs: int = 500
    convergence_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")


DEFAULT_GRID: dict[str, list] = {
    "l2_strength": [0.0001, 0.001, 0.01, 0.1, 1.0],
    "learning_rate": [0.1, 1.0],
}


@dataclass
class Model:
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray
    hyper: Hyperparams
    seed: int = 0
    vocab: Vocabulary | None = None
    prep: PrepConfig | None = None
    l2_normalize: bool = False
    epochs: int = 0
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    loss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": MODEL_SCHEMA,
            "version": MODEL_VERSION,
            "classes": [rc.value for rc in ROOT_CAUSES][: self.weights.shape[0]],
            "vocabulary_sha256": self.vocab.digest() if self.vocab else None,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "hyperparams": asdict(self.hyper),
            "seed": self.seed,
            "prep": self.prep.to_dict() if self.prep else None,
            "l2_normalize": self.l2_normalize,
            "epochs": self.epochs,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
        }

    def save(self, path: str | Path, vocab_path: str | Path | None = None) -> Path:
        """Write the model JSON and, next to it, the vocabulary it references."""
        path = Path(path)
        d = self.to_dict()
        if self.vocab is not None:
            vocab_path = Path(vocab_path) if vocab_path else path.with_suffix(".vocab.json")
            self.vocab.save(vocab_path)
            d["vocabulary_file"] = vocab_path.name
        path.write_text(json.dumps(d) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> Model:
        path = Path(path)
        d = json.loads(path.read_text(encoding="utf-8"))
        if d.get("schema") != MODEL_SCHEMA or d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model file: {d.get('schema')} v{d.get('version')}")
        if d["classes"] != [rc.value for rc in ROOT_CAUSES][: len(d["classes"])]:
            raise ValueError("model class order does not match this version's RootCause order")
        vocab = None
        if d.get("vocabulary_file"):
            vocab = Vocabulary.load(path.parent / d["vocabulary_file"])
            if vocab.digest() != d["vocabulary_sha256"]:
                raise ValueError("vocabulary file does not match the hash recorded in the model")
        return cls(
            weights=np.asarray(d["weights"], dtype=float).reshape(len(d["classes"]), -1),
            bias=np.asarray(d["bias"], dtype=float),
            hyper=Hyperparams(**d["hyperparams"]),
            seed=d["seed"],
            vocab=vocab,
            prep=PrepConfig.from_dict(d["prep"]) if d.get("prep") else None,
            l2_normalize=d.get("l2_normalize", False),
            epochs=d.get("epochs", 0),
            initial_loss=d.get("initial_loss", float("nan")),
            final_loss=d.get("final_loss", float("nan")),
        )


def _log_softmax(Z: np.ndarray) -> np.ndarray:
    shifted = Z - Z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grad(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy plus ``l2/2 * ||W||^2`` and its gradient (bias unpenalised)."""
    n = X.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        logp = _log_softmax(X @ W.T + b)
        loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * float(np.sum(W * W))
        residual = np.exp(logp)
        residual[np.arange(n), y] -= 1.0
        residual /= n
        gW = residual.T @ X + l2 * W
        gb = residual.sum(axis=0)
    return float(loss), gW, gb


def _loss(W, b, X, y, l2) -> float:
    n = X.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        logp = _log_softmax(X @ W.T + b)
        return float(-logp[np.arange(n), y].mean() + 0.5 * l2 * np.sum(W * W))


def train(
    data: LabeledDataset,
    hyper: Hyperparams | None = None,
    seed: int = 0,
    *,
    n_classes: int = len(ROOT_CAUSES),
) -> Model:
    """Fit weights from zero initialisation.

    Each epoch tries the full gradient step and halves it until the loss does
    not increase; training stops once the accepted decrease falls below
    ``convergence_tol`` or after ``max_epochs`` epochs.
    """
    hyper = hyper or Hyperparams()
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    X, y = data.X, data.y
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    present = np.unique(y)
    y_local = np.searchsorted(present, y)
    W = np.zeros((len(present), X.shape[1]))
    b = np.zeros(len(present))

    loss, gW, gb = loss_and_grad(W, b, X, y_local, hyper.l2_strength)
    if not np.isfinite(loss):
        raise TrainingDiverged(0, hyper.learning_rate)
    initial = loss
    history = [loss]
    epoch = 0
    for epoch in range(1, hyper.max_epochs + 1):
        step = hyper.learning_rate
        for _ in range(_MAX_HALVINGS):
            W_try = W - step * gW
            b_try = b - step * gb
            trial = _loss(W_try, b_try, X, y_local, hyper.l2_strength)
            if not np.isfinite(trial):
                raise TrainingDiverged(epoch, step)
            if trial <= loss:
                break
            step /= 2.0
        else:
            epoch -= 1
            break
        delta = loss - trial
        W, b = W_try, b_try
        loss, gW, gb = loss_and_grad(W, b, X, y_local, hyper.l2_strength)
        history.append(loss)
        if delta < hyper.convergence_tol:
            break

    weights = np.zeros((n_classes, X.shape[1]))
    bias = np.full(n_classes, ABSENT_CLASS_BIAS) if len(present) < n_classes else np.zeros(n_classes)
    weights[present] = W
    bias[present] = b
    return Model(
        weights, bias, hyper, seed,
        epochs=epoch, initial_loss=initial, final_loss=loss, loss_history=history,
    )


def _as_matrix(model: Model, x) -> tuple[np.ndarray, bool]:
    if isinstance(x, FeatureVector):
        if x.dim != model.n_features:
            raise ValueError(f"feature dimension {x.dim} != model dimension {model.n_features}")
        return x.to_dense()[None, :], True
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = arr[None, :] if single else arr
    if arr.ndim != 2 or arr.shape[1] != model.n_features:
        raise ValueError(f"feature dimension {arr.shape[-1]} != model dimension {model.n_features}")
    return arr, single


def predict_proba(model: Model, x) -> np.ndarray:
    """Softmax class probabilities for one vector (1-D result) or a matrix of rows."""
    X, single = _as_matrix(model, x)
    P = np.exp(_log_softmax(X @ model.weights.T + model.bias))
    return P[0] if single else P


def predict(model: Model, x) -> RootCause | list[RootCause]:
    """Most probable class; ties go to the earliest class in canonical order."""
    P = predict_proba(model, x)
    if P.ndim == 1:
        return ROOT_CAUSES[int(np.argmax(P))]
    return [ROOT_CAUSES[int(i)] for i in np.argmax(P, axis=1)]


def predict_index(model: Model, X: np.ndarray) -> np.ndarray:
    return np.argmax(X @ model.weights.T + model.bias, axis=1)


@dataclass(frozen=True)
class GridRow:
    params: dict[str, Any]
    score: float
    diverged: bool = False
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {**self.params, "score": self.score, "diverged": self.diverged, "note": self.note}


def _score_combination(
    hyper: Hyperparams,
    data: LabeledDataset,
    folds: Sequence[np.ndarray],
    seed: int,
    n_classes: int,
    balance: bool,
    smote_k: int,
) -> tuple[float, str]:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    all_idx = np.arange(len(data))
    for f, test in enumerate(folds):
        if len(test) == 0:
            continue
        train_idx = np.setdiff1d(all_idx, test)
        train_set = data.subset(train_idx)
        if balance:
            train_set = smote(train_set, smote_k, seed + f, strict=False)
        try:
            model = train(train_set, hyper, seed, n_classes=n_classes)
        except TrainingDiverged as exc:
            return 0.0, str(exc)
        pred = predict_index(model, data.X[test])
        cm += confusion_matrix(data.y[test], pred, n_classes)
    return macro_f(cm), ""


def grid_search(
    grid: Mapping[str, Sequence],
    data: LabeledDataset,
    folds: int = 5,
    seed: int = 0,
    *,
    base: Hyperparams | None = None,
    n_classes: int = len(ROOT_CAUSES),
    balance: bool = True,
    smote_k: int = 5,
    jobs: int = 1,
) -> tuple[Hyperparams, list[GridRow]]:
    """Score every combination of the grid by inner stratified CV on macro F-measure.

    Combinations are enumerated in the grid's key order; the first of equally
    scored combinations wins. A diverging combination scores 0.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must have at least one value per parameter")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    known = {f.name for f in fields(Hyperparams)}
    unknown = set(grid) - known
    if unknown:
        raise ValueError(f"unknown hyperparameters in grid: {sorted(unknown)}")
    base = base or Hyperparams()
    keys = list(grid)
    combos = [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]
    cv_folds = stratified_kfold(data.y.tolist(), folds, seed)
    candidates = [replace(base, **c) for c in combos]
    args = (data, cv_folds, seed, n_classes, balance, smote_k)

    if jobs > 1 and len(candidates) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_combination, candidates, *[itertools.repeat(a) for a in args]))
    else:
        results = [_score_combination(h, *args) for h in candidates]

    table = [GridRow(c, score, bool(note), note) for c, (score, note) in zip(combos, results)]
    best = 0
    for i, row in enumerate(table):
        if row.score > table[best].score:
            best = i
    for row in table:
        if row.diverged:
            logger.warning("grid combination %s diverged: %s", row.params, row.note)
    return candidates[best], table


__all__ = [
    "ABSENT_CLASS_BIAS",
    "DEFAULT_GRID",
    "GridRow",
    "Hyperparams",
    "Model",
    "TrainingDiverged",
    "grid_search",
    "loss_and_grad",
    "predict",
    "predict_index",
    "predict_proba",
    "train",
]
