"""Confusion matrices, one-vs-rest classification metrics and stratified folds.

Zero-denominator convention: precision, recall and F-measure are 0, and so
is MCC.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def confusion_matrix(actual: Sequence[int], predicted: Sequence[int], n_classes: int) -> np.ndarray:
    """Rows are actual classes, columns predicted classes."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(actual, dtype=np.int64), np.asarray(predicted, dtype=np.int64)), 1)
    return cm


def _counts(cm: np.ndarray, cls: int) -> tuple[int, int, int, int]:
    tp = int(cm[cls, cls])
    fp = int(cm[:, cls].sum()) - tp
    fn = int(cm[cls, :].sum()) - tp
    tn = int(cm.sum()) - tp - fp - fn
    return tp, fp, fn, tn


def precision(cm: np.ndarray, cls: int) -> float:
    tp, fp, _, _ = _counts(cm, cls)
    return tp / (tp + fp) if tp + fp else 0.0


def recall(cm: np.ndarray, cls: int) -> float:
    tp, _, fn, _ = _counts(cm, cls)
    return tp / (tp + fn) if tp + fn else 0.0


def f_measure(cm: np.ndarray, cls: int) -> float:
    p, r = precision(cm, cls), recall(cm, cls)
    return 2 * p * r / (p + r) if p + r else 0.0


def mcc(cm: np.ndarray, cls: int) -> float:
    """Matthews correlation of the one-vs-rest reduction for ``cls``."""
    tp, fp, fn, tn = _counts(cm, cls)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def auc_roc(scores: Sequence[float], truths: Sequence[bool]) -> float | None:
    """Mann-Whitney AUC; tied scores count one half. ``None`` if only one class is present."""
    scores = np.asarray(scores, dtype=float)
    truths = np.asarray(truths, dtype=bool)
    n_pos = int(truths.sum())
    n_neg = len(truths) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores))
    # average 1-based rank over each run of equal scores
    bounds = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [len(scores)]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    u = ranks[truths].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def macro_f(cm: np.ndarray) -> float:
    """Mean F-measure over the classes that occur in the actual labels."""
    present = np.flatnonzero(cm.sum(axis=1))
    if len(present) == 0:
        return 0.0
    return float(np.mean([f_measure(cm, int(c)) for c in present]))


def stratified_kfold(labels: Sequence, k: int, seed: int = 0) -> list[np.ndarray]:
    """Split indices into ``k`` disjoint folds with per-class counts balanced to within one.

    Each class is shuffled and dealt round-robin; the dealing position carries
    over between classes so overall fold sizes stay balanced too.
    """
    labels = list(labels)
    n = len(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of instances ({n})")
    rng = np.random.default_rng(seed)
    by_class: dict = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for lab in sorted(by_class, key=_label_key):
        members = np.asarray(by_class[lab])
        for idx in members[rng.permutation(len(members))]:
            folds[pos % k].append(int(idx))
            pos += 1
    return [np.asarray(sorted(f), dtype=np.int64) for f in folds]


def _label_key(label) -> tuple:
    if isinstance(label, (int, np.integer)):
        return (0, int(label), "")
    index = getattr(label, "index", None)
    return (0, index, "") if isinstance(index, int) else (1, 0, str(label))
