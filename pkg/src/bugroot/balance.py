"""SMOTE oversampling of minority classes up to the majority-class count."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class SmoteError(ValueError):
    pass


@dataclass
class LabeledDataset:
    """Dense feature rows with integer class labels.

    ``parents`` holds, for synthetic rows, the two original row indices the
    point was interpolated between (``-1`` for original rows).
    """

    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray | None = None
    parents: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError(f"X {self.X.shape} and y {self.y.shape} do not line up")
        n = len(self.y)
        if self.synthetic is None:
            self.synthetic = np.zeros(n, dtype=bool)
        if self.parents is None:
            self.parents = np.full((n, 2), -1, dtype=np.int64)
        if self.synthetic.shape != (n,) or self.parents.shape != (n, 2):
            raise ValueError("synthetic mask / parents do not match the number of rows")

    def __len__(self) -> int:
        return len(self.y)

    def class_counts(self) -> dict[int, int]:
        classes, counts = np.unique(self.y, return_counts=True)
        return {int(c): int(n) for c, n in zip(classes, counts)}

    def subset(self, rows) -> LabeledDataset:
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(self.X[rows], self.y[rows])


def _pairwise_distances(X: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        sq = np.einsum("ij,ij->i", X, X)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        return np.sqrt(np.maximum(d2, 0.0))
    if metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        sim = (X @ X.T) / safe[:, None] / safe[None, :]
        sim[norms == 0, :] = 0.0
        sim[:, norms == 0] = 0.0
        return 1.0 - sim
    raise ValueError(f"unknown distance metric: {metric!r}")


def nearest_neighbors(X: np.ndarray, k: int, metric: str = "euclidean") -> np.ndarray:
    """Indices of the ``k`` nearest other rows of each row; ties go to the lower index."""
    D = _pairwise_distances(X, metric)
    np.fill_diagonal(D, np.inf)
    return np.argsort(D, axis=1, kind="stable")[:, :k]


def smote(
    data: LabeledDataset,
    k: int = 5,
    seed: int = 0,
    *,
    metric: str = "euclidean",
    strict: bool = True,
) -> LabeledDataset:
    """Oversample every class to the majority count by interpolating same-class neighbours.

    Output rows are the input rows unchanged, followed by the synthetic rows
    grouped by class in ascending label order. With ``strict=False`` a class
    that has a single member is left as is (with a warning) instead of raising.
    """
    if k < 1:
        raise SmoteError("k must be >= 1")
    counts = data.class_counts()
    if not counts:
        return data
    target = max(counts.values())

    new_X = []
    new_y = []
    new_parents = []
    for cls in sorted(counts):
        n_cls = counts[cls]
        missing = target - n_cls
        if missing == 0:
            continue
        if n_cls < 2:
            if strict:
                raise SmoteError(f"class {cls} has {n_cls} member(s); SMOTE needs at least 2")
            logger.warning("class %s has a single member; left unbalanced", cls)
            continue
        k_eff = min(k, n_cls - 1)
        if k_eff < k:
            logger.warning("class %s has %d members; k clamped from %d to %d", cls, n_cls, k, k_eff)

        rows = np.flatnonzero(data.y == cls)
        Xc = data.X[rows]
        neighbors = nearest_neighbors(Xc, k_eff, metric)
        rng = np.random.default_rng([seed, cls])
        order = rng.permutation(n_cls)
        for t in range(missing):
            i = order[t % n_cls]
            j = neighbors[i, rng.integers(k_eff)]
            u = rng.random()
            xi, xj = Xc[i], Xc[j]
            point = xi + u * (xj - xi)
            # rounding must not push the point off the segment
            point = np.clip(point, np.minimum(xi, xj), np.maximum(xi, xj))
            new_X.append(point)
            new_y.append(cls)
            new_parents.append((rows[i], rows[j]))

    if not new_X:
        return LabeledDataset(data.X.copy(), data.y.copy(), data.synthetic.copy(), data.parents.copy())
    m = len(new_X)
    return LabeledDataset(
        np.vstack([data.X, np.asarray(new_X)]),
        np.concatenate([data.y, np.asarray(new_y, dtype=np.int64)]),
        np.concatenate([data.synthetic, np.ones(m, dtype=bool)]),
        np.vstack([data.parents, np.asarray(new_parents, dtype=np.int64)]),
    )
