"""Term vocabulary and TF-IDF weighting.

weight(w, doc) = count(w in doc) * ln(corpus_size / doc_freq(w)), with no
IDF smoothing; terms in every document therefore weigh zero.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from bugroot.textprep import TokenStream

VOCAB_SCHEMA = "bugroot.vocabulary"
VOCAB_VERSION = 1


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    corpus_size: int
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if list(self.terms) != sorted(set(self.terms)):
            raise VocabularyError("terms must be unique and sorted")
        if len(self.terms) != len(self.doc_freq):
            raise VocabularyError("terms and doc_freq differ in length")
        if any(not 1 <= df <= self.corpus_size for df in self.doc_freq):
            raise VocabularyError("doc_freq out of range [1, corpus_size]")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def idf(self) -> np.ndarray:
        return np.log(self.corpus_size / np.asarray(self.doc_freq, dtype=float))

    def to_dict(self) -> dict:
        return {
            "schema": VOCAB_SCHEMA,
            "version": VOCAB_VERSION,
            "terms": list(self.terms),
            "doc_freq": list(self.doc_freq),
            "corpus_size": self.corpus_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Vocabulary:
        if d.get("schema") != VOCAB_SCHEMA or d.get("version") != VOCAB_VERSION:
            raise VocabularyError(f"unsupported vocabulary file: {d.get('schema')} v{d.get('version')}")
        return cls(tuple(d["terms"]), tuple(int(x) for x in d["doc_freq"]), int(d["corpus_size"]))

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocabulary:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class FeatureVector:
    """Sparse vector: parallel ``indices``/``values``, no explicit zeros."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    dim: int

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[list(self.indices)] = self.values
        return out

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.indices, self.values))

    @property
    def is_zero(self) -> bool:
        return not self.indices

    @classmethod
    def from_dense(cls, row: Sequence[float]) -> FeatureVector:
        arr = np.asarray(row, dtype=float)
        nz = np.flatnonzero(arr)
        return cls(tuple(int(i) for i in nz), tuple(float(v) for v in arr[nz]), int(arr.shape[0]))


def fit_vocabulary(
    docs: Sequence[TokenStream | Iterable[str]],
    min_df: int = 2,
    max_df_ratio: float = 0.95,
) -> Vocabulary:
    """Keep terms with ``min_df <= doc_freq <= max_df_ratio * len(docs)``."""
    if not docs:
        raise VocabularyError("cannot fit a vocabulary on zero documents")
    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc))
    n = len(docs)
    cap = max_df_ratio * n
    kept = sorted(t for t, c in df.items() if min_df <= c <= cap)
    if not kept:
        raise VocabularyError(
            f"all {len(df)} terms filtered out (min_df={min_df}, max_df_ratio={max_df_ratio})"
        )
    return Vocabulary(tuple(kept), tuple(df[t] for t in kept), n)


def tfidf(doc: TokenStream | Iterable[str], vocab: Vocabulary) -> FeatureVector:
    counts = Counter(t for t in doc if t in vocab.index)
    pairs = []
    for term, count in counts.items():
        i = vocab.index[term]
        w = count * math.log(vocab.corpus_size / vocab.doc_freq[i])
        if w != 0.0:
            pairs.append((i, w))
    pairs.sort()
    return FeatureVector(tuple(i for i, _ in pairs), tuple(w for _, w in pairs), len(vocab))


def tfidf_matrix(
    docs: Sequence[TokenStream | Iterable[str]],
    vocab: Vocabulary,
    *,
    l2_normalize: bool = False,
) -> np.ndarray:
    """Dense (n_docs, |vocab|) matrix of the same weights ``tfidf`` produces."""
    X = np.zeros((len(docs), len(vocab)))
    for row, doc in enumerate(docs):
        vec = tfidf(doc, vocab)
        X[row, list(vec.indices)] = vec.values
    if l2_normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        np.divide(X, norms, out=X, where=norms > 0)
    return X
