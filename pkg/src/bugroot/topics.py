"""Collapsed Gibbs LDA and a genetic search over the number of topics.

The GA genome is the topic count k. Fitness of a k is the mean silhouette
of the documents when each is assigned to its dominant topic, with cosine
distance between document-topic rows. Dirichlet priors are alpha = 50 / k
and beta = 0.01 unless given explicitly.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from bugroot.corpus import ROOT_CAUSES, Corpus, RootCause
from bugroot.textprep import PrepConfig, TokenStream, normalize

logger = logging.getLogger(__name__)

DEFAULT_BETA = 0.01
MAX_RENDERED_TOPICS = 5


def default_alpha(k: int) -> float:
    return 50.0 / k


@dataclass
class TopicModel:
    k: int
    terms: tuple[str, ...]
    phi: np.ndarray  # (k, |terms|)
    theta: np.ndarray  # (n_docs, k)
    alpha: float
    beta: float
    iterations: int
    seed: int

    def top_terms(self, topic: int, n: int = 10) -> list[tuple[str, float]]:
        return top_terms(self, topic, n)


@dataclass(frozen=True)
class GaConfig:
    population: int = 8
    generations: int = 10
    k_min: int = 2
    k_max: int = 10
    mutation_rate: float = 0.2
    elitism: int = 1

    def __post_init__(self) -> None:
        if self.k_min < 2 or self.k_max < self.k_min:
            raise ValueError("need 2 <= k_min <= k_max")
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0 <= self.elitism <= self.population:
            raise ValueError("elitism must lie in [0, population]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")


@njit(cache=True)
def _gibbs_sweep(words, docs, z, nkw, ndk, nk, alpha, beta, vbeta, u, p):
    k = nk.shape[0]
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        t = z[i]
        nkw[t, w] -= 1
        ndk[d, t] -= 1
        nk[t] -= 1
        total = 0.0
        for j in range(k):
            total += (ndk[d, j] + alpha) * (nkw[j, w] + beta) / (nk[j] + vbeta)
            p[j] = total
        r = u[i] * total
        t = 0
        while t < k - 1 and p[t] <= r:
            t += 1
        z[i] = t
        nkw[t, w] += 1
        ndk[d, t] += 1
        nk[t] += 1


def _flatten(docs: Sequence[Iterable[str]]) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    terms = tuple(sorted({t for doc in docs for t in doc}))
    index = {t: i for i, t in enumerate(terms)}
    words, doc_ids = [], []
    for d, doc in enumerate(docs):
        for t in doc:
            words.append(index[t])
            doc_ids.append(d)
    return terms, np.asarray(words, dtype=np.int64), np.asarray(doc_ids, dtype=np.int64)


@dataclass
class GibbsState:
    """Count tables of a sampler; ``nkw.sum() == ndk.sum() == nk.sum() == n_tokens`` always."""

    z: np.ndarray
    nkw: np.ndarray
    ndk: np.ndarray
    nk: np.ndarray


def _init_state(words, doc_ids, n_docs, n_terms, k, rng) -> GibbsState:
    z = rng.integers(0, k, size=len(words)).astype(np.int64)
    nkw = np.zeros((k, n_terms), dtype=np.int64)
    ndk = np.zeros((n_docs, k), dtype=np.int64)
    np.add.at(nkw, (z, words), 1)
    np.add.at(ndk, (doc_ids, z), 1)
    return GibbsState(z, nkw, ndk, nkw.sum(axis=1))


def lda_fit(
    docs: Sequence[TokenStream | Iterable[str]],
    k: int,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    iterations: int = 500,
    seed: int = 0,
    *,
    on_sweep=None,
) -> TopicModel:
    """Collapsed Gibbs sampling; phi and theta are smoothed estimates from the final counts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    docs = [list(d) for d in docs]
    if not docs:
        raise ValueError("no documents")
    terms, words, doc_ids = _flatten(docs)
    if not terms:
        raise ValueError("empty vocabulary: every document is empty after normalization")
    alpha = default_alpha(k) if alpha is None else alpha
    rng = np.random.default_rng(seed)
    V = len(terms)
    state = _init_state(words, doc_ids, len(docs), V, k, rng)
    p = np.empty(k)
    for it in range(iterations):
        u = rng.random(len(words))
        _gibbs_sweep(words, doc_ids, state.z, state.nkw, state.ndk, state.nk, alpha, beta, V * beta, u, p)
        if on_sweep is not None:
            on_sweep(it, state)

    phi = (state.nkw + beta) / (state.nk[:, None] + V * beta)
    doc_len = state.ndk.sum(axis=1)
    theta = (state.ndk + alpha) / (doc_len[:, None] + k * alpha)
    return TopicModel(k, terms, phi, theta, alpha, beta, iterations, seed)


def top_terms(model: TopicModel, topic: int, n: int = 10) -> list[tuple[str, float]]:
    """The ``n`` most probable terms of a topic; equal probabilities ordered by term."""
    if not 0 <= topic < model.k:
        raise IndexError(f"topic {topic} out of range for k={model.k}")
    row = model.phi[topic]
    order = sorted(range(len(model.terms)), key=lambda i: (-row[i], model.terms[i]))
    return [(model.terms[i], float(row[i])) for i in order[:n]]


def silhouette(X: np.ndarray, labels: np.ndarray, metric: str = "cosine") -> float:
    """Mean silhouette coefficient; singleton clusters score 0. Needs >= 2 clusters."""
    labels = np.asarray(labels)
    clusters = np.unique(labels)
    if len(clusters) < 2:
        raise ValueError("silhouette needs at least two clusters")
    if metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        norms[norms == 0] = 1.0
        U = X / norms[:, None]
        D = np.clip(1.0 - U @ U.T, 0.0, 2.0)
    elif metric == "euclidean":
        sq = np.einsum("ij,ij->i", X, X)
        D = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0.0))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    np.fill_diagonal(D, 0.0)
    n = len(labels)
    member = labels[None, :] == clusters[:, None]  # (n_clusters, n)
    sizes = member.sum(axis=1)
    sums = D @ member.T  # (n, n_clusters): distance from each point to each cluster
    own = np.searchsorted(clusters, labels)
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(n), own] / np.maximum(own_size - 1, 1), 0.0)
    mean_other = sums / sizes[None, :]
    mean_other[np.arange(n), own] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_size > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(np.clip(s.mean(), -1.0, 1.0))


def topic_fitness(model: TopicModel) -> tuple[float, bool]:
    """(silhouette of dominant-topic clustering, degenerate flag)."""
    labels = np.argmax(model.theta, axis=1)
    if len(np.unique(labels)) < 2:
        return -1.0, True
    return silhouette(model.theta, labels, "cosine"), False


def _evaluate_k(args) -> tuple[int, float, bool, TopicModel]:
    docs, k, iterations, seed, beta = args
    model = lda_fit(docs, k, default_alpha(k), beta, iterations, seed + k)
    fit, degenerate = topic_fitness(model)
    return k, fit, degenerate, model


@dataclass
class GaResult:
    best_k: int
    model: TopicModel
    history: list[float]
    fitness: dict[int, float]
    warnings: list[str] = field(default_factory=list)


def lda_ga(
    docs: Sequence[TokenStream | Iterable[str]],
    ga: GaConfig | None = None,
    lda_iterations: int = 500,
    seed: int = 0,
    *,
    beta: float = DEFAULT_BETA,
    jobs: int = 1,
) -> GaResult:
    """Search k in [k_min, k_max] with tournament selection, blend crossover and +-1 mutation.

    The LDA fit for a given k uses seed ``seed + k``, so fitness is a pure
    function of k and is computed once per distinct k. ``history`` holds
    the best fitness seen after each generation.
    """
    ga = ga or GaConfig()
    docs = [list(d) for d in docs]
    if len(docs) < 4:
        raise ValueError("lda_ga needs at least 4 documents")
    rng = np.random.default_rng(seed)
    cache: dict[int, tuple[float, bool, TopicModel]] = {}

    def evaluate(population: list[int]) -> None:
        todo = sorted(set(population) - set(cache))
        if not todo:
            return
        tasks = [(docs, k, lda_iterations, seed, beta) for k in todo]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_evaluate_k, tasks))
        else:
            results = [_evaluate_k(t) for t in tasks]
        for k, fit, degenerate, model in results:
            cache[k] = (fit, degenerate, model)

    def rank_key(k: int) -> tuple[float, int]:
        return (-cache[k][0], k)

    population = [int(k) for k in rng.integers(ga.k_min, ga.k_max + 1, size=ga.population)]
    evaluate(population)
    history = [max(cache[k][0] for k in population)]
    best = min(cache, key=rank_key)

    for _ in range(ga.generations):
        ranked = sorted(population, key=rank_key)
        children = ranked[: ga.elitism]
        while len(children) < ga.population:
            parents = []
            for _ in range(2):
                a, b = rng.integers(len(population), size=2)
                pa, pb = population[a], population[b]
                parents.append(pa if rank_key(pa) <= rank_key(pb) else pb)
            u = rng.random()
            child = int(round(parents[0] + u * (parents[1] - parents[0])))
            if rng.random() < ga.mutation_rate:
                child += 1 if rng.random() < 0.5 else -1
            children.append(min(max(child, ga.k_min), ga.k_max))
        population = children
        evaluate(population)
        best = min(cache, key=rank_key)
        history.append(cache[best][0])

    warnings = []
    if all(cache[k][1] for k in cache):
        msg = f"every evaluated k collapsed to a single cluster; falling back to k={ga.k_min}"
        logger.warning(msg)
        warnings.append(msg)
        if ga.k_min not in cache:
            evaluate([ga.k_min])
        best = ga.k_min
    return GaResult(best, cache[best][2], history, {k: v[0] for k, v in sorted(cache.items())}, warnings)


@dataclass
class CategoryTopics:
    best_k: int
    topics: list[list[str]]  # per topic, top terms (readable surface forms)
    stems: list[list[str]]


def _surface_labels(streams: Sequence[TokenStream]) -> dict[str, str]:
    """Most frequent pre-stemming form of each stem (ties: alphabetical)."""
    seen: dict[str, Counter] = {}
    for s in streams:
        for stem, surface in zip(s.tokens, s.surfaces):
            seen.setdefault(stem, Counter())[surface] += 1
    return {stem: min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0] for stem, c in seen.items()}


def topics_by_category(
    corpus: Corpus,
    prep: PrepConfig | None = None,
    ga: GaConfig | None = None,
    seed: int = 0,
    *,
    lda_iterations: int = 500,
    terms_per_topic: int = 5,
    jobs: int = 1,
) -> tuple[dict[RootCause, CategoryTopics], list[str]]:
    """Run the LDA normalization and LDA-GA separately on each category's reports.

    Categories with fewer than 4 labeled reports are skipped and named in
    the returned warning list.
    """
    prep = prep or PrepConfig.lda()
    if prep.spell_correction and prep.spell_vocab is None:
        prep = prep.with_spell_vocab(r.summary for r in corpus.reports)
    result: dict[RootCause, CategoryTopics] = {}
    warnings: list[str] = []
    for rc in ROOT_CAUSES:
        reports = [r for r in corpus.reports if r.label is rc]
        if len(reports) < 4:
            warnings.append(f"{rc.value}: skipped ({len(reports)} labeled reports, need >= 4)")
            continue
        streams = [normalize(r.summary, prep, r.id) for r in reports]
        streams = [s for s in streams if len(s)]
        if len(streams) < 4:
            warnings.append(f"{rc.value}: skipped (fewer than 4 non-empty reports after normalization)")
            continue
        ga_result = lda_ga(streams, ga, lda_iterations, seed + rc.index, jobs=jobs)
        warnings.extend(f"{rc.value}: {w}" for w in ga_result.warnings)
        labels = _surface_labels(streams)
        model = ga_result.model
        stems = [[t for t, _ in top_terms(model, i, terms_per_topic)] for i in range(model.k)]
        result[rc] = CategoryTopics(
            best_k=ga_result.best_k,
            topics=[[labels.get(t, t) for t in topic] for topic in stems],
            stems=stems,
        )
    return result, warnings


def render_topics_table(topics: dict[RootCause, CategoryTopics], max_topics: int = MAX_RENDERED_TOPICS) -> str:
    """One row per category, the leading term of each topic, '-' where there is no topic."""
    width = max(len(rc.title) for rc in ROOT_CAUSES)
    header = [f"Topic {i + 1}" for i in range(max_topics)]
    rows = [[rc.title] + [
        (ct.topics[i][0] if i < len(ct.topics) and ct.topics[i] else "-") for i in range(max_topics)
    ] for rc, ct in topics.items()]
    cols = [max([len(h)] + [len(r[i + 1]) for r in rows]) for i, h in enumerate(header)]
    lines = [f"{'Categories':<{width}} | " + " | ".join(h.ljust(c) for h, c in zip(header, cols))]
    for r in rows:
        lines.append(f"{r[0]:<{width}} | " + " | ".join(v.ljust(c) for v, c in zip(r[1:], cols)))
    return "\n".join(line.rstrip() for line in lines)


def topics_to_dict(topics: dict[RootCause, CategoryTopics]) -> dict:
    return {
        rc.value: {"best_k": ct.best_k, "topics": ct.topics, "stems": ct.stems}
        for rc, ct in topics.items()
    }
