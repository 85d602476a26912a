"""Generated corpora with known structure, for checks and demos."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np

from bugroot.corpus import ROOT_CAUSES, BugEvent, BugReport, Corpus, EventKind, Resolution, RootCause
from bugroot.textprep import PrepConfig, normalize

_ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v", "z", "br", "dr", "gl", "pl", "tr")
_VOWELS = ("a", "o", "u")


def pseudo_words(n: int, seed: int = 0, taken: set[str] | None = None) -> list[str]:
    """``n`` distinct nonce words that survive normalization as a single distinct term."""
    rng = np.random.default_rng(seed)
    config = PrepConfig.classifier()
    lda = PrepConfig.lda()
    taken = set() if taken is None else taken
    words: list[str] = []
    while len(words) < n:
        syllables = [rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(3)]
        word = "".join(syllables) + rng.choice(("k", "p", "t", "m"))
        toks = normalize(word, config).tokens
        if toks != (word,) or normalize(word, lda).tokens != (word,) or word in taken:
            continue
        taken.add(word)
        words.append(word)
    return words


def separable_corpus(
    per_class: int | dict[RootCause, int] = 120,
    *,
    category_words: int = 10,
    noise_words: int = 30,
    signal_tokens: int = 6,
    noise_tokens: int = 6,
    seed: int = 0,
) -> Corpus:
    """Nine categories with disjoint vocabularies plus shared noise terms."""
    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    vocab = {rc: pseudo_words(category_words, seed * 100 + rc.index, taken) for rc in ROOT_CAUSES}
    noise = pseudo_words(noise_words, seed * 100 + 99, taken)
    counts = per_class if isinstance(per_class, dict) else {rc: per_class for rc in ROOT_CAUSES}
    reports = []
    for rc in ROOT_CAUSES:
        for i in range(counts.get(rc, 0)):
            words = list(rng.choice(vocab[rc], signal_tokens)) + list(rng.choice(noise, noise_tokens))
            rng.shuffle(words)
            reports.append(
                BugReport(
                    id=f"{rc.value}-{i:04d}",
                    ecosystem="synthetic",
                    project="separable",
                    title=f"report {i}",
                    summary=" ".join(words),
                    label=rc,
                    resolution=Resolution.FIXED,
                )
            )
    return Corpus(tuple(reports), provenance=f"synthetic:separable(seed={seed})")


def planted_topic_docs(
    docs_per_topic: int = 50,
    n_topics: int = 2,
    words_per_topic: int = 12,
    doc_length: int = 30,
    seed: int = 0,
) -> tuple[list[list[str]], list[list[str]]]:
    """Documents that each draw every token from one of ``n_topics`` disjoint vocabularies.

    Returns (docs as token lists, planted vocabularies).
    """
    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    vocabs = [pseudo_words(words_per_topic, seed * 100 + t, taken) for t in range(n_topics)]
    docs = []
    for t in range(n_topics):
        for _ in range(docs_per_topic):
            docs.append([str(w) for w in rng.choice(vocabs[t], doc_length)])
    return docs, vocabs


def reference_counts() -> dict[RootCause, int]:
    """Category counts for 1,139 reports with the shares reported for the original dataset."""
    return {
        RootCause.PROGRAM_ANOMALY: 470,
        RootCause.GUI: 194,
        RootCause.CONFIGURATION: 182,
        RootCause.TEST_CODE: 80,
        RootCause.PERFORMANCE: 46,
        RootCause.PERMISSION_DEPRECATION: 45,
        RootCause.NETWORK: 44,
        RootCause.SECURITY: 44,
        RootCause.DATABASE: 34,
    }


def timeline(start: datetime, gaps_hours: list[float | None]) -> tuple[BugEvent, ...]:
    """Events in lifecycle order separated by the given gaps; ``None`` skips an event."""
    kinds = list(EventKind)
    events = [BugEvent(kinds[0], start)]
    t = start
    for kind, gap in zip(kinds[1:], gaps_hours):
        if gap is None:
            continue
        t = t + timedelta(hours=gap)
        events.append(BugEvent(kind, t))
    return tuple(events)


EPOCH = datetime(2015, 8, 15, tzinfo=timezone.utc)
