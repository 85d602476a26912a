from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from bugroot.textprep.porter import porter_stem

_DATA = resources.files("bugroot.textprep") / "data"


def load_term_list(path: str | Path | None = None, *, default: str = "stopwords.txt") -> frozenset[str]:
    """Read a one-term-per-line file; ``#`` starts a comment line."""
    text = Path(path).read_text(encoding="utf-8") if path else (_DATA / default).read_text(encoding="utf-8")
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def load_wordclasses(path: str | Path | None = None) -> dict[str, frozenset[str]]:
    text = Path(path).read_text(encoding="utf-8") if path else (_DATA / "wordclasses.tsv").read_text(encoding="utf-8")
    lexicon = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        word, _, classes = line.partition("\t")
        lexicon[word.strip().lower()] = frozenset(c.strip() for c in classes.split(",") if c.strip())
    return lexicon


DEFAULT_STOPWORDS = load_term_list(default="stopwords.txt")
DEFAULT_KEYWORDS = load_term_list(default="keywords.txt")
DEFAULT_WORDCLASSES = load_wordclasses()


class Pipeline(str, Enum):
    CLASSIFIER = "classifier"
    LDA = "lda"


@dataclass(frozen=True)
class PrepConfig:
    pipeline: Pipeline = Pipeline.CLASSIFIER
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    keywords: frozenset[str] = DEFAULT_KEYWORDS
    min_token_len: int = 2
    spell_correction: bool = False
    pos_filter: bool = False
    expand_contractions: bool = False
    singularize: bool = False
    use_title: bool = False
    wordclasses: Mapping[str, frozenset[str]] = field(default_factory=lambda: DEFAULT_WORDCLASSES, compare=False, repr=False)
    spell_vocab: Mapping[str, int] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pipeline", Pipeline(self.pipeline))
        if self.min_token_len < 1:
            raise ValueError("min_token_len must be >= 1")
        if self.pipeline is Pipeline.LDA and not (self.singularize and self.expand_contractions):
            raise ValueError("the lda pipeline requires singularization and contraction expansion")

    @classmethod
    def classifier(cls, **overrides) -> PrepConfig:
        return cls(pipeline=Pipeline.CLASSIFIER, **overrides)

    @classmethod
    def lda(cls, **overrides) -> PrepConfig:
        settings = dict(expand_contractions=True, singularize=True, pos_filter=True)
        settings.update(overrides)
        return cls(pipeline=Pipeline.LDA, **settings)

    def with_spell_vocab(self, texts: Iterable[str]) -> PrepConfig:
        return replace(self, spell_vocab=build_spell_vocab(texts))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wordclasses")
        d.pop("spell_vocab")
        d["pipeline"] = self.pipeline.value
        d["stopwords"] = sorted(self.stopwords)
        d["keywords"] = sorted(self.keywords)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> PrepConfig:
        d = dict(d)
        d["stopwords"] = frozenset(d.get("stopwords", DEFAULT_STOPWORDS))
        d["keywords"] = frozenset(d.get("keywords", DEFAULT_KEYWORDS))
        return cls(**d)


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple[str, ...]
    source_id: str = ""
    # pre-stemming lowercase form of each token, used to label topics readably
    surfaces: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+")
_SEPARATORS = re.compile(r"[^A-Za-z]+")
_WORD = re.compile(r"[A-Za-z0-9_]+")


def camel_split(identifier: str) -> list[str]:
    """Split at underscores, digits, non-letters and case transitions; separators are dropped.

    >>> camel_split("HTML5Parser")
    ['HTML', 'Parser']
    """
    parts = []
    for chunk in _SEPARATORS.split(identifier):
        parts.extend(_CAMEL.findall(chunk))
    return parts


_CONTRACTIONS = {
    "won't": "will not",
    "can't": "can not",
    "cannot": "can not",
    "shan't": "shall not",
    "ain't": "is not",
    "let's": "let us",
    "it's": "it is",
    "that's": "that is",
    "there's": "there is",
    "what's": "what is",
    "here's": "here is",
    "he's": "he is",
    "she's": "she is",
    "where's": "where is",
    "who's": "who is",
}
_SUFFIX_CONTRACTIONS = (
    ("n't", " not"),
    ("'re", " are"),
    ("'ll", " will"),
    ("'ve", " have"),
    ("'m", " am"),
    ("'d", " would"),
)
_APOSTROPHE_WORD = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)+|[A-Za-z]+")


def expand_contractions(text: str) -> str:
    text = text.replace("’", "'").replace("‘", "'")

    def expand(match: re.Match) -> str:
        word = match.group(0)
        low = word.lower()
        if low in _CONTRACTIONS:
            return _CONTRACTIONS[low]
        for suffix, repl in _SUFFIX_CONTRACTIONS:
            if low.endswith(suffix) and len(low) > len(suffix):
                return word[: -len(suffix)] + repl
        return word

    return _APOSTROPHE_WORD.sub(expand, text)


def singularize(word: str) -> str:
    """Rule-based plural stripping (ies/es/s); keeps the original casing of the stem."""
    low = word.lower()
    if len(low) <= 3 or not low.endswith("s"):
        return word
    if low.endswith("ies") and len(low) > 4:
        return word[:-3] + ("Y" if word[-3].isupper() else "y")
    if low.endswith(("sses", "shes", "ches", "xes", "zes")):
        return word[:-2]
    if low.endswith(("ss", "us", "is")):
        return word
    return word[:-1]


def build_spell_vocab(texts: Iterable[str]) -> Counter:
    counts: Counter = Counter()
    for text in texts:
        counts.update(w.lower() for w in _WORD.findall(text) if w.isalpha())
    return counts


_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


def _edits1(word: str) -> set[str]:
    splits = [(word[:i], word[i:]) for i in range(len(word) + 1)]
    deletes = [a + b[1:] for a, b in splits if b]
    transposes = [a + b[1] + b[0] + b[2:] for a, b in splits if len(b) > 1]
    replaces = [a + c + b[1:] for a, b in splits if b for c in _ALPHABET]
    inserts = [a + c + b for a, b in splits for c in _ALPHABET]
    return set(deletes + transposes + replaces + inserts) - {word}


def spell_correct(word: str, vocab: Mapping[str, int], *, rare: int = 1, common: int = 5) -> str:
    """Replace a hapax word with its most frequent edit-distance-1 neighbour, if that neighbour is common."""
    low = word.lower()
    if vocab.get(low, 0) != rare:
        return word
    ranked = [(-vocab.get(c, 0), c) for c in _edits1(low) if vocab.get(c, 0) >= common]
    return min(ranked)[1] if ranked else word


def _keep_by_wordclass(word: str, lexicon: Mapping[str, frozenset[str]]) -> bool:
    classes = lexicon.get(word.lower())
    return classes is None or bool(classes & {"noun", "verb"})


def _passes_filters(token: str, config: PrepConfig) -> bool:
    return (
        len(token) >= config.min_token_len
        and token not in config.stopwords
        and token not in config.keywords
    )


def normalize(text: str, config: PrepConfig | None = None, source_id: str = "") -> TokenStream:
    """Turn free text into a stream of stemmed lowercase terms."""
    config = config or PrepConfig()
    if config.expand_contractions:
        text = expand_contractions(text)

    tokens: list[str] = []
    surfaces: list[str] = []
    for word in _WORD.findall(text):
        if config.spell_correction and config.spell_vocab and word.isalpha():
            word = spell_correct(word, config.spell_vocab)
        if config.pos_filter and not _keep_by_wordclass(word, config.wordclasses):
            continue
        if config.singularize:
            word = singularize(word)
        for part in camel_split(word):
            term = part.lower()
            if not _passes_filters(term, config):
                continue
            stem = porter_stem(term)
            if not _passes_filters(stem, config):
                continue
            tokens.append(stem)
            surfaces.append(term)
    return TokenStream(tuple(tokens), source_id, tuple(surfaces))
