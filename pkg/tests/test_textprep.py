from __future__ import annotations

import re
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugroot.textprep import (
    DEFAULT_KEYWORDS,
    DEFAULT_STOPWORDS,
    PrepConfig,
    build_spell_vocab,
    camel_split,
    expand_contractions,
    normalize,
    porter_stem,
    singularize,
    spell_correct,
)
from bugroot.textprep.normalize import _passes_filters
from conftest import DATA


def _porter_vocabulary() -> list[tuple[str, str]]:
    rows = []
    for line in (DATA / "porter_vocabulary.tsv").read_text().splitlines():
        if line and not line.startswith("#"):
            word, stem = line.split("\t")
            rows.append((word, stem))
    return rows


def test_porter_matches_reference_vocabulary():
    rows = _porter_vocabulary()
    assert len(rows) > 10_000
    wrong = [(w, s, porter_stem(w)) for w, s in rows if porter_stem(w) != s]
    assert wrong == []


@pytest.mark.parametrize(
    "word, stem",
    [
        ("caresses", "caress"),
        ("cat", "cat"),
        ("relational", "relat"),
        ("ponies", "poni"),
        ("hopping", "hop"),
        ("conditional", "condit"),
        ("generalizations", "gener"),
        ("oscillators", "oscil"),
        ("is", "is"),
    ],
)
def test_porter_examples(word, stem):
    assert porter_stem(word) == stem


@pytest.mark.parametrize(
    "identifier, parts",
    [
        ("getNamespaceForPrefix", ["get", "Namespace", "For", "Prefix"]),
        ("web_xml", ["web", "xml"]),
        ("HTML5Parser", ["HTML", "Parser"]),
        ("HRegionServer", ["H", "Region", "Server"]),
        ("DOMServices::getNamespaceForPrefix", ["DOM", "Services", "get", "Namespace", "For", "Prefix"]),
        ("", []),
        ("___42", []),
    ],
)
def test_camel_split(identifier, parts):
    assert camel_split(identifier) == parts


def test_normalize_sentence_example():
    out = normalize("Database connection stops action servlet from loading", PrepConfig.classifier())
    assert set(out.tokens) == {"databas", "connect", "stop", "action", "servlet", "load"}


def test_normalize_empty():
    assert normalize("", PrepConfig.classifier()).tokens == ()
    assert normalize("   !!! 123 ", PrepConfig.lda()).tokens == ()


def test_single_letters_dropped_after_split():
    assert normalize("HRegionServer", PrepConfig.classifier()).tokens == ("region", "server")
    assert normalize("HRegionServer", PrepConfig.classifier(min_token_len=1)).tokens == ("h", "region", "server")


def test_keywords_and_stopwords_removed():
    out = normalize("the public static void main throws an exception", PrepConfig.classifier())
    assert out.tokens == ("main", "except")


def test_lda_requires_singularize_and_contractions():
    with pytest.raises(ValueError):
        PrepConfig.lda(singularize=False)
    cfg = PrepConfig.lda()
    assert cfg.singularize and cfg.expand_contractions


def test_contractions():
    assert expand_contractions("it doesn't load, can't connect") == "it does not load, can not connect"
    assert expand_contractions("we're here") == "we are here"


@pytest.mark.parametrize(
    "word, singular",
    [("queries", "query"), ("classes", "class"), ("buttons", "button"), ("status", "status"), ("bus", "bus"), ("its", "its")],
)
def test_singularize(word, singular):
    assert singularize(word) == singular


def test_spell_correction_is_conservative():
    vocab = build_spell_vocab(["connection " * 6, "conection", "rare1 rareword"])
    assert spell_correct("conection", vocab) == "connection"
    assert spell_correct("rareword", vocab) == "rareword"  # no common neighbour
    assert spell_correct("connection", vocab) == "connection"
    cfg = PrepConfig.lda(spell_correction=True).with_spell_vocab(["connection " * 6, "conection"])
    assert normalize("conection", cfg).tokens == ("connect",)


def test_pos_filter_keeps_unknown_words():
    cfg = PrepConfig.lda()
    out = normalize("quickly render the beautiful widget", cfg)
    assert "quickli" not in out.tokens and "beauti" not in out.tokens
    assert {"render", "widget"} <= set(out.tokens)


def test_title_is_not_used_by_default():
    assert PrepConfig.classifier().use_title is False


def test_surface_forms_track_tokens():
    out = normalize("Connections failing", PrepConfig.lda())
    assert out.surfaces == ("connection", "failing")
    assert out.tokens == ("connect", "fail")


def test_default_lists_are_pinned():
    assert 150 <= len(DEFAULT_STOPWORDS) <= 190
    assert {"public", "class", "void", "xmlns"} <= DEFAULT_KEYWORDS


def test_config_round_trip():
    cfg = PrepConfig.lda(min_token_len=3)
    assert PrepConfig.from_dict(cfg.to_dict()) == cfg


_text = st.text(
    st.sampled_from(list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_ '.,-:")), max_size=120
)
_configs = st.sampled_from([PrepConfig.classifier(), PrepConfig.lda(), PrepConfig.classifier(min_token_len=1)])


@settings(max_examples=300, deadline=None)
@given(_text, _configs)
def test_tokens_are_clean(text, cfg):
    out = normalize(text, cfg)
    for tok in out.tokens:
        assert re.fullmatch(r"[a-z]+", tok)
        assert tok not in cfg.stopwords and tok not in cfg.keywords
        assert len(tok) >= cfg.min_token_len


@settings(max_examples=300, deadline=None)
@given(_text, _configs)
def test_filters_are_idempotent(text, cfg):
    tokens = normalize(text, cfg).tokens
    assert [t for t in tokens if _passes_filters(t, cfg)] == list(tokens)


@settings(max_examples=300, deadline=None)
@given(_text, _configs)
def test_deterministic(text, cfg):
    assert normalize(text, cfg) == normalize(text, cfg)


@settings(max_examples=300, deadline=None)
@given(_text)
def test_unstemmed_pass_is_stable(text):
    # with stemming aside, re-normalizing the surface stream reproduces it
    cfg = PrepConfig.classifier()
    surfaces = normalize(text, cfg).surfaces
    again = normalize(" ".join(surfaces), cfg).surfaces
    assert Counter(again) == Counter(surfaces)


def test_stream_idempotence_counterexample():
    # single-pass Porter is not a projection, so re-stemming can shorten a stem
    first = normalize("database", PrepConfig.classifier()).tokens
    second = normalize(" ".join(first), PrepConfig.classifier()).tokens
    assert first == ("databas",) and second == ("databa",)


@settings(max_examples=500, deadline=None)
@given(st.text(st.sampled_from("abcdefghijklmnopqrstuvwxyz"), min_size=1, max_size=15))
def test_porter_never_lengthens(word):
    stem = porter_stem(word)
    assert re.fullmatch(r"[a-z]+", stem)
    assert len(stem) <= len(word)
