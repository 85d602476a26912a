from __future__ import annotations

import csv
import io
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugroot.corpus import BugEvent, BugReport, Corpus, EventKind, Resolution, RootCause
from bugroot.synthetic import EPOCH, timeline
from bugroot.timefix import (
    CSV_HEADER,
    BoxStats,
    DelayMetric,
    DelaySet,
    TimelineError,
    compute_delays,
    delay_stats,
    stats_csv,
)
from oracles import quantile_sorted


def report(id: str, gaps, label=RootCause.SECURITY, resolution=Resolution.FIXED) -> BugReport:
    return BugReport(id, "e", "p", "t", "s", label, timeline(EPOCH, gaps), resolution)


def test_same_instant_gives_zeros():
    assert compute_delays(report("a", [0, 0, 0, 0, 0])) == DelaySet(0.0, 0.0, 0.0, 0.0, 0.0)


def test_two_hour_response():
    r = BugReport(
        "a", "e", "p", "t", "s",
        events=(BugEvent(EventKind.REPORTED, EPOCH), BugEvent(EventKind.FIRST_RESPONSE, EPOCH + timedelta(hours=2))),
    )
    assert compute_delays(r).dbr == 2.0


def test_missing_assigned():
    d = compute_delays(report("a", [1.5, None, 4, 8, 0.25]))
    assert d.dba is None and d.dbc is None
    assert (d.dbr, d.dbf, d.dac) == (1.5, 8.0, 0.25)


def test_out_of_order_events_are_an_error():
    r = BugReport(
        "bad", "e", "p", "t", "s",
        events=(
            BugEvent(EventKind.REPORTED, EPOCH + timedelta(hours=5)),
            BugEvent(EventKind.FIRST_RESPONSE, EPOCH),
        ),
    )
    with pytest.raises(TimelineError):
        compute_delays(r)


def test_single_value_category():
    stats, _ = delay_stats(Corpus((report("a", [3, 1, 1, 1, 1]),)), DelayMetric.DBR)
    s = stats[RootCause.SECURITY]
    assert s.min == s.q1 == s.median == s.q3 == s.max == s.mean == 3.0 and s.n == 1


def test_hand_built_five_reports():
    reports = tuple(report(str(i), [h, 0, 0, 0, 0]) for i, h in enumerate([1, 2, 3, 4, 100]))
    s = delay_stats(Corpus(reports), "dbr")[0][RootCause.SECURITY]
    assert (s.median, s.mean, s.q1, s.q3) == (3.0, 22.0, 2.0, 4.0)


def test_filters_and_warnings():
    corrupt = BugReport(
        "c", "e", "p", "t", "s", RootCause.GUI,
        (BugEvent(EventKind.REPORTED, EPOCH + timedelta(hours=1)), BugEvent(EventKind.FIRST_RESPONSE, EPOCH)),
        Resolution.FIXED,
    )
    corpus = Corpus((
        report("a", [2, 0, 0, 0, 0]),
        report("nf", [50, 0, 0, 0, 0], resolution=Resolution.NOT_FIXED),
        report("u", [50, 0, 0, 0, 0], label=None),
        corrupt,
    ))
    stats, warnings = delay_stats(corpus, DelayMetric.DBR)
    assert list(stats) == [RootCause.SECURITY] and stats[RootCause.SECURITY].n == 1
    assert any("skipped" in w and "c:" in w for w in warnings)
    assert sum("no DBR values" in w for w in warnings) == 8


def test_unknown_metric():
    with pytest.raises(ValueError):
        delay_stats(Corpus(()), "dbx")


def test_csv_layout():
    reports = tuple(report(str(i), [i, 1, 2, 3, 4]) for i in range(4))
    rows = {m: delay_stats(Corpus(reports), m)[0] for m in DelayMetric}
    text = stats_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == CSV_HEADER == ("category", "metric", "n", "min", "q1", "median", "mean", "q3", "max")
    assert parsed[1] == ["security-issue", "DBR", "4", "0.0000", "0.7500", "1.5000", "1.5000", "2.2500", "3.0000"]
    assert len(parsed) == 6


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=60))
def test_box_stats_match_sort_oracle(values):
    s = BoxStats.of(values)
    assert s.n == len(values)
    assert s.min == min(values) and s.max == max(values)
    for got, q in ((s.q1, 0.25), (s.median, 0.5), (s.q3, 0.75)):
        assert got == pytest.approx(quantile_sorted(values, q), rel=1e-12, abs=1e-9)
    assert s.min <= s.q1 <= s.median <= s.q3 <= s.max
    assert s.min <= s.mean <= s.max


_gap = st.none() | st.integers(0, 10_000).map(lambda m: m / 4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(list(RootCause)), st.lists(_gap, min_size=5, max_size=5)), max_size=30))
def test_n_sums_to_reports_with_metric(items):
    reports = tuple(report(str(i), gaps, label=rc) for i, (rc, gaps) in enumerate(items))
    corpus = Corpus(reports)
    for metric in DelayMetric:
        stats, _ = delay_stats(corpus, metric)
        present = sum(1 for r in reports if compute_delays(r).get(metric) is not None)
        assert sum(s.n for s in stats.values()) == present
