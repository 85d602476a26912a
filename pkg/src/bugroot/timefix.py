"""Bug-fixing delay metrics and per-category box-plot statistics.

Five intervals, in fractional hours, between consecutive lifecycle events:

    DBR  reported      -> first-response
    DBA  first-response -> assigned
    DBC  assigned      -> commit-start
    DBF  commit-start  -> commit-end
    DAC  commit-end    -> resolved

Quantiles use linear interpolation between closest ranks (numpy's default,
Hyndman and Fan type 7).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from bugroot.corpus import ROOT_CAUSES, BugReport, Corpus, EventKind, Resolution, RootCause

logger = logging.getLogger(__name__)


class TimelineError(ValueError):
    """An interval between two lifecycle events is negative."""


class DelayMetric(str, Enum):
    DBR = "dbr"
    DBA = "dba"
    DBC = "dbc"
    DBF = "dbf"
    DAC = "dac"

    @classmethod
    def parse(cls, text: str) -> DelayMetric:
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown delay metric {text!r}; expected one of {[m.value for m in cls]}") from None


_ENDPOINTS = {
    DelayMetric.DBR: (EventKind.REPORTED, EventKind.FIRST_RESPONSE),
    DelayMetric.DBA: (EventKind.FIRST_RESPONSE, EventKind.ASSIGNED),
    DelayMetric.DBC: (EventKind.ASSIGNED, EventKind.COMMIT_START),
    DelayMetric.DBF: (EventKind.COMMIT_START, EventKind.COMMIT_END),
    DelayMetric.DAC: (EventKind.COMMIT_END, EventKind.RESOLVED),
}


@dataclass(frozen=True, slots=True)
class DelaySet:
    dbr: float | None = None
    dba: float | None = None
    dbc: float | None = None
    dbf: float | None = None
    dac: float | None = None

    def get(self, metric: DelayMetric) -> float | None:
        return getattr(self, metric.value)


def compute_delays(report: BugReport) -> DelaySet:
    """Delays for one report; a metric is ``None`` when either of its events is missing."""
    values: dict[str, float | None] = {}
    for metric, (start_kind, end_kind) in _ENDPOINTS.items():
        start, end = report.event(start_kind), report.event(end_kind)
        if start is None or end is None:
            values[metric.value] = None
            continue
        hours = (end - start).total_seconds() / 3600.0
        if hours < 0:
            raise TimelineError(
                f"report {report.id}: {end_kind.value} precedes {start_kind.value} by {-hours:g} h"
            )
        values[metric.value] = hours
    return DelaySet(**values)


@dataclass(frozen=True, slots=True)
class BoxStats:
    n: int
    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float

    @classmethod
    def of(cls, values) -> BoxStats:
        a = np.asarray(values, dtype=np.float64)
        if a.size == 0:
            raise ValueError("no values")
        q1, med, q3 = np.quantile(a, [0.25, 0.5, 0.75])
        # the mean of identical floats can drift by an ulp; keep it inside [min, max]
        mean = min(max(float(a.mean()), float(a.min())), float(a.max()))
        return cls(int(a.size), float(a.min()), float(q1), float(med), mean, float(q3), float(a.max()))

    def to_dict(self) -> dict[str, float | int]:
        return {k: getattr(self, k) for k in STATS_FIELDS}


STATS_FIELDS = ("n", "min", "q1", "median", "mean", "q3", "max")
CSV_HEADER = ("category", "metric", *STATS_FIELDS)


def delay_stats(
    corpus: Corpus, metric: DelayMetric | str
) -> tuple[dict[RootCause, BoxStats], list[str]]:
    """Per-category box statistics over fixed, labeled reports that have ``metric``.

    Reports with corrupt timelines are skipped; categories without any value are
    omitted. Both produce a warning in the returned list.
    """
    metric = DelayMetric.parse(metric) if isinstance(metric, str) else metric
    buckets: dict[RootCause, list[float]] = {rc: [] for rc in ROOT_CAUSES}
    warnings: list[str] = []
    for report in corpus:
        if report.label is None or report.resolution is not Resolution.FIXED:
            continue
        try:
            value = compute_delays(report).get(metric)
        except TimelineError as exc:
            warnings.append(f"skipped: {exc}")
            continue
        if value is not None:
            buckets[report.label].append(value)
    out = {}
    for rc in ROOT_CAUSES:
        if buckets[rc]:
            out[rc] = BoxStats.of(buckets[rc])
        else:
            warnings.append(f"{rc.value}: no {metric.value.upper()} values")
    for w in warnings:
        logger.warning(w)
    return out, warnings


def stats_csv(rows: dict[DelayMetric, dict[RootCause, BoxStats]], precision: int = 4) -> str:
    """CSV with one line per (category, metric), floats at fixed precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for metric, per_cat in rows.items():
        for rc, s in per_cat.items():
            cells = [f"{getattr(s, k):.{precision}f}" for k in STATS_FIELDS[1:]]
            writer.writerow([rc.value, metric.value.upper(), s.n, *cells])
    return buf.getvalue()
