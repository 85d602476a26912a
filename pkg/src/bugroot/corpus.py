"""Bug-report data model, corpus loading/serialization and label frequencies."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Fatal problem with a corpus source (unreadable file, bad format, ...)."""


class RowError(ValueError):
    """A single record failed validation; carries a short machine reason."""

    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class RootCause(Enum):
    """The nine root-cause categories. Declaration order is the canonical order."""

    CONFIGURATION = "configuration-issue"
    NETWORK = "network-issue"
    DATABASE = "database-issue"
    GUI = "gui-issue"
    PERFORMANCE = "performance-issue"
    PERMISSION_DEPRECATION = "permission-deprecation-issue"
    SECURITY = "security-issue"
    PROGRAM_ANOMALY = "program-anomaly-issue"
    TEST_CODE = "test-code-issue"

    @classmethod
    def parse(cls, text: str) -> RootCause:
        try:
            return cls(text)
        except ValueError:
            raise RowError("unknown label", repr(text)) from None

    @property
    def index(self) -> int:
        return _ROOT_CAUSE_INDEX[self]

    @property
    def title(self) -> str:
        return _TITLES[self]

    def __str__(self) -> str:
        return self.value


ROOT_CAUSES: tuple[RootCause, ...] = tuple(RootCause)
_ROOT_CAUSE_INDEX = {rc: i for i, rc in enumerate(ROOT_CAUSES)}
_TITLES = {
    RootCause.CONFIGURATION: "Configuration issue",
    RootCause.NETWORK: "Network issue",
    RootCause.DATABASE: "Database-related issue",
    RootCause.GUI: "GUI-related issue",
    RootCause.PERFORMANCE: "Performance issue",
    RootCause.PERMISSION_DEPRECATION: "Permission/Deprecation issue",
    RootCause.SECURITY: "Security issue",
    RootCause.PROGRAM_ANOMALY: "Program Anomaly issue",
    RootCause.TEST_CODE: "Test Code-related issue",
}


class EventKind(Enum):
    REPORTED = "reported"
    FIRST_RESPONSE = "first-response"
    ASSIGNED = "assigned"
    COMMIT_START = "commit-start"
    COMMIT_END = "commit-end"
    RESOLVED = "resolved"


_EVENT_ORDER = {kind: i for i, kind in enumerate(EventKind)}


class Resolution(Enum):
    FIXED = "fixed"
    NOT_FIXED = "not-fixed"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, text: str | None) -> Resolution:
        if text is None or text == "":
            return cls.UNKNOWN
        if text in ("fixed", "not-fixed"):
            return cls(text)
        return cls.UNKNOWN

    def to_json(self) -> str | None:
        return None if self is Resolution.UNKNOWN else self.value


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime (whole seconds)."""
    if not isinstance(text, str) or "T" not in text.upper():
        raise RowError("malformed timestamp", repr(text))
    raw = text.strip()
    if raw[-1] in "zZ":
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError:
        raise RowError("malformed timestamp", repr(text)) from None
    if ts.tzinfo is None:
        raise RowError("malformed timestamp", f"{text!r} has no UTC offset")
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True, slots=True)
class BugEvent:
    kind: EventKind
    timestamp: datetime


@dataclass(frozen=True, slots=True)
class BugReport:
    id: str
    ecosystem: str
    project: str
    title: str
    summary: str
    label: RootCause | None = None
    events: tuple[BugEvent, ...] = ()
    resolution: Resolution = Resolution.UNKNOWN

    def __post_init__(self) -> None:
        if not self.id:
            raise RowError("missing id")
        kinds = [e.kind for e in self.events]
        if len(set(kinds)) != len(kinds):
            raise RowError("duplicate event kind", self.id)
        # equal timestamps fall back to lifecycle order so the ordering is canonical
        ordered = tuple(sorted(self.events, key=lambda e: (e.timestamp, _EVENT_ORDER[e.kind])))
        if ordered != tuple(self.events):
            object.__setattr__(self, "events", ordered)

    def event(self, kind: EventKind) -> datetime | None:
        for ev in self.events:
            if ev.kind is kind:
                return ev.timestamp
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "ecosystem": self.ecosystem,
            "project": self.project,
            "title": self.title,
            "summary": self.summary,
            "label": self.label.value if self.label else None,
            "resolution": self.resolution.to_json(),
            "events": [
                {"kind": e.kind.value, "ts": format_timestamp(e.timestamp)}
                for e in self.events
            ],
        }


@dataclass(frozen=True)
class Corpus:
    reports: tuple[BugReport, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "reports", tuple(self.reports))
        dupes = [i for i, n in Counter(r.id for r in self.reports).items() if n > 1]
        if dupes:
            raise CorpusError(f"duplicate report ids: {sorted(dupes)[:5]}")

    def __len__(self) -> int:
        return len(self.reports)

    def __iter__(self):
        return iter(self.reports)

    def labeled_subset(self) -> Corpus:
        return Corpus(tuple(r for r in self.reports if r.label is not None), self.provenance)

    def filter(self, predicate) -> Corpus:
        return Corpus(tuple(r for r in self.reports if predicate(r)), self.provenance)


@dataclass(frozen=True, slots=True)
class Reject:
    """A source row that failed validation. ``row`` is 1-based (data rows only)."""

    row: int
    id: str | None
    reason: str
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"row": self.row, "id": self.id, "reason": self.reason, "detail": self.detail}


CSV_COLUMNS = (
    "id",
    "ecosystem",
    "project",
    "title",
    "summary",
    "label",
    "resolution",
    "ts_reported",
    "ts_first_response",
    "ts_assigned",
    "ts_commit_start",
    "ts_commit_end",
    "ts_resolved",
)
_CSV_EVENT_COLUMNS = {f"ts_{k.value.replace('-', '_')}": k for k in EventKind}


def _require_str(record: Mapping[str, Any], key: str, *, required: bool = False) -> str:
    value = record.get(key)
    if value is None:
        if required:
            raise RowError(f"missing {key}")
        return ""
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise RowError("schema mismatch", f"{key} must be a string")
    return str(value)


def report_from_record(record: Mapping[str, Any]) -> BugReport:
    """Validate one record in the JSONL schema and build a BugReport.

    Raises RowError with a short reason on any problem.
    """
    if not isinstance(record, Mapping):
        raise RowError("schema mismatch", "record is not an object")
    report_id = _require_str(record, "id", required=True)
    if not report_id:
        raise RowError("missing id")

    label_raw = record.get("label")
    label = None if label_raw in (None, "") else RootCause.parse(label_raw)

    raw_events = record.get("events") or []
    if not isinstance(raw_events, list):
        raise RowError("schema mismatch", "events must be a list")
    events = []
    for ev in raw_events:
        if not isinstance(ev, Mapping) or "kind" not in ev or "ts" not in ev:
            raise RowError("schema mismatch", "event needs kind and ts")
        try:
            kind = EventKind(ev["kind"])
        except ValueError:
            raise RowError("unknown event kind", repr(ev["kind"])) from None
        events.append(BugEvent(kind, parse_timestamp(ev["ts"])))

    resolution = record.get("resolution")
    if resolution is not None and not isinstance(resolution, str):
        raise RowError("schema mismatch", "resolution must be a string or null")

    return BugReport(
        id=report_id,
        ecosystem=_require_str(record, "ecosystem"),
        project=_require_str(record, "project"),
        title=_require_str(record, "title"),
        summary=_require_str(record, "summary"),
        label=label,
        events=tuple(events),
        resolution=Resolution.parse(resolution),
    )


def _csv_row_to_record(row: Mapping[str, str]) -> dict[str, Any]:
    record: dict[str, Any] = {k: (row.get(k) or None) for k in CSV_COLUMNS[:7]}
    record["events"] = [
        {"kind": kind.value, "ts": row[col]}
        for col, kind in _CSV_EVENT_COLUMNS.items()
        if row.get(col)
    ]
    return record


def build_corpus(
    records: Iterable[Any], provenance: str = ""
) -> tuple[Corpus, list[Reject]]:
    """Validate records row by row. Bad rows (including repeated ids) become rejects."""
    reports: list[BugReport] = []
    rejects: list[Reject] = []
    seen: set[str] = set()
    for row_no, record in enumerate(records, start=1):
        rid = record.get("id") if isinstance(record, Mapping) else None
        rid = str(rid) if rid not in (None, "") else None
        try:
            if isinstance(record, RowError):
                raise record
            report = report_from_record(record)
            if report.id in seen:
                raise RowError("duplicate id", report.id)
        except RowError as exc:
            rejects.append(Reject(row_no, rid, exc.reason, exc.detail))
            continue
        seen.add(report.id)
        reports.append(report)
    if rejects:
        logger.warning("%d of %d rows rejected from %s", len(rejects), len(reports) + len(rejects), provenance or "input")
    return Corpus(tuple(reports), provenance), rejects


def _iter_jsonl(text: str) -> Iterable[Any]:
    for line in text.split("\n"):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as exc:
            yield RowError("malformed json", str(exc))


def load_corpus(path: str | Path, format: str | None = None) -> tuple[Corpus, list[Reject]]:
    """Load a corpus from ``csv`` or ``jsonl``; format is guessed from the suffix if omitted."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "json":
        fmt = "jsonl"
    if fmt not in ("csv", "jsonl"):
        raise CorpusError(f"unknown corpus format: {fmt!r}")
    try:
        # newline="" keeps carriage returns inside quoted CSV cells intact
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc

    if fmt == "jsonl":
        records: Iterable[Any] = _iter_jsonl(text)
    else:
        reader = csv.DictReader(io.StringIO(text, newline=""))
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise CorpusError(f"CSV header missing columns: {missing}")
        records = (_csv_row_to_record(row) for row in reader)
    return build_corpus(records, provenance=str(path))


def dumps_jsonl(reports: Iterable[BugReport]) -> str:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in reports)


def dumps_csv(reports: Iterable[BugReport]) -> str:
    """CSV text; NUL characters cannot be written before Python 3.11 (use JSONL for those)."""
    buf = io.StringIO(newline="")
    # CRLF per RFC 4180; it also makes the writer quote cells holding a bare \r
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\r\n")
    writer.writeheader()
    for r in reports:
        d = r.to_dict()
        row = {k: d[k] if d[k] is not None else "" for k in CSV_COLUMNS[:7]}
        for col, kind in _CSV_EVENT_COLUMNS.items():
            ts = r.event(kind)
            row[col] = format_timestamp(ts) if ts else ""
        writer.writerow(row)
    return buf.getvalue()


def save_corpus(corpus: Corpus, path: str | Path, format: str = "jsonl") -> None:
    text = dumps_csv(corpus.reports) if format == "csv" else dumps_jsonl(corpus.reports)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


@dataclass(frozen=True, slots=True)
class Frequency:
    count: int
    share: float


def frequency(corpus: Corpus) -> dict[RootCause, Frequency]:
    """Count and share of each category over the labeled reports (all nine keys present)."""
    counts = Counter(r.label for r in corpus.reports if r.label is not None)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("corpus has no labeled reports")
    return {rc: Frequency(counts[rc], counts[rc] / total) for rc in ROOT_CAUSES}

