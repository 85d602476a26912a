"""Paginated client for issue-tracker REST exports.

The client is schema-generic: a field-mapping file says where each report
field lives in the remote JSON. A minimal mapping for the Bugzilla REST API::

    [request]
    query_param = "quicksearch"
    offset_param = "offset"
    limit_param = "limit"
    records_key = "bugs"

    [fields]
    id = "id"
    project = "product"
    title = "summary"
    summary = "description"
    resolution = "resolution"

    [events]
    reported = "creation_time"
    resolved = "cf_last_resolved"

    [resolution_values]
    FIXED = "fixed"
    WONTFIX = "not-fixed"

Paths are dot-separated; integer segments index into lists.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping

import requests

from bugroot._toml import load_toml
from bugroot.corpus import Corpus, Reject, build_corpus

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class TrackerError(Exception):
    """Non-retryable HTTP failure, exhausted retries, or a payload of the wrong shape."""


@dataclass
class FieldMapping:
    query_param: str = "q"
    offset_param: str = "offset"
    limit_param: str = "limit"
    records_key: str | None = "records"
    fields: dict[str, str] = field(
        default_factory=lambda: {
            k: k
            for k in ("id", "ecosystem", "project", "title", "summary", "label", "resolution")
        }
    )
    events: dict[str, str] = field(default_factory=dict)
    resolution_values: dict[str, str] = field(default_factory=dict)
    label_values: dict[str, str] = field(default_factory=dict)
    ecosystem: str = ""

    @classmethod
    def load(cls, path: str | Path) -> FieldMapping:
        data = load_toml(path)
        request = data.get("request", {})
        mapping = cls(
            query_param=request.get("query_param", "q"),
            offset_param=request.get("offset_param", "offset"),
            limit_param=request.get("limit_param", "limit"),
            records_key=request.get("records_key", "records") or None,
            ecosystem=request.get("ecosystem", ""),
        )
        if "fields" in data:
            mapping.fields = {str(k): str(v) for k, v in data["fields"].items()}
        mapping.events = {str(k): str(v) for k, v in data.get("events", {}).items()}
        mapping.resolution_values = dict(data.get("resolution_values", {}))
        mapping.label_values = dict(data.get("label_values", {}))
        return mapping

    def to_record(self, raw: Mapping[str, Any]) -> dict[str, Any]:
        """Translate one remote record into the corpus JSONL schema."""
        record: dict[str, Any] = {}
        for name, path in self.fields.items():
            value = lookup(raw, path)
            record[name] = None if value is None else value
        if not record.get("ecosystem") and self.ecosystem:
            record["ecosystem"] = self.ecosystem
        if record.get("id") is not None:
            record["id"] = str(record["id"])
        res = record.get("resolution")
        if res is not None and self.resolution_values:
            record["resolution"] = self.resolution_values.get(str(res), "unknown")
        label = record.get("label")
        if label is not None and self.label_values:
            record["label"] = self.label_values.get(str(label), label)
        record["events"] = [
            {"kind": kind, "ts": ts}
            for kind, path in self.events.items()
            if (ts := lookup(raw, path)) not in (None, "")
        ]
        return record


def lookup(obj: Any, path: str) -> Any:
    for part in path.split("."):
        if isinstance(obj, Mapping):
            obj = obj.get(part)
        elif isinstance(obj, list) and part.isdigit() and int(part) < len(obj):
            obj = obj[int(part)]
        else:
            return None
        if obj is None:
            return None
    return obj


def _get_with_retry(
    session: requests.Session,
    url: str,
    params: dict[str, Any],
    headers: dict[str, str],
    *,
    max_retries: int,
    backoff: float,
    timeout: float,
    sleep: Callable[[float], None],
) -> requests.Response:
    for attempt in range(max_retries + 1):
        try:
            resp = session.get(url, params=params, headers=headers, timeout=timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            problem = f"network failure: {exc}"
        else:
            if 200 <= resp.status_code < 300:
                return resp
            if resp.status_code not in RETRYABLE_STATUS:
                raise TrackerError(f"HTTP {resp.status_code} from {resp.url}")
            problem = f"HTTP {resp.status_code}"
        if attempt == max_retries:
            raise TrackerError(f"giving up after {max_retries + 1} attempts: {problem}")
        delay = backoff * 2**attempt
        logger.warning("%s (attempt %d), retrying in %.2fs", problem, attempt + 1, delay)
        sleep(delay)
    raise AssertionError("unreachable")


def fetch_tracker(
    endpoint: str,
    query: str,
    page_size: int = 100,
    *,
    mapping: FieldMapping | None = None,
    token: str | None = None,
    max_retries: int = 4,
    backoff: float = 0.5,
    timeout: float = 30.0,
    max_records: int | None = None,
    session: requests.Session | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[dict[str, Any]]:
    """Yield raw JSON records page by page until a short or empty page."""
    if page_size < 1:
        raise ValueError("page_size must be positive")
    mapping = mapping or FieldMapping()
    session = session or requests.Session()
    headers = {"Accept": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"

    offset = 0
    yielded = 0
    while True:
        params = {mapping.query_param: query, mapping.offset_param: offset, mapping.limit_param: page_size}
        resp = _get_with_retry(
            session, endpoint, params, headers,
            max_retries=max_retries, backoff=backoff, timeout=timeout, sleep=sleep,
        )
        try:
            payload = resp.json()
        except ValueError as exc:
            raise TrackerError(f"schema mismatch: response is not JSON ({exc})") from exc
        page = payload if mapping.records_key is None else (
            payload.get(mapping.records_key) if isinstance(payload, Mapping) else None
        )
        if not isinstance(page, list):
            raise TrackerError(f"schema mismatch: expected a list under {mapping.records_key!r}")
        for raw in page:
            if not isinstance(raw, Mapping):
                raise TrackerError("schema mismatch: record is not an object")
            yield dict(raw)
            yielded += 1
            if max_records is not None and yielded >= max_records:
                return
        if len(page) < page_size:
            return
        offset += len(page)


def records_to_corpus(
    records: Iterator[Mapping[str, Any]] | list[Mapping[str, Any]],
    mapping: FieldMapping | None = None,
    provenance: str = "",
) -> tuple[Corpus, list[Reject]]:
    """Run fetched records through the same validation as file loading."""
    mapping = mapping or FieldMapping()
    return build_corpus((mapping.to_record(r) for r in records), provenance=provenance)
