from __future__ import annotations

import pytest

from bugroot.corpus import EventKind, Resolution, RootCause
from bugroot.tracker import FieldMapping, TrackerError, fetch_tracker, lookup, records_to_corpus
from mock_tracker import MockTracker


def remote(i: int) -> dict:
    return {
        "id": 1000 + i,
        "product": "Platform",
        "summary": f"NPE in widget {i}",
        "comments": [{"text": f"stack trace for widget {i}"}],
        "resolution": "FIXED" if i % 2 == 0 else "WONTFIX",
        "creation_time": "2015-08-15T00:00:00Z",
        "cf_last_resolved": "2015-08-16T00:00:00Z",
    }


MAPPING_TOML = """
[request]
query_param = "quicksearch"
records_key = "bugs"
ecosystem = "eclipse"

[fields]
id = "id"
project = "product"
title = "summary"
summary = "comments.0.text"
resolution = "resolution"

[events]
reported = "creation_time"
resolved = "cf_last_resolved"

[resolution_values]
FIXED = "fixed"
WONTFIX = "not-fixed"
"""


@pytest.fixture
def mapping(tmp_path) -> FieldMapping:
    path = tmp_path / "map.toml"
    path.write_text(MAPPING_TOML)
    return FieldMapping.load(path)


def no_sleep(_):
    pass


def test_two_pages_of_fifty(mapping):
    with MockTracker([remote(i) for i in range(100)], records_key="bugs") as srv:
        records = list(fetch_tracker(srv.url, "status:fixed", 50, mapping=mapping))
    assert len(records) == 100
    # the third request sees an empty page and stops
    assert [r["params"]["offset"] for r in srv.requests] == ["0", "50", "100"]
    assert all(r["params"]["quicksearch"] == "status:fixed" for r in srv.requests)


def test_short_page_ends_stream(mapping):
    with MockTracker([remote(i) for i in range(30)], records_key="bugs") as srv:
        assert len(list(fetch_tracker(srv.url, "", 50, mapping=mapping))) == 30
    assert len(srv.requests) == 1


def test_empty_result(mapping):
    with MockTracker([], records_key="bugs") as srv:
        assert list(fetch_tracker(srv.url, "nothing", 50, mapping=mapping)) == []


def test_retries_then_succeeds(mapping):
    delays = []
    with MockTracker([remote(0)], failures=[503, 503], records_key="bugs") as srv:
        records = list(fetch_tracker(srv.url, "", 10, mapping=mapping, backoff=0.25, sleep=delays.append))
    assert len(records) == 1
    assert delays == [0.25, 0.5]


def test_retry_budget_is_bounded(mapping):
    with MockTracker([remote(0)], failures=[503] * 10, records_key="bugs") as srv:
        with pytest.raises(TrackerError, match="giving up after 3"):
            list(fetch_tracker(srv.url, "", 10, mapping=mapping, max_retries=2, sleep=no_sleep))
    assert len(srv.requests) == 3


def test_client_error_is_fatal_without_retry(mapping):
    with MockTracker([], failures=[404], records_key="bugs") as srv:
        with pytest.raises(TrackerError, match="404"):
            list(fetch_tracker(srv.url, "", 10, mapping=mapping, sleep=no_sleep))
    assert len(srv.requests) == 1


def test_network_failure_is_retried_then_reported():
    delays = []
    with pytest.raises(TrackerError, match="network failure"):
        list(fetch_tracker("http://127.0.0.1:9/none", "", 10, max_retries=2, sleep=delays.append, timeout=1))
    assert delays == [0.5, 1.0]


def test_schema_mismatch(mapping):
    with MockTracker([remote(0)], records_key="issues") as srv:
        with pytest.raises(TrackerError, match="schema mismatch"):
            list(fetch_tracker(srv.url, "", 10, mapping=mapping))


def test_bearer_token_header(mapping):
    with MockTracker([], records_key="bugs") as srv:
        list(fetch_tracker(srv.url, "", 10, mapping=mapping, token="s3cret"))
    assert srv.requests[0]["auth"] == "Bearer s3cret"


def test_max_records(mapping):
    with MockTracker([remote(i) for i in range(100)], records_key="bugs") as srv:
        assert len(list(fetch_tracker(srv.url, "", 50, mapping=mapping, max_records=7))) == 7


def test_records_go_through_load_validation(mapping):
    raw = [remote(0), remote(1), {**remote(2), "creation_time": "not a time"}]
    corpus, rejects = records_to_corpus(raw, mapping, provenance="mock")
    assert [r.id for r in corpus] == ["1000", "1001"]
    first = corpus.reports[0]
    assert first.ecosystem == "eclipse" and first.project == "Platform"
    assert first.summary == "stack trace for widget 0"
    assert first.resolution is Resolution.FIXED
    assert corpus.reports[1].resolution is Resolution.NOT_FIXED
    assert first.event(EventKind.REPORTED) is not None
    assert [r.reason for r in rejects] == ["malformed timestamp"]


def test_label_values_translate():
    m = FieldMapping(label_values={"Security": RootCause.SECURITY.value})
    rec = m.to_record({"id": "1", "summary": "xss", "label": "Security"})
    assert rec["label"] == "security-issue"


def test_lookup_paths():
    obj = {"a": {"b": [10, {"c": 3}]}}
    assert lookup(obj, "a.b.0") == 10
    assert lookup(obj, "a.b.1.c") == 3
    assert lookup(obj, "a.x") is None
    assert lookup(obj, "a.b.7") is None
