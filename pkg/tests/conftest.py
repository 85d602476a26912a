from __future__ import annotations

import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


def record(id: str, label: str | None = "gui-issue", summary: str = "button renders off screen", **extra) -> dict:
    base = {
        "id": id,
        "ecosystem": "eclipse",
        "project": "swt",
        "title": f"title {id}",
        "summary": summary,
        "label": label,
        "resolution": "fixed",
        "events": [],
    }
    base.update(extra)
    return base


def write_jsonl(path: Path, rows: list) -> Path:
    lines = [r if isinstance(r, str) else json.dumps(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def data_dir() -> Path:
    return DATA
