"""Line-delimited JSON helpers shared across the toolkit."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator


class JsonlError(ValueError):
    """Raised for malformed JSONL input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for every non-blank line; 1-based numbering."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise JsonlError(f"line {lineno}: invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(obj, dict):
                raise JsonlError(f"line {lineno}: expected a JSON object", line=lineno)
            yield lineno, obj


def read_jsonl(path: str | Path) -> list[dict]:
    return [obj for _, obj in iter_jsonl(path)]


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    """Write records one JSON object per line; returns the record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n
