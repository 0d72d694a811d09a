"""Line-oriented JSON input with positioned errors."""

from __future__ import annotations

import json
from collections.abc import Iterator
from pathlib import Path


class InputParseError(Exception):
    """An input file failed to parse; carries the offending line number."""

    def __init__(self, path: Path | str, line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


def iter_jsonl(path: Path | str) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for each non-blank line of a JSONL file."""
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputParseError(path, line_number, f"invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise InputParseError(path, line_number, "expected a JSON object")
            yield line_number, obj
