"""Line-oriented JSON helpers used by every file format in the toolkit."""

import json
from pathlib import Path
from typing import Any, Iterable, Iterator, Tuple

from .errors import FormatError


def read_records(path) -> Iterator[Tuple[int, Any]]:
    """Yield ``(line_number, parsed_object)`` for each non-blank line.

    Line numbers are 1-based so they can be quoted in diagnostics verbatim.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield line_number, json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(
                    f"{path}: line {line_number}: malformed JSON ({exc.msg})"
                ) from exc


def write_records(path, records: Iterable[Any]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")


def require_fields(obj: Any, fields: Iterable[str], path, line_number: int) -> None:
    """Raise FormatError unless ``obj`` is a dict carrying every field."""
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: line {line_number}: expected a JSON object")
    for field in fields:
        if field not in obj:
            raise FormatError(
                f"{path}: line {line_number}: missing required field {field!r}"
            )
