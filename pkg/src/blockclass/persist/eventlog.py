"""Append-only JSON-lines event log.

One JSON object per line. Interspersed ``checkpoint`` records carry the
state hash at that point; replay re-verifies every checkpoint, so any
divergence between the log and the apply functions is a loud failure with
a line number.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator


class CorruptLogLine(Exception):
    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        super().__init__(f"corrupt log line {line_no}: {detail}")


class HashMismatch(Exception):
    def __init__(self, line_no: int, expected: str, actual: str):
        self.line_no = line_no
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"state hash mismatch at log line {line_no}: recorded {expected[:12]}..., "
            f"replayed {actual[:12]}..."
        )


class EventLog:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def read_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_no, record); raises CorruptLogLine on undecodable lines."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLogLine(line_no, str(exc)) from exc
            if not isinstance(record, dict) or "op" not in record:
                raise CorruptLogLine(line_no, "record is not an event object")
            yield line_no, record
