"""Injectable time sources.

Every time-dependent code path takes a Clock so idle detection, token
expiry, and summary scheduling are testable without sleeping. Timestamps
are integer epoch milliseconds throughout; the API layer converts to
ISO-8601 UTC at the wire.
"""

from __future__ import annotations

import time
from datetime import datetime, timezone
from typing import Protocol


class Clock(Protocol):
    def now_ms(self) -> int:
        """Current time as epoch milliseconds."""
        ...


class WallClock:
    """System time."""

    def now_ms(self) -> int:
        return int(time.time() * 1000)


class VirtualClock:
    """Manually advanced clock for tests and simulations."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def advance(self, ms: int) -> int:
        if ms < 0:
            raise ValueError("clock cannot move backwards")
        self._now += ms
        return self._now

    def set(self, ms: int) -> None:
        if ms < self._now:
            raise ValueError("clock cannot move backwards")
        self._now = ms


def iso_utc(ms: int) -> str:
    """Render epoch milliseconds as ISO-8601 UTC with millisecond precision."""
    dt = datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ms % 1000:03d}Z"


def parse_iso_utc(text: str) -> int:
    """Parse an ISO-8601 UTC timestamp back to epoch milliseconds."""
    normalized = text.replace("Z", "+00:00")
    dt = datetime.fromisoformat(normalized)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)
