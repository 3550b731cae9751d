"""Injectable clock so expiry, scheduling, and reports are testable."""

from __future__ import annotations

import threading
from datetime import datetime, timedelta, timezone


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


class SystemClock:
    def now(self) -> datetime:
        return utcnow()


class ManualClock:
    """Clock that only moves when told to. Thread-safe."""

    def __init__(self, start: datetime | None = None):
        self._now = start or datetime(2025, 11, 1, tzinfo=timezone.utc)
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            return self._now

    def advance(self, seconds: float) -> datetime:
        with self._lock:
            self._now += timedelta(seconds=seconds)
            return self._now

    def set(self, when: datetime) -> None:
        if when.tzinfo is None:
            raise ValueError("manual clock requires aware datetimes")
        with self._lock:
            self._now = when
