"""Injectable clocks. Services take a Clock so tests can drive time."""

from __future__ import annotations

import threading
import time


class Clock:
    """Wall clock, milliseconds since the Unix epoch."""

    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class ManualClock(Clock):
    """Test clock advanced explicitly; sleep() advances it too."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            return self._now

    def advance_ms(self, delta: int) -> None:
        with self._lock:
            self._now += delta

    def sleep(self, seconds: float) -> None:
        self.advance_ms(int(seconds * 1000))


SYSTEM_CLOCK = Clock()
