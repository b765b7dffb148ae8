"""
Clocks used by every piece of timeout logic, injectable so that tests control time.
"""

import threading

from .core import now_ms


class SystemClock:
    """Wall clock in milliseconds since the epoch"""

    def now_ms(self) -> int:
        return now_ms()


class ManualClock:
    """Clock that only moves when told to"""

    def __init__(self, start_ms: int = 0) -> None:
        self._now = start_ms
        self._mu = threading.Lock()

    def now_ms(self) -> int:
        with self._mu:
            return self._now

    def advance(self, seconds: float) -> None:
        with self._mu:
            self._now += int(round(seconds * 1000))
