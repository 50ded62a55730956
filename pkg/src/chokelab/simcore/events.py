"""Minimal deterministic event loop."""

from __future__ import annotations

import heapq


class EventLoop:
    """Pending events ordered by ``(time, insertion sequence)``.

    Ties in time fire in insertion order, so a run is reproducible given the
    same sequence of ``schedule`` calls.
    """

    __slots__ = ("clock", "_heap", "_seq")

    def __init__(self, start: float = 0.0):
        self.clock = start
        self._heap: list = []
        self._seq = 0

    def schedule(self, time: float, kind: int, a=None, b=None) -> None:
        if time < self.clock:
            raise ValueError(f"cannot schedule at {time} before clock {self.clock}")
        heapq.heappush(self._heap, (time, self._seq, kind, a, b))
        self._seq += 1

    def pop(self):
        """Remove the earliest event, advance the clock, return ``(time, kind, a, b)``."""
        time, _, kind, a, b = heapq.heappop(self._heap)
        self.clock = time
        return time, kind, a, b

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else float("inf")

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)
