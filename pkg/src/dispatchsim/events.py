"""Timestamped simulation events and the time-ordered queue."""

from __future__ import annotations

import heapq
from typing import List, Optional, Tuple

NEW_CALL = 0
FREE_VEHICLE = 1
CANCELLATION = 2
ARRIVAL_AT_ORIGIN = 3
ARRIVAL_AT_DESTINATION = 4
REPOSITION_TIMEOUT = 5

KIND_NAMES = {
    NEW_CALL: "new_call",
    FREE_VEHICLE: "free_vehicle",
    CANCELLATION: "cancellation",
    ARRIVAL_AT_ORIGIN: "arrival_at_origin",
    ARRIVAL_AT_DESTINATION: "arrival_at_destination",
    REPOSITION_TIMEOUT: "reposition_timeout",
}

# (time, seq, kind, id_a, id_b); seq breaks same-time ties in insertion order
Event = Tuple[float, int, int, int, int]


class CausalityError(Exception):
    """An event was scheduled in the past."""


class EventQueue:
    """Min-heap of events ordered by (time, insertion sequence)."""

    def __init__(self):
        self._heap: List[Event] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: float, kind: int, id_a: int = -1, id_b: int = -1,
             clock: float = 0.0) -> None:
        if time < clock:
            raise CausalityError(
                f"event {KIND_NAMES[kind]} at t={time} scheduled before clock={clock}"
            )
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, kind, id_a, id_b))

    def pop(self) -> Optional[Event]:
        if not self._heap:
            return None
        return heapq.heappop(self._heap)
