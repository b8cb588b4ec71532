"""Domain entities: ride requests, fleet vehicles and trip records."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .geometry import Coordinate, MINUTES_PER_WEEK


class CallStatus(enum.Enum):
    WAITING = "waiting"
    ASSIGNED = "assigned"
    PICKED_UP = "picked_up"
    COMPLETED = "completed"
    CANCELED = "canceled"


# The only admissible status edges.  Trajectories are audited against this
# graph in debug runs and in tests.
ALLOWED_TRANSITIONS = {
    CallStatus.WAITING: {CallStatus.ASSIGNED, CallStatus.CANCELED},
    CallStatus.ASSIGNED: {CallStatus.PICKED_UP, CallStatus.WAITING},
    CallStatus.PICKED_UP: {CallStatus.COMPLETED},
    CallStatus.COMPLETED: set(),
    CallStatus.CANCELED: set(),
}


@dataclass
class Call:
    """A ride request with its sampled waiting tolerance and lifecycle state."""

    id: int
    created_at: float
    origin: Coordinate
    destination: Coordinate
    max_wait: float
    status: CallStatus = CallStatus.WAITING
    assigned_vehicle: Optional[int] = None
    assigned_at: Optional[float] = None
    pickup_time: Optional[float] = None
    completion_time: Optional[float] = None
    canceled_at: Optional[float] = None
    status_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.max_wait <= 0:
            raise ValueError(f"call {self.id}: max_wait must be positive")
        self.status_history.append(self.status)

    def set_status(self, new: CallStatus) -> None:
        if new not in ALLOWED_TRANSITIONS[self.status]:
            raise ValueError(
                f"call {self.id}: illegal status transition "
                f"{self.status.value} -> {new.value}"
            )
        self.status = new
        self.status_history.append(new)


@dataclass
class Vehicle:
    """A fleet unit.  `reject_prob` is sampled once at creation."""

    id: int
    location: Coordinate
    move_destination: Coordinate
    busy: bool = False
    free_at: float = 0.0  # absolute time the current service ends
    reject_prob: float = 0.0
    reposition_hold_until: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.reject_prob <= 1.0:
            raise ValueError(f"vehicle {self.id}: reject_prob outside [0,1]")

    def time_to_free(self, clock: float) -> float:
        """Remaining minutes of the current service; 0 when idle."""
        if not self.busy:
            return 0.0
        return max(0.0, self.free_at - clock)

    def set_idle(self, at: Coordinate) -> None:
        self.location = at
        self.move_destination = at
        self.busy = False
        self.free_at = 0.0


@dataclass(frozen=True)
class TripRecord:
    """One historical trip: when in the week it was requested, and where."""

    request_minute_of_week: float
    origin: Coordinate
    destination: Coordinate

    def __post_init__(self):
        if not 0.0 <= self.request_minute_of_week < MINUTES_PER_WEEK:
            raise ValueError(
                f"request_minute_of_week {self.request_minute_of_week} "
                f"outside [0, {MINUTES_PER_WEEK})"
            )

    @property
    def day_of_week(self) -> int:
        return int(self.request_minute_of_week // 1440.0)
