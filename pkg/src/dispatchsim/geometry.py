"""Coordinates, time helpers and travel-time arithmetic.

All positions live in a normalized bounding box (unit box by default) and
all times are real-valued minutes since simulation start.  Vehicle speed is
expressed in box units per minute.
"""

from __future__ import annotations

import math
from typing import NamedTuple

MINUTES_PER_DAY = 1440.0
MINUTES_PER_WEEK = 10080.0


class Coordinate(NamedTuple):
    x: float
    y: float


class BoundingBox(NamedTuple):
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    def contains(self, c: Coordinate) -> bool:
        return (
            math.isfinite(c.x)
            and math.isfinite(c.y)
            and self.x_min <= c.x <= self.x_max
            and self.y_min <= c.y <= self.y_max
        )


def manhattan_distance(a: Coordinate, b: Coordinate) -> float:
    """L1 distance between two points, in box units."""
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def travel_time(dist: float, speed: float) -> float:
    """Minutes needed to cover `dist` box units at `speed` units/minute."""
    if speed <= 0.0:
        raise ValueError(f"vehicle speed must be positive, got {speed}")
    return dist / speed


def minute_of_week(t: float, week_origin_offset: float = 0.0) -> float:
    """Map a simulation time to its position in the weekly cycle, [0, 10080)."""
    return (t + week_origin_offset) % MINUTES_PER_WEEK
