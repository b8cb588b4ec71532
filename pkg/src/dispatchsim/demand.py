"""Demand ingestion and generation.

Two sources are supported: replayed trip records (CSV) and a synthetic
nonhomogeneous Poisson stream shaped by an hour-of-week rate profile.
Stochastic per-call / per-vehicle attributes (waiting tolerance, driver
rejection probability) are sampled here as well.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .entities import TripRecord
from .geometry import BoundingBox, Coordinate, MINUTES_PER_DAY, MINUTES_PER_WEEK

CSV_HEADER = "minute_of_week,origin_x,origin_y,dest_x,dest_y"

# Records-mode arrivals are resampled with this much uniform jitter (minutes)
# so repeated days are not carbon copies of the source rows.
ARRIVAL_JITTER_MIN = 15.0


class DemandError(Exception):
    """Malformed or empty demand input."""


@dataclass(frozen=True)
class GaussianCluster:
    center: Coordinate
    sigma: float
    weight: float = 1.0


@dataclass
class DemandSource:
    """Where calls come from: replayed records or a synthetic process."""

    mode: str  # "records" | "synthetic"
    records: List[TripRecord] = field(default_factory=list)
    hourly_rates: Optional[np.ndarray] = None  # 168 calls/hour values
    clusters: List[GaussianCluster] = field(default_factory=list)
    box: BoundingBox = BoundingBox()

    def __post_init__(self):
        if self.mode == "records":
            if not self.records:
                raise DemandError("records mode requires a nonempty record list")
        elif self.mode == "synthetic":
            rates = np.asarray(
                self.hourly_rates if self.hourly_rates is not None else [],
                dtype=float,
            )
            if rates.shape != (168,):
                raise DemandError("synthetic mode requires 168 hourly rates")
            if np.any(rates < 0) or not np.any(rates > 0):
                raise DemandError("hourly rates must be nonnegative with at least one positive")
            self.hourly_rates = rates
        else:
            raise DemandError(f"unknown demand mode {self.mode!r}")


@dataclass(frozen=True)
class StochasticConfig:
    """Parameters of the tolerance (gamma) and rejection (beta) densities."""

    tolerance_shape: float = 2.0
    tolerance_scale: float = 4.0
    reject_alpha: float = 2.0
    reject_beta: float = 8.0

    def __post_init__(self):
        for name in ("tolerance_shape", "tolerance_scale", "reject_alpha", "reject_beta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def load_trip_records(
    stream, box: BoundingBox = BoundingBox()
) -> Tuple[List[TripRecord], int]:
    """Parse the trip CSV; returns (records, dropped_out_of_box_count).

    Rows with any endpoint outside the bounding box are dropped and counted.
    Malformed rows raise DemandError with the 1-based line number.
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)

    header = stream.readline().strip()
    if header != CSV_HEADER:
        raise DemandError(f"line 1: expected header {CSV_HEADER!r}, got {header!r}")

    records: List[TripRecord] = []
    dropped = 0
    for lineno, raw in enumerate(stream, start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise DemandError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            minute = float(parts[0])
            ox, oy, dx, dy = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise DemandError(f"line {lineno}: {exc}") from None
        if not 0.0 <= minute < MINUTES_PER_WEEK:
            raise DemandError(
                f"line {lineno}: minute_of_week {minute} outside [0, {MINUTES_PER_WEEK})"
            )
        origin = Coordinate(ox, oy)
        dest = Coordinate(dx, dy)
        if not (box.contains(origin) and box.contains(dest)):
            dropped += 1
            continue
        records.append(TripRecord(minute, origin, dest))
    if not records:
        raise DemandError("no usable trip records after filtering")
    return records, dropped


def sample_tolerance(cfg: StochasticConfig, rng: np.random.Generator) -> float:
    """Draw a waiting tolerance (minutes) from the configured gamma density."""
    draw = rng.gamma(cfg.tolerance_shape, cfg.tolerance_scale)
    # gamma support is (0, inf); guard the measure-zero underflow to 0.0
    return max(draw, 1e-9)

def sample_rejection_prob(cfg: StochasticConfig, rng: np.random.Generator) -> float:
    """Draw a driver rejection probability from the configured beta density."""
    return float(rng.beta(cfg.reject_alpha, cfg.reject_beta))


def _sample_location(
    rng: np.random.Generator,
    clusters: Sequence[GaussianCluster],
    box: BoundingBox,
) -> Coordinate:
    if not clusters:
        return Coordinate(
            rng.uniform(box.x_min, box.x_max), rng.uniform(box.y_min, box.y_max)
        )
    weights = np.array([c.weight for c in clusters], dtype=float)
    weights /= weights.sum()
    c = clusters[rng.choice(len(clusters), p=weights)]
    x = float(np.clip(rng.normal(c.center.x, c.sigma), box.x_min, box.x_max))
    y = float(np.clip(rng.normal(c.center.y, c.sigma), box.y_min, box.y_max))
    return Coordinate(x, y)


def _strictly_increasing(times: List[float]) -> List[float]:
    times.sort()
    eps = 1e-6
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            times[i] = times[i - 1] + eps
    return [t for t in times if t < MINUTES_PER_DAY]


def _synthetic_arrivals(
    rates: np.ndarray, day_of_week: int, rng: np.random.Generator
) -> List[float]:
    """Nonhomogeneous Poisson arrivals over one day, by thinning."""
    day_rates = rates[day_of_week * 24 : (day_of_week + 1) * 24]
    lam_max = float(day_rates.max())
    if lam_max <= 0.0:
        return []
    per_min = lam_max / 60.0
    times: List[float] = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / per_min)
        if t >= MINUTES_PER_DAY:
            break
        lam_t = day_rates[int(t // 60.0)]
        if rng.random() * lam_max <= lam_t:
            times.append(t)
    return times


def generate_daily_calls(
    source: DemandSource,
    day_of_week: int,
    daily_cap: int,
    rng: np.random.Generator,
) -> List[Tuple[float, Coordinate, Coordinate]]:
    """Time-ordered (arrival_minute, origin, destination) tuples for one day.

    Records mode resamples same-day-of-week rows with replacement and
    +/-15 min arrival jitter; synthetic mode thins a Poisson stream against
    the hour-of-week rate profile.  At most `daily_cap` calls are returned.
    """
    if daily_cap < 1:
        raise ValueError("daily_cap must be >= 1")
    if not 0 <= day_of_week <= 6:
        raise ValueError("day_of_week must be in 0..6")

    if source.mode == "records":
        rows = [r for r in source.records if r.day_of_week == day_of_week]
        if not rows:
            raise DemandError(f"no trip records for day_of_week={day_of_week}")
        picked = [rows[i] for i in rng.integers(0, len(rows), size=daily_cap)]
        entries = []
        for r in picked:
            minute_of_day = r.request_minute_of_week - day_of_week * 1440.0
            t = minute_of_day + rng.uniform(-ARRIVAL_JITTER_MIN, ARRIVAL_JITTER_MIN)
            if 0.0 <= t < MINUTES_PER_DAY:
                entries.append((t, r.origin, r.destination))
        entries.sort(key=lambda e: e[0])
        times = _strictly_increasing([e[0] for e in entries])
        return [(t, e[1], e[2]) for t, e in zip(times, entries)]

    times = _strictly_increasing(_synthetic_arrivals(source.hourly_rates, day_of_week, rng))
    times = times[:daily_cap]
    return [
        (
            t,
            _sample_location(rng, source.clusters, source.box),
            _sample_location(rng, source.clusters, source.box),
        )
        for t in times
    ]


def flat_hourly_rates(rate_per_hour: float) -> np.ndarray:
    """A constant 168-hour rate profile."""
    return np.full(168, float(rate_per_hour))
