"""Random-waypoint mobility with a fixed speed and pause time."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .simcore import US_PER_S

Point = tuple[float, float]


@dataclass(frozen=True)
class Region:
    width: float = 600.0
    height: float = 400.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"region must have positive size, got {self.width}x{self.height}")

    def contains(self, p: Point) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height

    def uniform_point(self, rng: random.Random) -> Point:
        return (rng.uniform(0.0, self.width), rng.uniform(0.0, self.height))


@dataclass(frozen=True)
class MotionState:
    """One leg: wait at ``origin`` until ``depart_at``, then move to ``waypoint``.

    ``depart_at`` is in microseconds, ``speed`` in m/s, ``pause`` in seconds.
    """

    origin: Point
    waypoint: Point
    depart_at: int
    speed: float
    pause: float

    @property
    def length(self) -> float:
        return math.dist(self.origin, self.waypoint)

    @property
    def arrive_at(self) -> float:
        """Arrival time in microseconds (``inf`` for a stationary node on a real leg)."""
        if self.length == 0.0:
            return float(self.depart_at)
        if self.speed <= 0.0:
            return math.inf
        return self.depart_at + self.length / self.speed * US_PER_S

    @property
    def leg_done_at(self) -> float:
        return self.arrive_at + self.pause * US_PER_S


def position_at(m: MotionState, t: int) -> Point:
    if t <= m.depart_at or m.speed <= 0.0:
        return m.origin
    length = m.length
    travelled = m.speed * (t - m.depart_at) / US_PER_S
    if travelled >= length:
        return m.waypoint
    f = travelled / length
    ox, oy = m.origin
    wx, wy = m.waypoint
    return (ox + (wx - ox) * f, oy + (wy - oy) * f)


def next_leg(m: MotionState, rng: random.Random, region: Region) -> MotionState:
    """Start a new leg from the current waypoint; departure waits out the pause."""
    arrival = m.arrive_at
    if math.isinf(arrival):
        raise ValueError("current leg never completes (speed is zero)")
    return MotionState(
        origin=m.waypoint,
        waypoint=region.uniform_point(rng),
        depart_at=int(math.ceil(arrival + m.pause * US_PER_S)),
        speed=m.speed,
        pause=m.pause,
    )


def initial_motion(rng: random.Random, region: Region, speed: float, pause: float) -> MotionState:
    start = region.uniform_point(rng)
    if speed <= 0.0:
        return MotionState(start, start, 0, 0.0, pause)
    return MotionState(start, region.uniform_point(rng), 0, speed, pause)


def advance(m: MotionState, t: int, rng: random.Random, region: Region) -> MotionState:
    """Roll the leg forward until it covers time ``t``."""
    if m.speed <= 0.0:
        return m
    while m.leg_done_at <= t:
        m = next_leg(m, rng, region)
    return m
