"""Unit-disk radio, airtime, distance-scaled transmit power and energy ledger."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .simcore import US_PER_S


class RadioMode(enum.Enum):
    TRANSMIT = "tx"
    RECEIVE = "rx"
    IDLE = "idle"
    DOZE = "doze"


@dataclass(frozen=True)
class PowerTable:
    """Radio power draw in watts per mode (WaveLAN-class defaults)."""

    p_tx: float = 1.4
    p_rx: float = 1.0
    p_idle: float = 0.7
    p_doze: float = 0.045

    def __post_init__(self):
        if not (self.p_tx >= self.p_rx >= self.p_idle > self.p_doze >= 0.0):
            raise ValueError(
                "power table must satisfy p_tx >= p_rx >= p_idle > p_doze >= 0, got "
                f"{self.p_tx}, {self.p_rx}, {self.p_idle}, {self.p_doze}")

    def power(self, mode: RadioMode) -> float:
        if mode is RadioMode.TRANSMIT:
            return self.p_tx
        if mode is RadioMode.RECEIVE:
            return self.p_rx
        if mode is RadioMode.IDLE:
            return self.p_idle
        return self.p_doze


def in_range(a: tuple[float, float], b: tuple[float, float], range_m: float) -> bool:
    return math.dist(a, b) <= range_m


def tx_duration(payload_bytes: int, rate_bps: int) -> int:
    """Airtime in whole microseconds, rounded up."""
    if rate_bps <= 0:
        raise ValueError(f"rate_bps must be positive, got {rate_bps}")
    bits_us = payload_bytes * 8 * US_PER_S
    if isinstance(rate_bps, int):
        return -(-bits_us // rate_bps)
    return math.ceil(bits_us / rate_bps)


def tx_power_for_distance(d: float, range_m: float, table: PowerTable,
                          alpha: float = 2.0, floor_frac: float = 0.1) -> float:
    """Power needed to reach distance ``d``: ``p_tx * (d/range)**alpha``, floored."""
    if d < 0 or d > range_m:
        raise ValueError(f"distance {d} m outside [0, {range_m}] m")
    return max(table.p_tx * (d / range_m) ** alpha, floor_frac * table.p_tx)


@dataclass
class EnergyLedger:
    table: PowerTable = field(default_factory=PowerTable)
    initial: float = 1000.0
    mode_seconds: dict = field(default_factory=lambda: {m: 0.0 for m in RadioMode})
    mode_joules: dict = field(default_factory=lambda: {m: 0.0 for m in RadioMode})
    consumed: float = 0.0
    dead: bool = False
    died_at: Optional[float] = None  # ledger-elapsed seconds at depletion

    @property
    def residual(self) -> float:
        return self.initial - self.consumed

    @property
    def elapsed(self) -> float:
        return sum(self.mode_seconds.values())

    def recomputed(self) -> float:
        return sum(self.mode_joules.values())


def accrue(ledger: EnergyLedger, mode: RadioMode, dt: float,
           power_override: Optional[float] = None) -> EnergyLedger:
    """Charge ``dt`` seconds of ``mode``; time past depletion is booked as zero-power doze."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    if dt == 0:
        return ledger
    if ledger.dead:
        ledger.mode_seconds[RadioMode.DOZE] += dt
        return ledger
    power = ledger.table.power(mode) if power_override is None else power_override
    cost = dt * power
    if ledger.consumed + cost < ledger.initial:
        ledger.mode_seconds[mode] += dt
        ledger.mode_joules[mode] += cost
        ledger.consumed += cost
        return ledger
    # depletes inside this slice
    alive = (ledger.initial - ledger.consumed) / power
    start = ledger.elapsed
    ledger.mode_seconds[mode] += alive
    ledger.mode_joules[mode] += ledger.initial - ledger.consumed
    ledger.consumed = ledger.initial
    ledger.mode_seconds[RadioMode.DOZE] += dt - alive
    ledger.dead = True
    ledger.died_at = start + alive
    return ledger
