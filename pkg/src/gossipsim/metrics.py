"""Per-run measurements, CSV rows and the end-of-run audit."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from scipy import stats

from .radio import EnergyLedger, RadioMode

CSV_FIELDS = [
    "protocol", "traffic", "nodes", "sim_time_s", "seed", "pdr", "avg_delay_ms",
    "throughput_bps", "energy_j", "drops_ttl", "drops_buffer", "drops_retry",
]
VERBOSE_FIELDS = ["delay_defined", "throughput_per_flow_bps"]
DROP_CAUSES = ("ttl", "buffer", "retry", "lost", "isolated", "abort")


@dataclass
class FlowCounters:
    sent: int = 0
    received: int = 0
    delay_sum: float = 0.0  # seconds
    bytes_received: int = 0

    def record_delivery(self, delay_s: float, nbytes: int) -> None:
        self.received += 1
        self.delay_sum += delay_s
        self.bytes_received += nbytes


def pdr(c: FlowCounters) -> float:
    return c.received / c.sent if c.sent else 0.0


def avg_delay(c: FlowCounters) -> float:
    return c.delay_sum / c.received if c.received else 0.0


def throughput(c: FlowCounters, duration: float) -> float:
    if duration <= 0:
        raise ValueError(f"throughput needs a positive duration, got {duration}")
    return c.bytes_received * 8 / duration


@dataclass
class MetricsRow:
    protocol: str
    traffic: str
    nodes: int
    sim_time_s: float
    seed: int
    pdr: float
    avg_delay_ms: float
    throughput_bps: float
    energy_j: float
    drops_by_cause: dict = field(default_factory=dict)
    delay_defined: bool = True
    per_flow_throughput_bps: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.pdr <= 1.0:
            raise ValueError(f"pdr out of range: {self.pdr}")
        for name in ("avg_delay_ms", "throughput_bps", "energy_j"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")

    def cells(self, verbose: bool = False) -> list[str]:
        d = self.drops_by_cause
        out = [
            self.protocol, self.traffic, str(self.nodes), f"{self.sim_time_s:g}", str(self.seed),
            f"{self.pdr:.6f}", f"{self.avg_delay_ms:.3f}", f"{self.throughput_bps:.3f}",
            f"{self.energy_j:.6f}", str(d.get("ttl", 0)), str(d.get("buffer", 0)),
            str(d.get("retry", 0)),
        ]
        if verbose:
            out.append("1" if self.delay_defined else "0")
            out.append(";".join(f"{x:.3f}" for x in self.per_flow_throughput_bps))
        return out

    def csv_line(self, verbose: bool = False) -> str:
        return ",".join(self.cells(verbose))


def csv_header(verbose: bool = False) -> str:
    return ",".join(CSV_FIELDS + (VERBOSE_FIELDS if verbose else []))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def mean_ci95(values: Iterable[float]) -> tuple[float, float]:
    """Sample mean and half-width of the two-sided 95% t interval."""
    xs = list(values)
    n = len(xs)
    if n == 0:
        raise ValueError("no values")
    m = sum(xs) / n
    if n == 1:
        return m, 0.0
    s = math.sqrt(sum((x - m) ** 2 for x in xs) / (n - 1))
    return m, float(stats.t.ppf(0.975, n - 1)) * s / math.sqrt(n)


class ReconcileError(AssertionError):
    pass


@dataclass
class FlowAudit:
    flow: int
    sent: int
    received: int
    inflight: int
    drops: dict

    @property
    def balanced(self) -> bool:
        return self.sent == self.received + self.inflight + sum(self.drops.values())


@dataclass
class AuditReport:
    flows: list
    nodes_checked: int
    max_time_error_s: float
    max_energy_error_j: float


def reconcile(flows: list[FlowAudit], ledgers: list[EnergyLedger], sim_time_s: float,
              time_tol_s: float = 1e-6, energy_tol_j: float = 1e-9) -> AuditReport:
    """Check packet accounting per flow and energy conservation per node."""
    problems = []
    for f in flows:
        if not f.balanced:
            problems.append(
                f"flow {f.flow}: sent={f.sent} != received={f.received} + "
                f"inflight={f.inflight} + drops={f.drops}")
        if f.received > f.sent:
            problems.append(f"flow {f.flow}: received {f.received} > sent {f.sent}")
    worst_t = 0.0
    worst_e = 0.0
    for i, led in enumerate(ledgers):
        dt = abs(led.elapsed - sim_time_s)
        worst_t = max(worst_t, dt)
        if dt > time_tol_s:
            problems.append(f"node {i}: mode seconds {led.elapsed!r} != sim time {sim_time_s!r}")
        de = abs(led.recomputed() - led.consumed)
        if not led.dead:
            for mode in (RadioMode.RECEIVE, RadioMode.IDLE, RadioMode.DOZE):
                de = max(de, abs(led.mode_seconds[mode] * led.table.power(mode)
                                 - led.mode_joules[mode]))
        worst_e = max(worst_e, de)
        if de > energy_tol_j:
            problems.append(f"node {i}: energy ledger mismatch {de:.3e} J")
    if problems:
        raise ReconcileError("; ".join(problems))
    return AuditReport(flows, len(ledgers), worst_t, worst_e)
