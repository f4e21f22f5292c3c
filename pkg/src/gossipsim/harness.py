"""Scenario execution: single runs, sweeps and per-point aggregation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, TextIO

from .config import ScenarioConfig, format_value, parse_axis
from .metrics import (MetricsRow, ReconcileError, avg_delay, csv_header, mean_ci95, pdr,
                      reconcile, throughput)
from .network import Network, RunResult
from .metrics import FlowCounters

log = logging.getLogger(__name__)

PROTOCOLS = ("gsp", "aeerg")
TRAFFICS = ("cbr", "tcp")


def simulate(cfg: ScenarioConfig, trace: Optional[TextIO] = None) -> RunResult:
    return Network(cfg, trace).run()


def to_row(result: RunResult) -> MetricsRow:
    cfg = result.cfg
    total = FlowCounters()
    measured = FlowCounters()
    per_flow = []
    duration = cfg.sim_time_s - cfg.warmup_s
    drops: dict = {}
    for fs in result.flows:
        for agg, c in ((total, fs.counters), (measured, fs.measured)):
            agg.sent += c.sent
            agg.received += c.received
            agg.delay_sum += c.delay_sum
            agg.bytes_received += c.bytes_received
        per_flow.append(throughput(fs.measured, duration))
    for audit in result.audits:
        for cause, n in audit.drops.items():
            drops[cause] = drops.get(cause, 0) + n
    return MetricsRow(
        protocol=cfg.protocol,
        traffic=cfg.traffic,
        nodes=cfg.n_nodes,
        sim_time_s=cfg.sim_time_s,
        seed=cfg.seed,
        pdr=pdr(total),
        avg_delay_ms=avg_delay(measured) * 1000.0,
        throughput_bps=throughput(measured, duration),
        energy_j=sum(led.consumed for led in result.ledgers),
        drops_by_cause=drops,
        delay_defined=measured.received > 0,
        per_flow_throughput_bps=tuple(per_flow),
    )


def run_one(cfg: ScenarioConfig, trace: Optional[TextIO] = None) -> MetricsRow:
    """Simulate one scenario, audit it and return its metrics row."""
    result = simulate(cfg, trace)
    reconcile(result.audits, result.ledgers, cfg.sim_time_s)
    if result.b_violations:
        raise ReconcileError(f"active-neighbor count left its bounds {result.b_violations} times")
    return to_row(result)


@dataclass(frozen=True)
class SweepPoint:
    index: int
    cfg: ScenarioConfig


def sweep_points(cfg: ScenarioConfig, axis: str, values: Optional[Iterable[float]] = None,
                 protocols=PROTOCOLS, traffics=TRAFFICS) -> list[SweepPoint]:
    """Axis value x protocol x traffic x run, in that nesting order."""
    if values is None:
        values = parse_axis(cfg.sweep_sim_time_s if axis == "sim_time" else cfg.sweep_nodes)
    values = list(values)
    if not values or values != sorted(values):
        raise ValueError("sweep axis values must be nonempty and ascending")
    points = []
    for v in values:
        for proto in protocols:
            for traffic in traffics:
                for run in range(cfg.runs_per_point):
                    change = {"protocol": proto, "traffic": traffic, "seed": cfg.seed + run}
                    if axis == "sim_time":
                        change["sim_time_s"] = float(v)
                    elif axis == "nodes":
                        change["n_nodes"] = int(v)
                    else:
                        raise ValueError(f"unknown sweep axis {axis!r}")
                    points.append(SweepPoint(len(points), cfg.replace(**change)))
    return points


def config_comments(cfg: ScenarioConfig) -> list[str]:
    return [f"# {k} = {format_value(v)}" for k, v in cfg.items()]


def sweep(cfg: ScenarioConfig, axis: str, out: str | Path,
          values: Optional[Iterable[float]] = None, verbose: bool = False,
          protocols=PROTOCOLS, traffics=TRAFFICS) -> list[MetricsRow]:
    """Run every sweep point in order and write the CSV as rows complete."""
    points = sweep_points(cfg, axis, values, protocols, traffics)
    rows = []
    with open(out, "w") as fh:
        for line in config_comments(cfg.replace(sweep_axis=axis)):
            fh.write(line + "\n")
        fh.write(csv_header(verbose) + "\n")
        for p in points:
            try:
                row = run_one(p.cfg)
            except (ReconcileError, AssertionError) as exc:
                fh.write(f"# FAILED point {p.index}: protocol={p.cfg.protocol} "
                         f"traffic={p.cfg.traffic} seed={p.cfg.seed}: {exc}\n")
                fh.flush()
                raise
            fh.write(row.csv_line(verbose) + "\n")
            fh.flush()
            rows.append(row)
            log.info("point %d/%d done", p.index + 1, len(points))
    return rows


@dataclass
class Aggregate:
    axis_value: float
    protocol: str
    traffic: str
    n: int
    pdr: tuple
    avg_delay_ms: tuple
    throughput_bps: tuple
    energy_j: tuple


def aggregate(rows: list[MetricsRow], axis: str) -> list[Aggregate]:
    """Mean and 95% CI half-width over seeds for each (axis value, protocol, traffic)."""
    groups: dict = {}
    for r in rows:
        v = r.sim_time_s if axis == "sim_time" else r.nodes
        groups.setdefault((v, r.protocol, r.traffic), []).append(r)
    out = []
    for (v, proto, traffic), rs in groups.items():
        out.append(Aggregate(
            v, proto, traffic, len(rs),
            mean_ci95(r.pdr for r in rs),
            mean_ci95(r.avg_delay_ms for r in rs),
            mean_ci95(r.throughput_bps for r in rs),
            mean_ci95(r.energy_j for r in rs),
        ))
    return out


def format_aggregate(aggs: list[Aggregate]) -> str:
    lines = ["axis,protocol,traffic,n,pdr_mean,pdr_ci95,delay_ms_mean,delay_ms_ci95,"
             "throughput_bps_mean,throughput_bps_ci95,energy_j_mean,energy_j_ci95"]
    for a in aggs:
        cells = [f"{a.axis_value:g}", a.protocol, a.traffic, str(a.n)]
        for m, h in (a.pdr, a.avg_delay_ms, a.throughput_bps, a.energy_j):
            cells += [f"{m:.6f}", f"{h:.6f}"]
        lines.append(",".join(cells))
    return "\n".join(lines)
