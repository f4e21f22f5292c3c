"""Scenario configuration: flat ``key = value`` files with ``#`` comments."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Optional

PROTOCOLS = ("gsp", "aeerg")
TRAFFICS = ("cbr", "tcp")
AXES = ("sim_time", "nodes")
SWITCHES = {"on": True, "off": False, "true": True, "false": False, "1": True, "0": False,
            "yes": True, "no": False}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration: " + "; ".join(problems))


@dataclass
class ScenarioConfig:
    # scenario
    n_nodes: int = 50
    sim_time_s: float = 100.0
    seed: int = 1
    runs_per_point: int = 10
    protocol: str = "gsp"
    traffic: str = "cbr"
    sweep_axis: str = "sim_time"
    sweep_sim_time_s: str = "25,50,75,100,150,200"
    sweep_nodes: str = "10,20,30,40,50,60,70,80,90,100"
    # mobility
    area_w_m: float = 600.0
    area_h_m: float = 400.0
    speed_mps: float = 20.0
    pause_s: float = 10.0
    neighbor_tick_s: float = 1.0
    # radio / energy
    range_m: float = 250.0
    rate_bps: int = 2_000_000
    p_tx_w: float = 1.4
    p_rx_w: float = 1.0
    p_idle_w: float = 0.7
    p_doze_w: float = 0.045
    path_loss_alpha: float = 2.0
    initial_energy_j: float = 1000.0
    # mac
    psm: bool = True
    beacon_interval_ms: float = 100.0
    atim_window_ms: float = 20.0
    mac_retry_max: int = 4
    mac_buffer_cap: int = 64
    collisions: bool = False
    mac_cw_us: int = 640
    # routing
    p_gossip: float = 0.7
    hops_forced: int = 1
    p_sleep: float = 0.3
    rt: float = 0.9
    feedback_window_pkts: int = 20
    feedback_window_s: float = 2.0
    ttl: int = 32
    # traffic
    cbr_pkt_bytes: int = 512
    cbr_rate_pps: float = 4.0
    tcp_window: int = 8
    tcp_rto_min_ms: float = 200.0
    tcp_max_retx: int = 8
    flows: int = 10
    traffic_start_s: float = 1.0
    # metrics
    warmup_s: float = 5.0
    # fault injection: each frame reception is independently lost with this probability
    hop_loss: float = 0.0

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "ScenarioConfig":
        p = []
        if self.protocol not in PROTOCOLS:
            p.append(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.traffic not in TRAFFICS:
            p.append(f"traffic must be one of {TRAFFICS}, got {self.traffic!r}")
        if self.sweep_axis not in AXES:
            p.append(f"sweep_axis must be one of {AXES}, got {self.sweep_axis!r}")
        for name in ("n_nodes", "runs_per_point", "ttl", "tcp_window", "feedback_window_pkts"):
            if getattr(self, name) < 1:
                p.append(f"{name} must be >= 1")
        for name in ("sim_time_s", "area_w_m", "area_h_m", "neighbor_tick_s", "range_m",
                     "rate_bps", "beacon_interval_ms", "atim_window_ms", "cbr_pkt_bytes",
                     "cbr_rate_pps", "feedback_window_s", "tcp_rto_min_ms"):
            if getattr(self, name) <= 0:
                p.append(f"{name} must be > 0")
        for name in ("speed_mps", "pause_s", "mac_retry_max", "mac_buffer_cap", "flows",
                     "traffic_start_s", "warmup_s", "mac_cw_us", "tcp_max_retx",
                     "hops_forced", "initial_energy_j", "path_loss_alpha"):
            if getattr(self, name) < 0:
                p.append(f"{name} must be >= 0")
        for name in ("p_gossip", "p_sleep", "rt", "hop_loss"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                p.append(f"{name} must be in [0, 1]")
        if not self.p_tx_w >= self.p_rx_w >= self.p_idle_w > self.p_doze_w >= 0:
            p.append("power table must satisfy p_tx_w >= p_rx_w >= p_idle_w > p_doze_w >= 0")
        if not 0 < self.atim_window_ms < self.beacon_interval_ms:
            p.append("atim_window_ms must lie strictly inside the beacon interval")
        if self.warmup_s >= self.sim_time_s:
            p.append("warmup_s must be shorter than sim_time_s")
        for name in ("sweep_sim_time_s", "sweep_nodes"):
            try:
                vals = parse_axis(getattr(self, name))
                if not vals or vals != sorted(vals):
                    p.append(f"{name} must be a nonempty ascending list")
            except ValueError:
                p.append(f"{name} must be a comma-separated list of numbers")
        if p:
            raise ConfigError(p)
        return self

    def items(self) -> list[tuple[str, Any]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def dump(self) -> str:
        return "\n".join(f"{k} = {format_value(v)}" for k, v in self.items())


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    return str(v)


def parse_axis(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(key: str, raw: str) -> Any:
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() not in SWITCHES:
            raise ValueError(f"expected on/off, got {raw!r}")
        return SWITCHES[raw.lower()]
    if kind == "int":
        f = float(raw)
        if f != int(f):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(f)
    if kind == "float":
        return float(raw)
    return raw


def parse_pairs(pairs: Iterable[tuple[str, str]], base: Optional[ScenarioConfig] = None,
                where: str = "") -> ScenarioConfig:
    values = {}
    problems = []
    for key, raw in pairs:
        if key not in _FIELD_TYPES:
            problems.append(f"{where}unknown key {key!r}")
            continue
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            problems.append(f"{where}{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    return (base or ScenarioConfig()).replace(**values)


def parse_text(text: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    pairs = []
    problems = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, raw = line.split("=", 1)
        pairs.append((key.strip(), raw))
    if problems:
        raise ConfigError(problems)
    return parse_pairs(pairs, base)


def load(path: str | Path, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    return parse_text(Path(path).read_text(), base)
