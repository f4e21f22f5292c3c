"""Protocol decisions for GSP (gossip) and AEERG.

These are the pure per-node rules; :mod:`gossipsim.network` applies them to
packets moving through the simulated MAC.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Optional

NeighborTable = list  # [(distance_m, node_id)] sorted ascending by distance


def build_neighbor_table(entries) -> NeighborTable:
    """Sort ``(distance, id)`` pairs; ties broken by node id."""
    return sorted(entries)


@dataclass(frozen=True)
class GossipConfig:
    p_gossip: float = 0.7
    hops_forced: int = 1

    def __post_init__(self):
        if not 0.0 <= self.p_gossip <= 1.0:
            raise ValueError(f"p_gossip must be in [0, 1], got {self.p_gossip}")


def gossip_decide(cfg: GossipConfig, hop: int, rng: random.Random) -> bool:
    """GOSSIP1(p, k): forward surely within the first ``hops_forced`` hops, else with p."""
    if hop <= cfg.hops_forced or cfg.p_gossip >= 1.0:
        return True
    if cfg.p_gossip <= 0.0:
        return False
    return rng.random() < cfg.p_gossip


class SleepDecision(enum.Enum):
    ACTIVE = "active"
    SLEEP = "sleep"


@dataclass
class AeergState:
    """Adaptive control state of one node.

    ``b`` is the number of nearest neighbours a transmission must reach,
    ``rt`` the delivery-ratio threshold that moves it, ``p_sleep`` the
    probability of dozing through an interval when nothing forces the node
    awake.
    """

    b: int = 1
    rt: float = 0.9
    p_sleep: float = 0.3
    last_d: Optional[float] = None

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("B must be at least 1")
        if not 0.0 <= self.rt <= 1.0 or not 0.0 <= self.p_sleep <= 1.0:
            raise ValueError("rt and p_sleep must be probabilities")

    def clamp(self, n_neighbors: int) -> None:
        self.b = max(1, min(self.b, max(1, n_neighbors)))


def select_targets(state: AeergState, table: NeighborTable,
                   exclude: Optional[int] = None) -> list:
    """The ``B`` nearest neighbours, nearest first."""
    out = []
    for _, nid in table:
        if nid == exclude:
            continue
        out.append(nid)
        if len(out) >= state.b:
            break
    return out


def adjust_b(state: AeergState, d: float, n_neighbors: int) -> AeergState:
    """One feedback step: below threshold widens B by one, at/above narrows it."""
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"delivery ratio must be in [0, 1], got {d}")
    if d < state.rt:
        state.b = min(state.b + 1, max(1, n_neighbors))
    else:
        state.b = max(state.b - 1, 1)
    state.b = max(1, state.b)
    state.last_d = d
    return state


def sleep_decide(state: AeergState, rng: random.Random, forced: bool = False) -> SleepDecision:
    if forced or state.p_sleep <= 0.0:
        return SleepDecision.ACTIVE
    if state.p_sleep >= 1.0:
        return SleepDecision.SLEEP
    return SleepDecision.SLEEP if rng.random() < state.p_sleep else SleepDecision.ACTIVE


@dataclass(frozen=True)
class FeedbackFrame:
    flow: int
    d: float
    window: int


def destination_feedback(flow: int, sent: int, received: int, window: int = 0) -> FeedbackFrame:
    assert received <= max(sent, 0) or received == 0, (
        f"flow {flow}: received {received} exceeds sent {sent}")
    return FeedbackFrame(flow, received / max(sent, 1), window)
