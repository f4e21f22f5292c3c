"""Application sources: constant bit rate and a fixed-window reliable flow."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class CbrFlow:
    src: int
    dst: int
    pkt_bytes: int = 512
    interval: int = 250_000  # us
    start: int = 0
    stop: int = 0
    next_seq: int = 0

    def __post_init__(self):
        if self.interval <= 0:
            raise ValueError("CBR interval must be positive")

    def expected_count(self) -> int:
        """Emissions in the half-open window ``[start, stop)``."""
        if self.stop <= self.start:
            return 0
        return -(-(self.stop - self.start) // self.interval)


def cbr_emit(flow: CbrFlow, t: int) -> tuple[int, Optional[int]]:
    """Emit one packet at ``t``; returns ``(seq, next emission time or None)``."""
    if not flow.start <= t < flow.stop:
        raise ValueError(f"emission at {t} outside [{flow.start}, {flow.stop})")
    seq = flow.next_seq
    flow.next_seq += 1
    nxt = t + flow.interval
    return seq, (nxt if nxt < flow.stop else None)


@dataclass
class InFlight:
    sent_at: int      # first transmission, the delay origin
    last_sent: int
    retx: int = 0
    timer: int = 0    # token of the armed retransmission timer


@dataclass
class TcpLiteFlow:
    """Fixed-window, cumulative-ack sender without congestion control.

    ``cum_ack`` is the next sequence the receiver expects, so every
    ``seq < cum_ack`` has been acknowledged. Timers are in microseconds.
    ``backlog`` is the application data waiting to be sent (``None`` for an
    unlimited source).
    """

    src: int
    dst: int
    pkt_bytes: int = 512
    window: int = 8
    rto_min: int = 200_000
    rto_init: int = 1_000_000
    rto_max: int = 64_000_000
    max_retx: int = 8
    next_seq: int = 0
    cum_ack: int = 0
    backlog: Optional[int] = None
    srtt: Optional[float] = None
    rto: int = 0
    aborted: bool = False
    retransmissions: int = 0
    inflight: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rto == 0:
            self.rto = self.rto_init
        if self.window < 1:
            raise ValueError("window must be at least one packet")

    def timeout_for(self, seq: int) -> int:
        """Timer for ``seq``: the base rto doubled once per retransmission of it."""
        retx = self.inflight[seq].retx
        return min(self.rto << retx, self.rto_max)


def tcp_send_window(flow: TcpLiteFlow, t: int) -> list:
    """New sequence numbers to transmit now."""
    out = []
    if flow.aborted:
        return out
    while len(flow.inflight) < flow.window and (flow.backlog is None or flow.backlog > 0):
        seq = flow.next_seq
        flow.next_seq += 1
        if flow.backlog is not None:
            flow.backlog -= 1
        flow.inflight[seq] = InFlight(sent_at=t, last_sent=t)
        out.append(seq)
    return out


def tcp_on_ack(flow: TcpLiteFlow, ack: int, t: int) -> list:
    """Apply a cumulative ack; returns the newly sendable sequence numbers."""
    if ack < 0:
        raise ValueError("ack must be non-negative")
    if flow.aborted or ack <= flow.cum_ack:
        return []
    ack = min(ack, flow.next_seq)
    sample = None
    for seq in range(flow.cum_ack, ack):
        entry = flow.inflight.pop(seq, None)
        if entry is not None and entry.retx == 0:
            sample = t - entry.sent_at
    flow.cum_ack = ack
    if sample is not None:
        flow.srtt = sample if flow.srtt is None else 0.875 * flow.srtt + 0.125 * sample
        flow.rto = min(max(flow.rto_min, int(2 * flow.srtt)), flow.rto_max)
    return tcp_send_window(flow, t)


def tcp_on_timeout(flow: TcpLiteFlow, seq: int, t: int) -> bool:
    """Handle an expired timer. True means retransmit ``seq`` now."""
    entry = flow.inflight.get(seq)
    if flow.aborted or entry is None:
        return False
    entry.retx += 1
    if entry.retx > flow.max_retx:
        flow.aborted = True
        flow.inflight.clear()
        return False
    entry.last_sent = t
    flow.retransmissions += 1
    return True


@dataclass
class TcpLiteReceiver:
    """Reorders arrivals and releases them to the application gap-free."""

    expected: int = 0
    held: dict = field(default_factory=dict)   # seq -> arrival payload
    delivered: list = field(default_factory=list)

    def on_data(self, seq: int, payload=None) -> list:
        """Returns ``[(seq, payload)]`` released in order by this arrival."""
        if seq < self.expected or seq in self.held:
            return []
        self.held[seq] = payload
        out = []
        while self.expected in self.held:
            out.append((self.expected, self.held.pop(self.expected)))
            self.delivered.append(self.expected)
            self.expected += 1
        return out
