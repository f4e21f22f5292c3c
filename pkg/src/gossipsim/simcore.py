"""Deterministic discrete-event engine.

Time is an integer count of microseconds. Events are ordered by
``(fire_at, seq)`` where ``seq`` is a global insertion counter, so two
events at the same instant run in the order they were scheduled.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Any, Callable, NamedTuple, Optional, TextIO

US_PER_S = 1_000_000


def seconds_to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


class Event(NamedTuple):
    fire_at: int
    seq: int
    kind: str
    target: Any
    handler: Callable[..., Any]
    payload: tuple


def derive_seed(master_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RngStream(random.Random):
    """A named random stream whose state depends only on (master seed, label)."""

    def __new__(cls, master_seed: int, label: str):
        return super().__new__(cls)

    def __init__(self, master_seed: int, label: str):
        self.label = label
        self.master_seed = master_seed
        super().__init__(derive_seed(master_seed, label))


class Engine:
    """Single-threaded event loop with named random substreams.

    Args:
        seed: master seed from which every substream is derived.
        trace: optional text sink; one ``t_us\\tnode\\tkind\\tdetail`` line is
            written per executed event and per :meth:`note` call.
    """

    def __init__(self, seed: int = 0, trace: Optional[TextIO] = None):
        self.seed = seed
        self.now = 0
        self.trace = trace
        self.executed = 0
        self._queue: list[Event] = []
        self._seq = 0
        self._streams: dict[str, RngStream] = {}

    def schedule(self, fire_at: int, kind: str, target: Any,
                 handler: Callable[..., Any], *payload: Any) -> int:
        if fire_at < self.now:
            raise SchedulingError(
                f"event {kind!r} for {target!r} at t={fire_at} is before now={self.now}")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, Event(fire_at, seq, kind, target, handler, payload))
        return seq

    def schedule_in(self, delay: int, kind: str, target: Any,
                    handler: Callable[..., Any], *payload: Any) -> int:
        return self.schedule(self.now + delay, kind, target, handler, *payload)

    def pending(self) -> int:
        return len(self._queue)

    def run(self, until: int) -> int:
        """Execute every event with ``fire_at <= until``; leave the clock at ``until``."""
        queue = self._queue
        trace = self.trace
        count = 0
        while queue and queue[0].fire_at <= until:
            ev = heapq.heappop(queue)
            assert ev.fire_at >= self.now, "event order violated"
            self.now = ev.fire_at
            if trace is not None:
                detail = " ".join(str(p) for p in ev.payload
                                  if isinstance(p, (int, float, str)))
                trace.write(f"{ev.fire_at}\t{ev.target}\t{ev.kind}\t{detail}\n")
            ev.handler(*ev.payload)
            count += 1
        if until > self.now:
            self.now = until
        self.executed += count
        return count

    def stream(self, label: str) -> RngStream:
        rng = self._streams.get(label)
        if rng is None:
            rng = self._streams[label] = RngStream(self.seed, label)
        return rng

    def note(self, target: Any, kind: str, detail: str = "") -> None:
        """Write a non-event line (tx/rx/doze...) to the trace, if enabled."""
        if self.trace is not None:
            self.trace.write(f"{self.now}\t{target}\t{kind}\t{detail}\n")
