"""Simplified IEEE 802.11 power-save mode for an ad hoc (IBSS) network.

All stations share one beacon schedule. Interval ``k`` spans
``[k*T, (k+1)*T)`` and opens with an ATIM window of length ``atim_window``.
Frames for possibly-dozing receivers wait in the sender's buffer, are
advertised in the next ATIM window and, once marked (immediately for
broadcast, on ATIM-ACK for unicast), go out after the window closes.
ATIM, ATIM-ACK and beacon exchanges take no airtime in this model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

log = logging.getLogger(__name__)

BROADCAST = -1


@dataclass(frozen=True)
class PsmSchedule:
    beacon_interval: int = 100_000
    atim_window: int = 20_000

    def __post_init__(self):
        if not 0 < self.atim_window < self.beacon_interval:
            raise ValueError(
                f"need 0 < atim_window < beacon_interval, got {self.atim_window}, "
                f"{self.beacon_interval}")

    def interval_of(self, t: int) -> int:
        return t // self.beacon_interval

    def interval_start(self, k: int) -> int:
        return k * self.beacon_interval

    def window_end(self, k: int) -> int:
        return k * self.beacon_interval + self.atim_window

    def interval_end(self, t: int) -> int:
        return (t // self.beacon_interval + 1) * self.beacon_interval

    def in_atim_window(self, t: int) -> bool:
        return t % self.beacon_interval < self.atim_window

    def earliest_advertised_tx(self, t: int) -> int:
        """Earliest data transmission for a frame that must be advertised first."""
        k = self.interval_of(t)
        if self.in_atim_window(t):
            return self.window_end(k)
        return self.window_end(k + 1)


@dataclass(frozen=True)
class Atim:
    sender: int
    dest: int

    @property
    def needs_ack(self) -> bool:
        return self.dest != BROADCAST


@dataclass(frozen=True)
class AtimAck:
    sender: int  # the acknowledging (downstream) station
    dest: int    # the advertiser


@dataclass
class BufferedFrame:
    frame: Any
    dest: int
    marked: bool = False
    retries: int = 0
    advertised: bool = False


class BufferOverflow(Exception):
    pass


@dataclass
class MacBuffer:
    cap: int = 64
    retry_max: int = 4
    entries: list = field(default_factory=list)

    def __post_init__(self):
        self.replace_entries(self.entries)

    def replace_entries(self, entries: list) -> None:
        """Swap in a new entry list (the per-frame index is rebuilt)."""
        self.entries = entries
        self._refs: dict = {}
        for e in entries:
            self._refs[id(e.frame)] = self._refs.get(id(e.frame), 0) + 1

    def frame_count(self) -> int:
        return len(self._refs)

    def holds(self, frame: Any) -> bool:
        return id(frame) in self._refs

    def add(self, frame: Any, dests, retries: int = 0) -> None:
        """Buffer ``frame`` for each of ``dests``; raises BufferOverflow when full."""
        key = id(frame)
        if key not in self._refs and len(self._refs) >= self.cap:
            raise BufferOverflow(frame)
        for d in dests:
            self.entries.append(BufferedFrame(frame, d, retries=retries))
        self._refs[key] = self._refs.get(key, 0) + len(dests)

    def destinations(self) -> list:
        seen = []
        for e in self.entries:
            if e.dest not in seen:
                seen.append(e.dest)
        return seen

    def marked(self) -> list:
        return [e for e in self.entries if e.marked]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class PsmStation:
    """Per-node power-save MAC state."""

    node_id: int
    schedule: PsmSchedule = field(default_factory=PsmSchedule)
    buffer: MacBuffer = field(default_factory=MacBuffer)
    alive: bool = True
    dozing: bool = False
    pledged: bool = False
    drops_buffer: int = 0
    drops_retry: int = 0

    def on_interval_start(self, k: int) -> bool:
        """Wake for the ATIM window and clear stale marks. Returns False for a dead node."""
        if not self.alive:
            return False
        self.dozing = False
        self.pledged = False
        for e in self.buffer.entries:
            e.marked = False
            e.advertised = False
        return True

    def eligible_to_doze(self) -> bool:
        return self.alive and not self.pledged and not self.buffer.marked()

    def advertise(self) -> list[Atim]:
        """One ATIM per distinct buffered destination."""
        atims = []
        for dest in self.buffer.destinations():
            atims.append(Atim(self.node_id, dest))
        for e in self.buffer.entries:
            e.advertised = True
            if e.dest == BROADCAST:
                e.marked = True
        return atims

    def on_atim(self, atim: Atim, now: int) -> Optional[AtimAck]:
        if not self.schedule.in_atim_window(now):
            log.debug("node %d: ATIM from %d outside window at %d discarded",
                      self.node_id, atim.sender, now)
            return None
        if atim.dest == BROADCAST:
            self.pledged = True
            return None
        if atim.dest != self.node_id:
            return None
        self.pledged = True
        return AtimAck(self.node_id, atim.sender)

    def mark_on_ack(self, ack: AtimAck, now: int) -> int:
        if not self.schedule.in_atim_window(now):
            return 0
        n = 0
        for e in self.buffer.entries:
            if e.dest == ack.sender and not e.marked:
                e.marked = True
                n += 1
        return n

    def next_marked(self) -> Optional[tuple]:
        """The first marked frame with all its marked destinations, left in place."""
        frame = None
        dests = []
        retries = 0
        for e in self.buffer.entries:
            if not e.marked:
                continue
            if frame is None:
                frame = e.frame
            elif e.frame is not frame:
                continue
            dests.append(e.dest)
            retries = max(retries, e.retries)
        if frame is None:
            return None
        return frame, dests, retries

    def take_frame(self, frame: Any) -> None:
        """Remove the marked entries of ``frame`` (it is being transmitted)."""
        buf = self.buffer
        keep = [e for e in buf.entries if not (e.marked and e.frame is frame)]
        gone = len(buf.entries) - len(keep)
        buf.entries = keep
        key = id(frame)
        left = buf._refs[key] - gone
        if left:
            buf._refs[key] = left
        else:
            del buf._refs[key]

    def take_marked(self) -> list:
        """Remove marked entries, grouped per frame in buffer order: [(frame, dests, retries)]."""
        groups: dict[int, list] = {}
        keep = []
        for e in self.buffer.entries:
            if e.marked:
                g = groups.get(id(e.frame))
                if g is None:
                    groups[id(e.frame)] = [e.frame, [e.dest], e.retries]
                else:
                    g[1].append(e.dest)
                    g[2] = max(g[2], e.retries)
            else:
                keep.append(e)
        self.buffer.replace_entries(keep)
        return [tuple(g) for g in groups.values()]

    def flush_marked(self, now: int, airtime: Callable[[Any], int]) -> list:
        """Plan back-to-back transmission of marked frames from ``now``.

        Returns ``[(start, frame, dests)]`` for frames that fit before the
        interval ends; the rest go back to the buffer with one more retry
        (or are dropped once past ``retry_max``).
        """
        end = self.schedule.interval_end(now)
        plan = []
        t = now
        for frame, dests, retries in self.take_marked():
            dur = airtime(frame)
            if t + dur <= end:
                plan.append((t, frame, dests))
                t += dur
            else:
                self.requeue(frame, dests, retries + 1)
        return plan

    def requeue(self, frame: Any, dests, retries: int) -> bool:
        """Put a frame back for a later interval. False if it was dropped."""
        if retries > self.buffer.retry_max:
            self.drops_retry += 1
            return False
        try:
            self.buffer.add(frame, dests, retries=retries)
        except BufferOverflow:
            self.drops_buffer += 1
            return False
        return True

    def arrival_between_windows(self, frame: Any, dests) -> bool:
        """Buffer a frame unmarked until it can be advertised. False on overflow."""
        try:
            self.buffer.add(frame, dests)
        except BufferOverflow:
            self.drops_buffer += 1
            return False
        return True

    def end_interval(self) -> list:
        """Age frames advertised this interval but not sent; returns dropped frames."""
        dropped = []
        keep = []
        for e in self.buffer.entries:
            if e.advertised:
                e.retries += 1
                e.advertised = False
                e.marked = False
                if e.retries > self.buffer.retry_max:
                    dropped.append(e)
                    continue
            keep.append(e)
        self.buffer.replace_entries(keep)
        self.drops_retry += len({id(e.frame) for e in dropped if not self.buffer.holds(e.frame)})
        return dropped
