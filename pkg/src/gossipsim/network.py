"""The simulated network: nodes, channel, PSM timing, protocols and flows.

One :class:`Network` is one scenario run. Every packet a source emits (and
every TCP retransmission, ack and feedback report) is a *flood*: it spreads
hop by hop as copies held by individual nodes. A copy is alive while it sits
in a MAC buffer, a transmit queue or the air.

Channel model: unit disk at the tick-sampled positions. A node defers while
it hears an ongoing transmission. With ``collisions`` on, every data
attempt waits a random backoff first and two transmissions overlapping at a
receiver (or a receiver that is itself transmitting) lose both frames there.
With PSM on, data frames start only after the ATIM window and must finish
before the interval ends.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, TextIO

from . import mobility as mob
from .config import ScenarioConfig
from .mac import BROADCAST, PsmSchedule, PsmStation, MacBuffer
from .metrics import DROP_CAUSES, FlowAudit, FlowCounters
from .radio import EnergyLedger, PowerTable, RadioMode, accrue, tx_duration, tx_power_for_distance
from .routing import (AeergState, GossipConfig, SleepDecision, adjust_b, destination_feedback,
                      gossip_decide, select_targets, sleep_decide)
from .simcore import US_PER_S, Engine, seconds_to_us
from .traffic import (CbrFlow, TcpLiteFlow, TcpLiteReceiver, cbr_emit, tcp_on_ack,
                      tcp_on_timeout, tcp_send_window)

# fixed wire sizes for control packets carried as floods
ACK_BYTES = 40
FEEDBACK_BYTES = 32
# feedback reports travel at full reach: a loop whose "deliver more" signal
# is carried at the failing B would rarely hear it
FEEDBACK_B = 1 << 30


class PacketKind(enum.Enum):
    DATA = "DATA"
    BEACON = "BEACON"
    ATIM = "ATIM"
    ATIM_ACK = "ATIM-ACK"
    FEEDBACK = "FEEDBACK"
    TCP_ACK = "TCP-ACK"


class Flood:
    __slots__ = ("uid", "kind", "flow", "seq", "live", "delivered", "delivered_at", "extinct",
                 "cause")

    def __init__(self, uid, kind, flow, seq):
        self.uid = uid
        self.kind = kind
        self.flow = flow
        self.seq = seq
        self.live = 0
        self.delivered = False
        self.delivered_at = None
        self.extinct = False
        self.cause = None


class Frame:
    """One node's copy of a flood."""

    __slots__ = ("flood", "src", "dst", "origin", "hop", "b", "nbytes", "value", "txs", "dead")

    def __init__(self, flood, src, dst, origin, hop, b, nbytes, value=None):
        self.flood = flood
        self.src = src
        self.dst = dst
        self.origin = origin
        self.hop = hop
        self.b = b
        self.nbytes = nbytes
        self.value = value   # ack number or delivery ratio
        self.txs = 0
        self.dead = False

    def forwarded(self, hop):
        return Frame(self.flood, self.src, self.dst, self.origin, hop, self.b, self.nbytes,
                     self.value)

    def __str__(self):
        f = self.flood
        return f"{f.kind.value}:{f.flow}:{f.seq}:{f.uid}:h{self.hop}"


class Tx:
    __slots__ = ("frame", "radius", "power", "dests", "retries", "buffered", "not_before",
                 "receivers", "corrupt", "end")

    def __init__(self, frame, radius, power, dests, retries=0, buffered=False, not_before=0):
        self.frame = frame
        self.radius = radius
        self.power = power
        self.dests = dests
        self.retries = retries
        self.buffered = buffered
        self.not_before = not_before
        self.receivers = ()
        self.corrupt = None
        self.end = 0


class Node:
    def __init__(self, nid: int, motion: mob.MotionState, station: PsmStation,
                 ledger: EnergyLedger, aeerg: AeergState):
        self.id = nid
        self.motion = motion
        self.pos = motion.origin
        self.table: list = []     # [(distance, id)] ascending
        self.dist: dict = {}
        self.mac = station
        self.aeerg = aeerg
        self.ledger = ledger
        self.alive = True
        self.txq: deque = deque()
        self.sending: Optional[Tx] = None
        self.tx_until = 0
        self.busy_until = 0
        self.rx_active: list = []
        self.seen: set = set()
        self.held: list = []
        self.try_at: Optional[int] = None
        self.try_token = 0
        self.backed_off = False
        self.deferred = False
        self.rx_us = 0
        self.tx_us = 0
        self.tx_j = 0.0
        self.doze_us = 0
        self.doze_since = 0

    @property
    def dozing(self) -> bool:
        return self.mac.dozing


@dataclass
class FlowState:
    index: int
    src: int
    dst: int
    kind: str
    cbr: Optional[CbrFlow] = None
    tcp: Optional[TcpLiteFlow] = None
    receiver: Optional[TcpLiteReceiver] = None
    counters: FlowCounters = field(default_factory=FlowCounters)
    measured: FlowCounters = field(default_factory=FlowCounters)
    floods: dict = field(default_factory=dict)       # cbr seq -> Flood
    origin: dict = field(default_factory=dict)       # seq -> first send time
    got: set = field(default_factory=set)            # seqs that reached dst at least once
    drops: dict = field(default_factory=lambda: {c: 0 for c in DROP_CAUSES})
    stop: int = 0
    # destination-side feedback window
    win_id: int = 0
    win_first: int = 0
    win_recv: int = 0
    win_max: int = -1
    win_open: bool = False
    win_token: int = 0
    last_b: int = 1
    # source-side
    last_feedback: int = 0
    feedback_rx: int = 0


@dataclass
class RunResult:
    cfg: ScenarioConfig
    flows: list
    ledgers: list
    audits: list
    copy_drops: dict
    b_violations: int
    b_max: int
    events: int
    deliveries_while_dozing: int
    tx_while_dozing: int
    mac_drops: dict


class Network:
    """One scenario run.

    ``positions`` pins every node to a fixed point (a static topology) and
    ``pairs`` replaces the randomly drawn flow endpoints; both exist for
    controlled experiments and tests.
    """

    def __init__(self, cfg: ScenarioConfig, trace: Optional[TextIO] = None,
                 positions: Optional[list] = None, pairs: Optional[list] = None):
        cfg.validate()
        if positions is not None and len(positions) != cfg.n_nodes:
            raise ValueError(f"{len(positions)} positions for {cfg.n_nodes} nodes")
        self.cfg = cfg
        self.engine = Engine(cfg.seed, trace)
        self.until = seconds_to_us(cfg.sim_time_s)
        self.region = mob.Region(cfg.area_w_m, cfg.area_h_m)
        self.table = PowerTable(cfg.p_tx_w, cfg.p_rx_w, cfg.p_idle_w, cfg.p_doze_w)
        self.schedule = PsmSchedule(int(round(cfg.beacon_interval_ms * 1000)),
                                    int(round(cfg.atim_window_ms * 1000)))
        self.psm = cfg.psm
        self.aeerg = cfg.protocol == "aeerg"
        self.gossip = GossipConfig(cfg.p_gossip, cfg.hops_forced)
        self.range = cfg.range_m
        self.rate = cfg.rate_bps
        self.tick = seconds_to_us(cfg.neighbor_tick_s)
        self.warmup = seconds_to_us(cfg.warmup_s)
        self.fb_window = seconds_to_us(cfg.feedback_window_s)
        self.rng_mob = self.engine.stream("mobility")
        self.rng_sleep = self.engine.stream("sleep")
        self.rng_gossip = self.engine.stream("gossip")
        self.rng_traffic = self.engine.stream("traffic")
        self.rng_mac = self.engine.stream("mac")
        self.rng_fault = self.engine.stream("fault")
        self.hop_loss = cfg.hop_loss
        self._uid = 0
        self._airtime: dict = {}
        self.copy_drops = {c: 0 for c in DROP_CAUSES}
        self.b_violations = 0
        self.b_max = 1
        self.deliveries_while_dozing = 0
        self.tx_while_dozing = 0
        self._atim_done = -1

        self.nodes: list[Node] = []
        for i in range(cfg.n_nodes):
            if positions is not None:
                p = tuple(map(float, positions[i]))
                motion = mob.MotionState(p, p, 0, 0.0, cfg.pause_s)
            else:
                motion = mob.initial_motion(self.rng_mob, self.region, cfg.speed_mps,
                                            cfg.pause_s)
            station = PsmStation(i, self.schedule, MacBuffer(cfg.mac_buffer_cap, cfg.mac_retry_max))
            ledger = EnergyLedger(self.table, cfg.initial_energy_j)
            self.nodes.append(Node(i, motion, station, ledger, AeergState(1, cfg.rt, cfg.p_sleep)))
        self.flows: list[FlowState] = []
        self.by_src: dict = {}
        self._setup_flows(pairs)

        self.engine.schedule(0, "tick", "net", self._on_tick)
        if self.psm:
            self.engine.schedule(0, "beacon", "net", self._on_beacon, 0)

    # ------------------------------------------------------------------ setup

    def _setup_flows(self, pairs=None):
        cfg = self.cfg
        if pairs is None:
            n_pairs = min(cfg.flows, cfg.n_nodes // 2)
            ends = self.rng_traffic.sample(range(cfg.n_nodes), 2 * n_pairs)
            pairs = [(ends[2 * i], ends[2 * i + 1]) for i in range(n_pairs)]
        interval = seconds_to_us(1.0 / cfg.cbr_rate_pps)
        base = seconds_to_us(cfg.traffic_start_s)
        for i, (src, dst) in enumerate(pairs):
            if src in self.by_src or src == dst:
                raise ValueError(f"flow endpoints ({src}, {dst}) must be distinct sources")
            start = base + self.rng_traffic.randrange(interval)
            fs = FlowState(i, src, dst, cfg.traffic, stop=self.until)
            if cfg.traffic == "cbr":
                fs.cbr = CbrFlow(src, dst, cfg.cbr_pkt_bytes, interval, start, self.until)
            else:
                fs.tcp = TcpLiteFlow(src, dst, cfg.cbr_pkt_bytes, cfg.tcp_window,
                                     rto_min=int(cfg.tcp_rto_min_ms * 1000),
                                     max_retx=cfg.tcp_max_retx, backlog=0)
                fs.receiver = TcpLiteReceiver()
            fs.last_feedback = start
            self.flows.append(fs)
            self.by_src[src] = fs
            if start < self.until:
                self.engine.schedule(start, "app", src, self._on_app, fs, start)

    # ------------------------------------------------------------- helpers

    def airtime(self, frame) -> int:
        d = self._airtime.get(frame.nbytes)
        if d is None:
            d = self._airtime[frame.nbytes] = tx_duration(frame.nbytes, self.rate)
        return d

    def _new_flood(self, kind, flow, seq) -> Flood:
        self._uid += 1
        return Flood(self._uid, kind, flow, seq)

    def power_for(self, radius: float) -> float:
        return tx_power_for_distance(min(radius, self.range), self.range, self.table,
                                     self.cfg.path_loss_alpha)

    # ----------------------------------------------------------- topology

    def _on_tick(self):
        now = self.engine.now
        nodes = self.nodes
        for n in nodes:
            if n.alive and n.motion.speed > 0:
                n.motion = mob.advance(n.motion, now, self.rng_mob, self.region)
                n.pos = mob.position_at(n.motion, now)
        self._refresh_tables()
        self._check_energy(now)
        for n in nodes:
            if n.held:
                held, n.held = n.held, []
                for frame, upstream, since in held:
                    if since < now:
                        self._route_copy(n, frame, upstream, retry_isolated=True)
                    else:
                        n.held.append((frame, upstream, since))
        if self.aeerg:
            silence = 2 * self.fb_window
            for fs in self.flows:
                src = nodes[fs.src]
                if src.alive and now - fs.last_feedback >= silence and now <= fs.stop:
                    self._apply_feedback(src, 0.0)
                    fs.last_feedback = now
        nxt = now + self.tick
        if nxt <= self.until:
            self.engine.schedule(nxt, "tick", "net", self._on_tick)

    def _refresh_tables(self):
        alive = [n for n in self.nodes if n.alive]
        r = self.range
        for n in self.nodes:
            n.table = []
            n.dist = {}
        for i, a in enumerate(alive):
            ax, ay = a.pos
            for b in alive[i + 1:]:
                d = math.hypot(ax - b.pos[0], ay - b.pos[1])
                if d <= r:
                    a.table.append((d, b.id))
                    b.table.append((d, a.id))
        for n in alive:
            n.table.sort()
            n.dist = {nid: d for d, nid in n.table}
            st = n.aeerg
            st.clamp(len(n.table))
            if not 1 <= st.b <= max(1, len(n.table)):
                self.b_violations += 1

    def _check_energy(self, now):
        for n in self.nodes:
            if not n.alive or n.tx_until > now or n.busy_until > now:
                continue
            doze = n.doze_us + (now - n.doze_since if n.dozing else 0)
            idle = now - n.tx_us - n.rx_us - doze
            spent = (n.tx_j + (n.rx_us * self.table.p_rx + doze * self.table.p_doze
                               + idle * self.table.p_idle) / US_PER_S)
            if spent >= n.ledger.initial:
                self._kill(n, now)

    def _kill(self, n: Node, now: int):
        self._settle(n, now)
        n.alive = False
        n.mac.alive = False
        if n.dozing:
            n.doze_us += now - n.doze_since
        n.mac.dozing = True   # never hears or sends again
        n.doze_since = now
        for tx in list(n.txq):
            tx.frame.txs -= 1
            self._check_copy(n, tx.frame, "lost")
        n.txq.clear()
        entries = n.mac.buffer.entries
        n.mac.buffer.replace_entries([])
        for e in entries:
            self._check_copy(n, e.frame, "lost")
        for frame, _, _ in n.held:
            self._copy_done(frame, "isolated")
        n.held = []
        self.engine.note(n.id, "dead", f"{n.ledger.residual:.6f}")

    # ------------------------------------------------------------ energy

    def _settle(self, n: Node, upto: int):
        """Move the node's radio-time counters into its ledger up to ``upto``."""
        led = n.ledger
        doze = n.doze_us + (upto - n.doze_since if n.dozing and n.alive else 0)
        idle = upto - n.tx_us - n.rx_us - doze
        already = led.elapsed * US_PER_S
        if n.alive:
            assert idle >= 0, f"node {n.id}: radio time over-committed by {-idle} us"
            if n.tx_us:
                accrue(led, RadioMode.TRANSMIT, n.tx_us / US_PER_S, n.tx_j / (n.tx_us / US_PER_S))
            accrue(led, RadioMode.RECEIVE, n.rx_us / US_PER_S)
            accrue(led, RadioMode.DOZE, doze / US_PER_S)
            accrue(led, RadioMode.IDLE, idle / US_PER_S)
        else:
            # dead since its last settle: the rest is powerless doze
            accrue(led, RadioMode.DOZE, max(0.0, upto - already) / US_PER_S, 0.0)
        n.tx_us = n.rx_us = n.doze_us = 0
        n.tx_j = 0.0

    # --------------------------------------------------------------- PSM

    def _on_beacon(self, k: int):
        now = self.engine.now
        for n in self.nodes:
            if not n.alive:
                continue
            if k > 0:
                self._end_interval(n)
            if n.dozing:
                n.doze_us += now - n.doze_since
                self.engine.note(n.id, "wake")
            n.mac.on_interval_start(k)
        for n in self.nodes:
            if n.alive and n.mac.buffer.entries:
                self._atim_exchange(n)
        self.engine.schedule(self.schedule.window_end(k), "atim_end", "net", self._on_atim_end, k)
        nxt = self.schedule.interval_start(k + 1)
        if nxt <= self.until:
            self.engine.schedule(nxt, "beacon", "net", self._on_beacon, k + 1)

    def _end_interval(self, n: Node):
        # anything still queued missed this interval: back to the buffer
        while n.txq:
            tx = n.txq.popleft()
            tx.frame.txs -= 1
            self._rebuffer(n, tx)
        for e in n.mac.end_interval():
            self._check_copy(n, e.frame, "retry")

    def _rebuffer(self, n: Node, tx: Tx):
        if tx.buffered:
            ok = n.mac.requeue(tx.frame, tx.dests, tx.retries + 1)
            cause = "retry" if tx.retries + 1 > n.mac.buffer.retry_max else "buffer"
        else:
            ok = n.mac.arrival_between_windows(tx.frame, tx.dests)
            cause = "buffer"
        if not ok:
            self._check_copy(n, tx.frame, cause)

    def _atim_exchange(self, n: Node):
        now = self.engine.now
        nodes = self.nodes
        for atim in n.mac.advertise():
            if atim.dest == BROADCAST:
                for d, nid in n.table:
                    nodes[nid].mac.on_atim(atim, now)
            else:
                peer = nodes[atim.dest]
                if atim.dest in n.dist and peer.alive:
                    ack = peer.mac.on_atim(atim, now)
                    if ack is not None:
                        n.mac.mark_on_ack(ack, now)

    def _on_atim_end(self, k: int):
        now = self.engine.now
        self._atim_done = k
        for n in self.nodes:
            if not n.alive:
                continue
            forced = n.mac.pledged or bool(n.txq) or bool(n.mac.buffer.marked())
            if self.aeerg:
                doze = sleep_decide(n.aeerg, self.rng_sleep, forced) is SleepDecision.SLEEP
            else:
                doze = not forced
            if doze:
                n.mac.dozing = True
                n.doze_since = now
                self.engine.note(n.id, "doze")
        for n in self.nodes:
            if not n.alive or n.dozing or not n.mac.buffer.entries:
                continue
            self._flush(n)

    def _flush(self, n: Node):
        """Start sending marked frames; they leave the buffer one at a time."""
        self._try_send(n)

    def _buffered_tx(self, n: Node, frame, dests, retries) -> Tx:
        if BROADCAST in dests:
            radius = self.range
        else:
            radius = max((n.dist[d] for d in dests if d in n.dist), default=self.range)
        return Tx(frame, radius, self.power_for(radius), tuple(dests), retries, True)

    # ------------------------------------------------------------ channel

    def _schedule_try(self, n: Node, t: int):
        if n.try_at is not None and n.try_at <= t:
            return
        n.try_token += 1
        n.try_at = t
        self.engine.schedule(t, "try", n.id, self._on_try, n, n.try_token)

    def _on_try(self, n: Node, token: int):
        if token != n.try_token:
            return
        n.try_at = None
        self._try_send(n)

    def _try_send(self, n: Node):
        if n.sending is not None or not n.alive:
            return
        queued = bool(n.txq)
        if queued:
            tx = n.txq[0]
        elif self.psm and n.mac.buffer.entries:
            nxt = n.mac.next_marked()
            if nxt is None:
                return
            tx = None
        else:
            return
        now = self.engine.now
        sched = self.schedule
        if self.psm:
            k = sched.interval_of(now)
            if sched.in_atim_window(now):
                self._schedule_try(n, sched.window_end(k))
                return
            if self._atim_done < k:
                # sleep decisions for this interval come first
                self._schedule_try(n, now)
                return
        if queued and tx.not_before > now:
            self._schedule_try(n, tx.not_before)
            return
        if n.dozing:
            self.tx_while_dozing += 1
            return
        if tx is None:
            tx = self._buffered_tx(n, *nxt)
        dur = self.airtime(tx.frame)
        if now + dur > self.until:
            return
        if self.psm and now + dur > sched.interval_end(now):
            # too late in this interval: queued copies go back to the
            # buffer, marked ones stay and age at the interval end
            while n.txq:
                t = n.txq.popleft()
                t.frame.txs -= 1
                self._rebuffer(n, t)
            return
        if n.busy_until > now:
            if self.cfg.collisions:
                backoff = self.rng_mac.randint(0, self.cfg.mac_cw_us)
                self._schedule_try(n, n.busy_until + backoff)
            else:
                # woken by the end of the transmission that keeps it busy
                n.deferred = True
            return
        if self.cfg.collisions and not n.backed_off:
            n.backed_off = True
            self._schedule_try(n, now + self.rng_mac.randint(0, self.cfg.mac_cw_us))
            return
        n.backed_off = False
        if queued:
            n.txq.popleft()
        else:
            n.mac.take_frame(tx.frame)
            tx.frame.txs += 1
        self._start_tx(n, tx, now, dur)

    def _start_tx(self, n: Node, tx: Tx, now: int, dur: int):
        end = now + dur
        tx.end = end
        n.sending = tx
        if n.busy_until > now:
            n.rx_us -= min(n.busy_until, end) - now
        n.tx_until = end
        n.tx_us += dur
        n.tx_j += dur * tx.power / US_PER_S
        collisions = self.cfg.collisions
        if collisions:
            tx.corrupt = set()
            for other in n.rx_active:
                if other.end > now:
                    other.corrupt.add(n.id)
        nodes = self.nodes
        radius = tx.radius
        receivers = []
        for d, nid in n.table:
            if d > radius:
                break
            r = nodes[nid]
            if r.mac.dozing:
                continue
            bu = r.busy_until
            if end > bu:
                frm = bu if bu > now else now
                add = end - frm
                if r.tx_until > frm:
                    add -= min(r.tx_until, end) - frm
                r.rx_us += add
                r.busy_until = end
            if collisions:
                active = [a for a in r.rx_active if a.end > now]
                if active or r.tx_until > now:
                    tx.corrupt.add(nid)
                    for a in active:
                        a.corrupt.add(nid)
                active.append(tx)
                r.rx_active = active
            receivers.append(r)
        tx.receivers = receivers
        if self.engine.trace is not None:
            self.engine.note(n.id, "tx", f"{tx.frame} r={radius:.1f}")
        self.engine.schedule(end, "tx_end", n.id, self._on_tx_end, n, tx)

    def _on_tx_end(self, n: Node, tx: Tx):
        n.sending = None
        frame = tx.frame
        corrupt = tx.corrupt
        sender = n.id
        uid = frame.flood.uid
        quiet = self.engine.trace is None
        hop_loss = self.hop_loss
        for r in tx.receivers:
            if corrupt is not None and r.id in corrupt:
                continue
            if r.mac.dozing or not r.alive:
                continue
            if hop_loss and self.rng_fault.random() < hop_loss:
                continue
            if quiet and uid in r.seen:
                continue   # duplicate; _receive would drop it
            self._receive(r, frame, sender)
        frame.txs -= 1
        self._check_copy(n, frame, None)
        self._try_send(n)
        now = self.engine.now
        for r in tx.receivers:
            if r.deferred and r.busy_until <= now:
                r.deferred = False
                self._try_send(r)

    # ------------------------------------------------------------ copies

    def _check_copy(self, holder: Node, frame: Frame, cause: Optional[str]):
        if frame.dead or frame.txs > 0 or holder.mac.buffer.holds(frame):
            return
        self._copy_done(frame, cause)

    def _copy_done(self, frame: Frame, cause: Optional[str]):
        frame.dead = True
        flood = frame.flood
        if cause is not None:
            self.copy_drops[cause] += 1
            flood.cause = cause
        flood.live -= 1
        if flood.live == 0 and not flood.delivered:
            self._extinct(flood)

    def _extinct(self, flood: Flood):
        flood.extinct = True
        if flood.kind is PacketKind.DATA and flood.flow is not None and self.cfg.traffic == "cbr":
            fs = self.flows[flood.flow]
            fs.drops[flood.cause or "lost"] += 1
        if self.engine.trace is not None:
            self.engine.note("net", "extinct", f"{flood.kind.value}:{flood.flow}:{flood.seq}")

    # ----------------------------------------------------------- routing

    def _receive(self, r: Node, frame: Frame, sender: int):
        flood = frame.flood
        if self.engine.trace is not None:
            self.engine.note(r.id, "rx", f"{frame} from={sender}")
        if flood.uid in r.seen:
            return
        r.seen.add(flood.uid)
        if frame.dst == r.id:
            flood.delivered = True
            flood.delivered_at = self.engine.now
            kind = flood.kind
            if flood.flow is None:
                return
            if kind is PacketKind.DATA:
                self._deliver_data(r, frame)
            elif kind is PacketKind.TCP_ACK:
                self._on_tcp_ack(self.flows[flood.flow], frame.value)
            elif kind is PacketKind.FEEDBACK:
                fs = self.flows[flood.flow]
                fs.feedback_rx += 1
                fs.last_feedback = self.engine.now
                self._apply_feedback(r, frame.value)
            return
        hop = frame.hop + 1
        if hop >= self.cfg.ttl:
            self.copy_drops["ttl"] += 1
            flood.cause = "ttl"
            return
        if not self.aeerg and not gossip_decide(self.gossip, hop, self.rng_gossip):
            return
        copy = frame.forwarded(hop)
        flood.live += 1
        self._route_copy(r, copy, sender)

    def _originate(self, node: Node, flood: Flood, dst: int, origin: int, nbytes: int,
                   b: int, value=None):
        frame = Frame(flood, node.id, dst, origin, 0, b, nbytes, value)
        node.seen.add(flood.uid)
        flood.live += 1
        if not node.alive:
            self._copy_done(frame, "lost")
            return
        self._route_copy(node, frame, None)

    def _route_copy(self, n: Node, frame: Frame, upstream: Optional[int],
                    retry_isolated: bool = False):
        """Send or buffer a live copy held by ``n``."""
        if not self.aeerg:
            if self.psm:
                self._buffer(n, frame, [BROADCAST])
            else:
                self._enqueue(n, Tx(frame, self.range, self.table.p_tx, (BROADCAST,)))
            return
        targets = select_targets(_BView(frame.b), n.table, exclude=upstream)
        if not targets:
            if retry_isolated:
                self._copy_done(frame, "isolated")
            else:
                n.held.append((frame, upstream, self.engine.now))
            return
        if not self.psm:
            radius = n.dist[targets[-1]]
            self._enqueue(n, Tx(frame, radius, self.power_for(radius), tuple(targets)))
            return
        if n.dozing or self.schedule.in_atim_window(self.engine.now):
            self._buffer(n, frame, targets)
            return
        nodes = self.nodes
        awake = [t for t in targets if not nodes[t].dozing]
        asleep = [t for t in targets if nodes[t].dozing]
        if awake:
            radius = n.dist[awake[-1]]
            self._enqueue(n, Tx(frame, radius, self.power_for(radius), tuple(awake)))
        if asleep:
            self._buffer(n, frame, asleep)

    def _enqueue(self, n: Node, tx: Tx):
        tx.frame.txs += 1
        n.txq.append(tx)
        self._try_send(n)

    def _buffer(self, n: Node, frame: Frame, dests):
        if not n.mac.arrival_between_windows(frame, dests):
            self._check_copy(n, frame, "buffer")
            return
        if self.psm and self.schedule.in_atim_window(self.engine.now) and not n.dozing:
            self._atim_exchange(n)

    # ------------------------------------------------------------- feedback

    def _apply_feedback(self, src: Node, d: float):
        adjust_b(src.aeerg, d, len(src.table))
        b = src.aeerg.b
        if b > self.b_max:
            self.b_max = b
        if not 1 <= b <= max(1, len(src.table)):
            self.b_violations += 1
        self.engine.note(src.id, "feedback", f"D={d:.3f} B={b}")

    def _window_arrival(self, fs: FlowState, seq: int, b: int):
        if not self.aeerg:
            return
        fs.last_b = b
        if not fs.win_open:
            self._open_window(fs)
        if seq >= fs.win_first:
            fs.win_recv += 1
            if seq > fs.win_max:
                fs.win_max = seq
            if fs.win_recv >= self.cfg.feedback_window_pkts:
                self._close_window(fs)

    def _open_window(self, fs: FlowState):
        fs.win_open = True
        fs.win_token += 1
        fs.win_recv = 0
        self.engine.schedule_in(self.fb_window, "fb_window", fs.dst, self._on_window_timer,
                                fs, fs.win_token)

    def _on_window_timer(self, fs: FlowState, token: int):
        if token == fs.win_token and fs.win_open:
            self._close_window(fs)

    def _close_window(self, fs: FlowState):
        sent = fs.win_max - fs.win_first + 1 if fs.win_max >= fs.win_first else 0
        fb = destination_feedback(fs.index, sent, fs.win_recv, fs.win_id)
        fs.win_id += 1
        if fs.win_max >= fs.win_first:
            fs.win_first = fs.win_max + 1
        dst = self.nodes[fs.dst]
        flood = self._new_flood(PacketKind.FEEDBACK, fs.index, fb.window)
        self._originate(dst, flood, fs.src, self.engine.now, FEEDBACK_BYTES, FEEDBACK_B, fb.d)
        if self.engine.now + self.fb_window <= fs.stop:
            self._open_window(fs)
        else:
            fs.win_open = False

    # ------------------------------------------------------------- traffic

    def _on_app(self, fs: FlowState, t: int):
        src = self.nodes[fs.src]
        if fs.cbr is not None:
            seq, nxt = cbr_emit(fs.cbr, t)
            fs.counters.sent += 1
            if t >= self.warmup:
                fs.measured.sent += 1
            fs.origin[seq] = t
            flood = self._new_flood(PacketKind.DATA, fs.index, seq)
            fs.floods[seq] = flood
            self._originate(src, flood, fs.dst, t, fs.cbr.pkt_bytes, src.aeerg.b)
        else:
            fs.tcp.backlog += 1
            for seq in tcp_send_window(fs.tcp, t):
                self._tcp_first_send(fs, seq, t)
            nxt = t + seconds_to_us(1.0 / self.cfg.cbr_rate_pps)
            if nxt >= fs.stop:
                nxt = None
        if nxt is not None:
            self.engine.schedule(nxt, "app", fs.src, self._on_app, fs, nxt)

    def _tcp_first_send(self, fs: FlowState, seq: int, t: int):
        fs.counters.sent += 1
        if t >= self.warmup:
            fs.measured.sent += 1
        fs.origin[seq] = t
        self._tcp_transmit(fs, seq)

    def _tcp_transmit(self, fs: FlowState, seq: int):
        src = self.nodes[fs.src]
        entry = fs.tcp.inflight[seq]
        flood = self._new_flood(PacketKind.DATA, fs.index, seq)
        self._originate(src, flood, fs.dst, fs.origin[seq], fs.tcp.pkt_bytes, src.aeerg.b)
        entry.timer += 1
        self.engine.schedule_in(fs.tcp.timeout_for(seq), "rto", fs.src, self._on_rto, fs, seq,
                                entry.timer)

    def _on_rto(self, fs: FlowState, seq: int, token: int):
        entry = fs.tcp.inflight.get(seq)
        if entry is None or entry.timer != token:
            return
        if tcp_on_timeout(fs.tcp, seq, self.engine.now):
            self._tcp_transmit(fs, seq)
        elif fs.tcp.aborted:
            self.engine.note(fs.src, "abort", f"flow={fs.index} seq={seq}")

    def _on_tcp_ack(self, fs: FlowState, ack: int):
        now = self.engine.now
        for seq in tcp_on_ack(fs.tcp, ack, now):
            self._tcp_first_send(fs, seq, now)

    def _deliver_data(self, r: Node, frame: Frame):
        fs = self.flows[frame.flood.flow]
        seq = frame.flood.seq
        now = self.engine.now
        if r.dozing:
            self.deliveries_while_dozing += 1
        first = seq not in fs.got
        fs.got.add(seq)
        if first:
            self._window_arrival(fs, seq, frame.b)
        if fs.cbr is not None:
            if first:
                self._app_deliver(fs, seq, now, frame.nbytes)
            return
        for s, _ in fs.receiver.on_data(seq):
            self._app_deliver(fs, s, now, frame.nbytes)
        ack_flood = self._new_flood(PacketKind.TCP_ACK, fs.index, fs.receiver.expected)
        self._originate(r, ack_flood, fs.src, now, ACK_BYTES, frame.b, fs.receiver.expected)

    def _app_deliver(self, fs: FlowState, seq: int, now: int, nbytes: int):
        origin = fs.origin[seq]
        delay = (now - origin) / US_PER_S
        fs.counters.record_delivery(delay, nbytes)
        if origin >= self.warmup:
            fs.measured.record_delivery(delay, nbytes)
        if self.engine.trace is not None:
            self.engine.note(fs.dst, "deliver", f"flow={fs.index} seq={seq} delay_us={now - origin}")

    def inject(self, src: int, dst: int, at: int, nbytes: Optional[int] = None) -> Flood:
        """Schedule a one-off data packet outside any flow; returns its flood.

        ``dst`` may be a node id or any non-node value for a pure broadcast.
        The flood's ``delivered_at`` records the arrival time at ``dst``.
        """
        flood = self._new_flood(PacketKind.DATA, None, 0)
        size = self.cfg.cbr_pkt_bytes if nbytes is None else nbytes
        node = self.nodes[src]
        self.engine.schedule(at, "inject", src, self._originate, node, flood, dst, at, size,
                             node.aeerg.b)
        return flood

    def reached(self, flood: Flood) -> set:
        """Ids of the nodes that have received or originated ``flood``."""
        return {n.id for n in self.nodes if flood.uid in n.seen}

    # ----------------------------------------------------------------- run

    def run(self) -> RunResult:
        self.engine.run(self.until)
        for n in self.nodes:
            self._settle(n, self.until)
        audits = [self._audit(fs) for fs in self.flows]
        mac_drops = {
            "buffer": sum(n.mac.drops_buffer for n in self.nodes),
            "retry": sum(n.mac.drops_retry for n in self.nodes),
        }
        return RunResult(self.cfg, self.flows, [n.ledger for n in self.nodes], audits,
                         dict(self.copy_drops), self.b_violations, self.b_max,
                         self.engine.executed, self.deliveries_while_dozing,
                         self.tx_while_dozing, mac_drops)

    def _audit(self, fs: FlowState) -> FlowAudit:
        if fs.cbr is not None:
            inflight = sum(1 for fl in fs.floods.values() if not fl.delivered and fl.live > 0)
            drops = {k: v for k, v in fs.drops.items() if v}
            return FlowAudit(fs.index, fs.counters.sent, fs.counters.received, inflight, drops)
        sent = fs.counters.sent
        undelivered = fs.tcp.next_seq - fs.receiver.expected
        drops = {"abort": undelivered} if fs.tcp.aborted and undelivered else {}
        inflight = 0 if fs.tcp.aborted else undelivered
        return FlowAudit(fs.index, sent, fs.counters.received, inflight, drops)


class _BView:
    """Minimal stand-in for AeergState when forwarding with a packet's B."""

    __slots__ = ("b",)

    def __init__(self, b):
        self.b = b
