"""Discrete-event packet simulator with drop-tail FIFO links.

Each link keeps the time at which its transmitter frees up plus the start
times of packets still waiting, so a packet's departure is fixed when it is
enqueued and one heap event per hop is enough.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Optional, Sequence

import numpy as np

from .topology import RoutingState, Topology

CBR = "cbr"
POISSON = "poisson"
ARRIVAL_MODELS = (CBR, POISSON)

QUEUED = "queued"
DROPPED = "dropped"

_GEN = 0
_HOP = 1

_BLOCK = 4096


@dataclass(frozen=True)
class FlowSpec:
    src: int
    dst: int
    rate: float
    packet_size: int = 1024
    arrival_model: str = POISSON
    start: float = 0.0
    stop: Optional[float] = None

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("flow rate must be > 0")
        if self.packet_size < 64:
            raise ValueError("packet_size must be >= 64 bytes")
        if self.src == self.dst:
            raise ValueError("flow src and dst must differ")
        if self.arrival_model not in ARRIVAL_MODELS:
            raise ValueError(f"unknown arrival model {self.arrival_model!r}")

    @property
    def mean_interval(self) -> float:
        return self.packet_size * 8 / self.rate


@dataclass(slots=True)
class Packet:
    id: int
    flow: int
    src: int
    dst: int
    size: int
    created_at: float
    delivered_at: Optional[float] = None
    hops: int = 0
    departs_at: float = 0.0


@dataclass
class SlotMetrics:
    slot_index: int
    tx_bytes: np.ndarray
    injected: int = 0
    delivered: int = 0
    dropped: int = 0
    sum_delay: float = 0.0

    @property
    def mean_delay(self) -> Optional[float]:
        if self.delivered == 0:
            return None
        return self.sum_delay / self.delivered


def transmission_time(packet_size: float, bandwidth: float) -> float:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be > 0")
    return packet_size * 8 / bandwidth


def next_arrival(flow: FlowSpec, now: float, rng: np.random.Generator) -> float:
    if flow.arrival_model == CBR:
        return now + flow.mean_interval
    return now + rng.exponential(flow.mean_interval)


class _LinkState:
    __slots__ = ("busy_until", "waiting", "capacity", "bandwidth", "prop_delay", "dst")

    def __init__(self, link):
        self.busy_until = 0.0
        self.waiting = deque()
        self.capacity = link.queue_capacity
        self.bandwidth = link.bandwidth
        self.prop_delay = link.prop_delay
        self.dst = link.dst

    def queue_length(self, now: float) -> int:
        w = self.waiting
        while w and w[0] <= now:
            w.popleft()
        return len(w)


def enqueue(link: _LinkState, packet: Packet, now: float) -> str:
    """Drop-tail admission; on success fixes the packet's departure time."""
    if link.queue_length(now) >= link.capacity:
        return DROPPED
    start = link.busy_until if link.busy_until > now else now
    if start > now:
        link.waiting.append(start)
    link.busy_until = start + packet.size * 8 / link.bandwidth
    packet.departs_at = link.busy_until
    return QUEUED


class _Uniforms:
    """Buffered uniform draws; keeps per-packet sampling cheap."""

    def __init__(self, rng):
        self.rng = rng
        self.buf = rng.random(_BLOCK)
        self.i = 0

    def __call__(self) -> float:
        if self.i == _BLOCK:
            self.buf = self.rng.random(_BLOCK)
            self.i = 0
        u = float(self.buf[self.i])
        self.i += 1
        return u


class _Exponentials(_Uniforms):
    def __init__(self, rng):
        self.rng = rng
        self.buf = rng.standard_exponential(_BLOCK)
        self.i = 0

    def __call__(self) -> float:
        if self.i == _BLOCK:
            self.buf = self.rng.standard_exponential(_BLOCK)
            self.i = 0
        u = float(self.buf[self.i])
        self.i += 1
        return u


class Simulator:
    """Packet-level simulation of one network for one episode.

    Time starts at 0. `run_slot` advances the clock by a fixed duration under
    a given RoutingState; queues carry over from slot to slot.
    """

    # when set, every slot boundary asserts injected == delivered + dropped + queued + in_flight
    audit = False

    def __init__(self, topology: Topology, flows: Sequence[FlowSpec], rng: np.random.Generator,
                 trace: bool = False):
        self.topology = topology
        self.flows = list(flows)
        for f in self.flows:
            for end in (f.src, f.dst):
                if not 0 <= end < topology.num_nodes:
                    raise ValueError(f"flow {f.src}->{f.dst} references unknown node {end}")
        self.now = 0.0
        self.slot_index = 0
        self.links = [_LinkState(l) for l in topology.links]
        self._heap: list = []
        self._seq = 0
        self._pkt_id = 0
        self._uniform = _Uniforms(rng)
        self._expo = _Exponentials(rng)
        self.injected = 0
        self.delivered = 0
        self.dropped = 0
        self.trace: Optional[list] = [] if trace else None
        for i, f in enumerate(self.flows):
            first = f.start
            if f.arrival_model == POISSON:
                first += self._expo() * f.mean_interval
            self._push(first, _GEN, i, None)

    def _push(self, t, kind, a, b):
        heappush(self._heap, (t, self._seq, kind, a, b))
        self._seq += 1

    def inject(self, src: int, dst: int, size: int = 1024, at: Optional[float] = None) -> Packet:
        """Schedule a single packet outside any flow (flow id -1)."""
        pkt = Packet(self._pkt_id, -1, src, dst, size, self.now if at is None else at)
        self._pkt_id += 1
        self._push(pkt.created_at, _GEN, -1, pkt)
        return pkt

    def _forwarding_table(self, routing: RoutingState):
        table = {}
        for key, choices in routing.next_hop_dist.items():
            if not choices:
                table[key] = None
            elif len(choices) == 1:
                table[key] = choices[0][0]
            else:
                cum = np.cumsum([p for _, p in choices]).tolist()
                cum[-1] = 1.0
                table[key] = ([lid for lid, _ in choices], cum)
        return table

    def run_slot(self, routing: RoutingState, duration: float) -> SlotMetrics:
        if not duration > 0:
            raise ValueError("slot duration must be > 0")
        n = self.topology.num_nodes
        m = SlotMetrics(self.slot_index, np.zeros((n, n), dtype=np.int64))
        table = self._forwarding_table(routing)
        end = self.now + duration
        heap = self._heap
        links = self.links
        flows = self.flows
        uniform = self._uniform
        trace = self.trace

        while heap and heap[0][0] < end:
            t, _, kind, a, pkt = heappop(heap)
            if kind == _GEN:
                if pkt is None:
                    f = flows[a]
                    pkt = Packet(self._pkt_id, a, f.src, f.dst, f.packet_size, t)
                    self._pkt_id += 1
                    if f.arrival_model == POISSON:
                        nxt = t + self._expo() * f.mean_interval
                    else:
                        nxt = t + f.mean_interval
                    if f.stop is None or nxt < f.stop:
                        self._push(nxt, _GEN, a, None)
                self.injected += 1
                m.injected += 1
                m.tx_bytes[pkt.src, pkt.dst] += pkt.size
                node = pkt.src
            else:
                node = a
            if node == pkt.dst:
                pkt.delivered_at = t
                m.delivered += 1
                m.sum_delay += float(t - pkt.created_at)
                self.delivered += 1
                if trace is not None:
                    trace.append(pkt)
                continue

            hop = table[(node, pkt.dst)]
            if hop is None:
                m.dropped += 1
                self.dropped += 1
                continue
            if type(hop) is not int:
                lids, cum = hop
                u = uniform()
                k = 0
                while u >= cum[k]:
                    k += 1
                hop = lids[k]
            link = links[hop]
            if enqueue(link, pkt, t) == DROPPED:
                m.dropped += 1
                self.dropped += 1
                continue
            pkt.hops += 1
            heappush(heap, (pkt.departs_at + link.prop_delay, self._seq, _HOP, link.dst, pkt))
            self._seq += 1

        self.now = end
        self.slot_index += 1
        if self.audit:
            c = self.census()
            if c["injected"] != c["delivered"] + c["dropped"] + c["queued"] + c["in_flight"]:
                raise AssertionError(f"packet conservation violated at t={end}: {c}")
        return m

    def census(self) -> dict:
        """Packet accounting at the current clock: where every injected packet is."""
        queued = in_flight = 0
        for t, _, kind, _, pkt in self._heap:
            if kind != _HOP:
                continue
            if pkt.departs_at > self.now:
                queued += 1
            else:
                in_flight += 1
        return dict(injected=self.injected, delivered=self.delivered, dropped=self.dropped,
                    queued=queued, in_flight=in_flight)
