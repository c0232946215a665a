"""Network graph and the mapping from link weights to forwarding state."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

W_MIN = 1e-3

SINGLE_PATH = "single_path"
WEIGHTED_MULTIPATH = "weighted_multipath"
FORWARDING_MODES = (SINGLE_PATH, WEIGHTED_MULTIPATH)

# relative slack used when comparing path costs built from float sums
_TIE_RTOL = 1e-9


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class DirectedLink:
    id: int
    src: int
    dst: int
    bandwidth: float
    prop_delay: float = 0.0
    queue_capacity: int = 100

    def __post_init__(self):
        if self.src == self.dst:
            raise TopologyError(f"self-loop link at node {self.src}")
        if not self.bandwidth > 0:
            raise TopologyError(f"link {self.src}->{self.dst}: bandwidth must be > 0")
        if self.prop_delay < 0:
            raise TopologyError(f"link {self.src}->{self.dst}: prop_delay must be >= 0")
        if self.queue_capacity < 1:
            raise TopologyError(f"link {self.src}->{self.dst}: queue_capacity must be >= 1")


class Topology:
    """Directed graph with dense node ids and links in canonical (src, dst) order.

    The canonical link order is also the layout of every weight vector.
    """

    def __init__(self, num_nodes: int, links: Iterable[dict | tuple]):
        if num_nodes < 1:
            raise TopologyError("topology needs at least one node")
        self.num_nodes = int(num_nodes)
        self.nodes = list(range(self.num_nodes))

        specs = []
        seen = set()
        for spec in links:
            if not isinstance(spec, dict):
                src, dst = spec[0], spec[1]
                spec = {"src": src, "dst": dst}
            src, dst = int(spec["src"]), int(spec["dst"])
            for end in (src, dst):
                if not 0 <= end < self.num_nodes:
                    raise TopologyError(
                        f"link {src}->{dst} references node {end} outside 0..{self.num_nodes - 1}"
                    )
            if (src, dst) in seen:
                raise TopologyError(f"duplicate link {src}->{dst}")
            seen.add((src, dst))
            specs.append(dict(spec, src=src, dst=dst))
        specs.sort(key=lambda s: (s["src"], s["dst"]))

        self.links: list[DirectedLink] = []
        for i, s in enumerate(specs):
            self.links.append(
                DirectedLink(
                    id=i,
                    src=s["src"],
                    dst=s["dst"],
                    bandwidth=float(s.get("bandwidth", 5e6)),
                    prop_delay=float(s.get("prop_delay", 0.0)),
                    queue_capacity=int(s.get("queue_capacity", 100)),
                )
            )
        self.adjacency: dict[int, list[int]] = {v: [] for v in self.nodes}
        self.incoming: dict[int, list[int]] = {v: [] for v in self.nodes}
        for link in self.links:
            self.adjacency[link.src].append(link.id)
            self.incoming[link.dst].append(link.id)
        self._index = {(l.src, l.dst): l.id for l in self.links}

    @property
    def num_links(self) -> int:
        return len(self.links)

    def link_id(self, src: int, dst: int) -> int:
        return self._index[(src, dst)]

    def has_link(self, src: int, dst: int) -> bool:
        return (src, dst) in self._index

    def max_bandwidth(self) -> float:
        return max((l.bandwidth for l in self.links), default=0.0)

    def __repr__(self):
        return f"Topology(nodes={self.num_nodes}, links={[(l.src, l.dst) for l in self.links]})"


def diamond_with_chord(bandwidth=5e6, prop_delay=0.0, queue_capacity=100) -> Topology:
    """Four routers, v1..v4 as ids 0..3: a square v1-v2-v4-v3 plus the chord v1-v4.

    Every edge is full duplex, giving 10 directed links.
    """
    pairs = [(0, 1), (0, 2), (1, 3), (2, 3), (0, 3)]
    links = []
    for a, b in pairs:
        for s, d in ((a, b), (b, a)):
            links.append(
                dict(src=s, dst=d, bandwidth=bandwidth, prop_delay=prop_delay,
                     queue_capacity=queue_capacity)
            )
    return Topology(4, links)


def check_weights(topology: Topology, weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (topology.num_links,):
        raise TopologyError(f"expected {topology.num_links} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise TopologyError("link weights must be finite and positive")
    return w


def _tie(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= _TIE_RTOL * max(abs(a), abs(b))


def dijkstra(topology: Topology, weights, destination: int) -> dict[int, tuple[float, frozenset]]:
    """Shortest-path cost from every node to `destination`.

    Returns node -> (cost, cost-minimal outgoing link ids). Unreachable nodes
    get (inf, frozenset()); the destination itself gets (0.0, frozenset()).
    """
    if not 0 <= destination < topology.num_nodes:
        raise TopologyError(f"destination {destination} out of range")
    w = check_weights(topology, weights)

    dist = [math.inf] * topology.num_nodes
    dist[destination] = 0.0
    done = [False] * topology.num_nodes
    heap = [(0.0, destination)]
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for lid in topology.incoming[v]:
            u = topology.links[lid].src
            nd = d + float(w[lid])
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))

    out = {}
    for v in topology.nodes:
        if v == destination or math.isinf(dist[v]):
            out[v] = (dist[v], frozenset())
            continue
        best = frozenset(
            lid for lid in topology.adjacency[v]
            if _tie(w[lid] + dist[topology.links[lid].dst], dist[v])
        )
        out[v] = (dist[v], best)
    return out


@dataclass
class RoutingState:
    """Per (node, destination) path cost and next-hop distribution.

    next_hop_dist[(v, d)] is a list of (link id, probability); empty at the
    destination or when d is unreachable from v.
    """

    mode: str
    dist: dict = field(default_factory=dict)
    next_hop_dist: dict = field(default_factory=dict)

    def next_links(self, node: int, destination: int) -> list[tuple[int, float]]:
        return self.next_hop_dist[(node, destination)]


def build_routing_state(topology: Topology, weights, mode: str = SINGLE_PATH) -> RoutingState:
    if mode not in FORWARDING_MODES:
        raise TopologyError(f"unknown forwarding mode {mode!r}")
    w = check_weights(topology, weights)
    state = RoutingState(mode=mode)
    for dest in topology.nodes:
        sp = dijkstra(topology, w, dest)
        for v in topology.nodes:
            cost, ties = sp[v]
            state.dist[(v, dest)] = cost
            if v == dest or math.isinf(cost):
                state.next_hop_dist[(v, dest)] = []
                continue
            if mode == SINGLE_PATH:
                lid = min(ties, key=lambda i: (topology.links[i].dst, i))
                state.next_hop_dist[(v, dest)] = [(lid, 1.0)]
                continue
            cands = []
            for lid in topology.adjacency[v]:
                j = topology.links[lid].dst
                dj = sp[j][0]
                # strict decrease beyond float slack keeps the forwarding graph acyclic
                if dj < cost and not _tie(dj, cost):
                    cands.append((lid, 1.0 / (float(w[lid]) + dj)))
            total = sum(s for _, s in cands)
            state.next_hop_dist[(v, dest)] = [(lid, s / total) for lid, s in cands]
    return state
