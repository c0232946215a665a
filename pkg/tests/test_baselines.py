from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cogroute.baselines import (FixedPolicy, OspfPolicy, RandomPolicy, ospf_weights,
                                random_weights)
from cogroute.topology import SINGLE_PATH, W_MIN, Topology, build_routing_state


def hop_counts(topo, dest):
    """BFS over reversed links."""
    dist = {dest: 0}
    todo = deque([dest])
    while todo:
        v = todo.popleft()
        for lid in topo.incoming[v]:
            u = topo.links[lid].src
            if u not in dist:
                dist[u] = dist[v] + 1
                todo.append(u)
    return dist


def test_ospf_uniform_bandwidth(diamond):
    assert np.array_equal(ospf_weights(diamond, 5e6), np.ones(10))
    assert np.array_equal(ospf_weights(diamond), np.ones(10))


def test_ospf_mixed_bandwidth():
    topo = Topology(3, [dict(src=0, dst=1, bandwidth=1e7), dict(src=1, dst=2, bandwidth=5e6)])
    assert ospf_weights(topo, 1e7).tolist() == [1.0, 2.0]


def test_ospf_reference_below_fastest_link(diamond):
    with pytest.raises(ValueError):
        ospf_weights(diamond, 1e6)


def test_ospf_routes_source_direct(diamond):
    rs = build_routing_state(diamond, ospf_weights(diamond), SINGLE_PATH)
    assert rs.next_links(0, 3) == [(diamond.link_id(0, 3), 1.0)]


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 7).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1]),
             min_size=1, max_size=n * (n - 1), unique=True))))
def test_ospf_is_min_hop_on_uniform_links(graph):
    n, pairs = graph
    topo = Topology(n, pairs)
    rs = build_routing_state(topo, ospf_weights(topo), SINGLE_PATH)
    for dest in topo.nodes:
        hops = hop_counts(topo, dest)
        for v in topo.nodes:
            assert rs.dist[(v, dest)] == hops.get(v, np.inf)


def test_random_weights_in_range(rng, diamond):
    w = np.stack([random_weights(diamond, rng) for _ in range(10_000)])
    assert w.min() >= W_MIN and w.max() <= 10.0
    assert w.mean(axis=0) == pytest.approx(np.full(10, (W_MIN + 10.0) / 2), rel=0.02)


def test_random_policy_reproducible(diamond):
    def seq(seed):
        p = RandomPolicy(diamond, seed)
        out = []
        for ep in range(2):
            p.reset(ep)
            out.extend(p(None) for _ in range(5))
        return np.array(out)

    assert np.array_equal(seq(3), seq(3))
    assert not np.array_equal(seq(3), seq(4))
    s = seq(3)
    assert not np.array_equal(s[0], s[1])  # resampled every step
    assert not np.array_equal(s[0], s[5])  # new episode stream


def test_random_policy_held_per_episode(diamond):
    p = RandomPolicy(diamond, 1, resample_every_step=False)
    p.reset(0)
    first = p(None)
    assert all(np.array_equal(first, p(None)) for _ in range(5))


def test_policies_are_pure(diamond):
    ospf = OspfPolicy(diamond)
    a = ospf(np.zeros(16))
    a[:] = 99.0
    assert np.array_equal(ospf(np.ones(16)), np.ones(10))
    fixed = FixedPolicy(np.arange(1.0, 11.0))
    fixed(None)[0] = -1
    assert fixed(None)[0] == 1.0
    assert ospf.mode == SINGLE_PATH and fixed.mode is None
