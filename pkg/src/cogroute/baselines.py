"""Non-learning reference controllers and the policy wrappers used in evaluation.

A policy is called once per step with the current state and returns link
weights; `mode` says which forwarding mode it is evaluated under (None keeps
the environment's own).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .seeding import BASELINE, stream
from .topology import SINGLE_PATH, W_MIN, Topology


def ospf_weights(topology: Topology, reference_bandwidth: Optional[float] = None) -> np.ndarray:
    ref = topology.max_bandwidth() if reference_bandwidth is None else reference_bandwidth
    if ref < topology.max_bandwidth():
        raise ValueError("reference_bandwidth must be >= the fastest link bandwidth")
    return np.array([ref / l.bandwidth for l in topology.links])


def random_weights(topology: Topology, rng: np.random.Generator, a_bound: float = 10.0) -> np.ndarray:
    return rng.uniform(W_MIN, a_bound, size=topology.num_links)


class OspfPolicy:
    name = "ospf"

    def __init__(self, topology: Topology, reference_bandwidth: Optional[float] = None,
                 mode: str = SINGLE_PATH):
        self.weights = ospf_weights(topology, reference_bandwidth)
        self.mode = mode

    def reset(self, episode: int):
        pass

    def __call__(self, state):
        return self.weights.copy()


class RandomPolicy:
    name = "random"
    mode = None

    def __init__(self, topology: Topology, seed: int, a_bound: float = 10.0,
                 resample_every_step: bool = True):
        self.topology = topology
        self.seed = seed
        self.a_bound = a_bound
        self.resample_every_step = resample_every_step
        self.rng = None
        self.current = None

    def reset(self, episode: int):
        self.rng = stream(self.seed, BASELINE, episode)
        self.current = random_weights(self.topology, self.rng, self.a_bound)
        self._fresh = True

    def __call__(self, state):
        if self.resample_every_step and not self._fresh:
            self.current = random_weights(self.topology, self.rng, self.a_bound)
        self._fresh = False
        return self.current.copy()


class FixedPolicy:
    name = "fixed"

    def __init__(self, weights, mode: Optional[str] = None):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.mode = mode

    def reset(self, episode: int):
        pass

    def __call__(self, state):
        return self.weights.copy()


class ActorPolicy:
    """Greedy (noise-free) actor of a trained agent."""

    name = "ddpg"
    mode = None

    def __init__(self, agent):
        self.agent = agent

    def reset(self, episode: int):
        pass

    def __call__(self, state):
        return self.agent.act(state, explore=False)
