"""Episodic RL wrapper around the simulator.

State is the flattened traffic matrix of the last slot, the action is one
weight per directed link, and the reward is minus the mean delivery delay of
the slot in milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .seeding import TRAFFIC, stream
from .simkernel import FlowSpec, Simulator, SlotMetrics
from .topology import FORWARDING_MODES, W_MIN, WEIGHTED_MULTIPATH, Topology, build_routing_state


@dataclass(frozen=True)
class EnvConfig:
    slot_duration: float = 0.1
    steps_per_episode: int = 100
    state_normalizer: Optional[float] = None  # None: bytes the fastest link carries in one slot
    forwarding_mode: str = WEIGHTED_MULTIPATH
    seed: int = 0
    a_bound: float = 10.0
    delay_penalty: float = 100.0

    def __post_init__(self):
        if not self.slot_duration > 0:
            raise ValueError("slot_duration must be > 0")
        if self.steps_per_episode < 1:
            raise ValueError("steps_per_episode must be >= 1")
        if self.state_normalizer is not None and not self.state_normalizer > 0:
            raise ValueError("state_normalizer must be > 0")
        if self.forwarding_mode not in FORWARDING_MODES:
            raise ValueError(f"forwarding_mode must be one of {FORWARDING_MODES}")
        if not self.a_bound > W_MIN:
            raise ValueError(f"a_bound must exceed w_min={W_MIN}")


@dataclass
class StepResult:
    reward: float
    next_state: np.ndarray
    metrics: SlotMetrics
    weights: np.ndarray


def clamp_weights(action, a_bound: float) -> np.ndarray:
    return np.clip(np.asarray(action, dtype=np.float64), W_MIN, a_bound)


class RoutingEnv:
    def __init__(self, topology: Topology, flows: Sequence[FlowSpec], config: EnvConfig = EnvConfig()):
        self.topology = topology
        self.flows = list(flows)
        self.config = config
        if config.state_normalizer is None:
            self.state_normalizer = config.slot_duration * topology.max_bandwidth() / 8
        else:
            self.state_normalizer = float(config.state_normalizer)
        self.state_dim = topology.num_nodes ** 2
        self.action_dim = topology.num_links
        self.episode = -1
        self.steps_taken = 0
        self.sim: Optional[Simulator] = None
        self.last_metrics: Optional[SlotMetrics] = None

    def encode(self, metrics: SlotMetrics) -> np.ndarray:
        return metrics.tx_bytes.reshape(-1).astype(np.float64) / self.state_normalizer

    def reward_of(self, metrics: SlotMetrics) -> float:
        if metrics.delivered == 0:
            return -float(self.config.delay_penalty)
        return -float(metrics.sum_delay / metrics.delivered) * 1e3

    def reset(self, episode: Optional[int] = None) -> np.ndarray:
        """Start a fresh episode; `episode` defaults to the next index."""
        self.episode = self.episode + 1 if episode is None else int(episode)
        rng = stream(self.config.seed, TRAFFIC, self.episode)
        self.sim = Simulator(self.topology, self.flows, rng)
        self.steps_taken = 0
        routing = build_routing_state(self.topology, np.ones(self.action_dim),
                                      self.config.forwarding_mode)
        self.last_metrics = self.sim.run_slot(routing, self.config.slot_duration)
        return self.encode(self.last_metrics)

    def step(self, action) -> StepResult:
        if self.sim is None:
            raise RuntimeError("call reset() before step()")
        if self.steps_taken >= self.config.steps_per_episode:
            raise RuntimeError("episode exhausted; call reset()")
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (self.action_dim,):
            raise ValueError(f"action must have length {self.action_dim}, got shape {a.shape}")
        if np.isnan(a).any():
            raise ValueError("action contains NaN")
        w = clamp_weights(a, self.config.a_bound)
        routing = build_routing_state(self.topology, w, self.config.forwarding_mode)
        m = self.sim.run_slot(routing, self.config.slot_duration)
        self.steps_taken += 1
        self.last_metrics = m
        return StepResult(self.reward_of(m), self.encode(m), m, w)
