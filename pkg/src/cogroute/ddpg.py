"""DDPG agent: actor/critic with target copies, replay, OU exploration."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import nn
from .env import clamp_weights
from .nn import IDENTITY, RELU, SOFTMAX, AdamState, DenseNet
from .seeding import INIT, NOISE, REPLAY, stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DdpgConfig:
    gamma: float = 0.9
    tau: float = 0.01
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    replay_capacity: int = 100
    replay_threshold: int = 64
    batch_size: int = 32
    a_bound: float = 10.0
    ou_mu: float = 0.0
    ou_theta: float = 0.1
    ou_sigma: float = 0.15
    actor_hidden: tuple = (64, 32)
    critic_hidden: tuple = (64,)

    def __post_init__(self):
        object.__setattr__(self, "actor_hidden", tuple(int(x) for x in self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(int(x) for x in self.critic_hidden))
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 1 <= self.batch_size <= self.replay_threshold <= self.replay_capacity:
            raise ValueError("need 1 <= batch_size <= replay_threshold <= replay_capacity")
        if not self.a_bound > 0:
            raise ValueError("a_bound must be > 0")


class ReplayBuffer:
    """Fixed-capacity ring of transitions; oldest entry evicted first."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.pushed = 0

    def __len__(self):
        return min(self.pushed, self.capacity)

    def push(self, state, action, reward, next_state):
        if not np.isfinite(reward):
            raise ValueError("reward must be finite")
        i = self.pushed % self.capacity
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.pushed += 1

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform draw with replacement; returns (s, a, r, s') arrays."""
        if len(self) == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self), size=batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])


class OuNoise:
    def __init__(self, size: int, mu=0.0, theta=0.1, sigma=0.15):
        self.size = size
        self.mu = mu
        self.theta = theta
        self.sigma = sigma
        self.reset()

    def reset(self):
        self.current = np.zeros(self.size)

    def step(self, rng: np.random.Generator) -> np.ndarray:
        xi = rng.standard_normal(self.size)
        self.current = self.current + self.theta * (self.mu - self.current) + self.sigma * xi
        return self.current


def ou_step(noise: OuNoise, rng: np.random.Generator) -> np.ndarray:
    return noise.step(rng)


def select_action(actor: DenseNet, state, a_bound: float, noise: Optional[OuNoise] = None,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """a_bound * softmax(actor(state)), plus one OU step when noise is given."""
    a = a_bound * actor(state)
    if noise is not None:
        a = a + noise.step(rng)
    return a


class DdpgAgent:
    def __init__(self, state_dim: int, action_dim: int, config: DdpgConfig = DdpgConfig(),
                 seed: int = 0):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.config = config
        self.seed = seed
        init_rng = stream(seed, INIT)
        self.actor = DenseNet.build(
            [state_dim, *config.actor_hidden, action_dim],
            [RELU] * len(config.actor_hidden) + [SOFTMAX],
            init_rng, final_init=3e-3)
        self.critic = DenseNet.build(
            [state_dim + action_dim, *config.critic_hidden, 1],
            [RELU] * len(config.critic_hidden) + [IDENTITY],
            init_rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_adam = AdamState.for_net(self.actor, config.actor_lr)
        self.critic_adam = AdamState.for_net(self.critic, config.critic_lr)
        self.buffer = ReplayBuffer(config.replay_capacity, state_dim, action_dim)
        self.noise = OuNoise(action_dim, config.ou_mu, config.ou_theta, config.ou_sigma)
        self.noise_rng = stream(seed, NOISE)
        self.replay_rng = stream(seed, REPLAY)
        self.updates = 0

    def act(self, state, explore: bool = True) -> np.ndarray:
        if explore:
            return select_action(self.actor, state, self.config.a_bound, self.noise, self.noise_rng)
        return select_action(self.actor, state, self.config.a_bound)

    def ready(self) -> bool:
        return len(self.buffer) > self.config.replay_threshold

    def td_targets(self, rewards, next_states) -> np.ndarray:
        """y = r + gamma * Q_target(s', mu_target(s')); touches target networks only."""
        a_next = self.config.a_bound * self.actor_target(next_states)
        q_next = self.critic_target(np.concatenate([next_states, a_next], axis=1))[:, 0]
        return rewards + self.config.gamma * q_next

    def critic_update(self, states, actions, targets) -> float:
        q, tape = nn.forward(self.critic, np.concatenate([states, actions], axis=1))
        err = q[:, 0] - targets
        loss = float(np.mean(err ** 2))
        grads, _ = nn.backward(self.critic, tape, (2.0 / len(err)) * err[:, None])
        nn.adam_step(self.critic, grads, self.critic_adam)
        return loss

    def actor_update(self, states) -> float:
        bound = self.config.a_bound
        probs, actor_tape = nn.forward(self.actor, states)
        q, critic_tape = nn.forward(self.critic, np.concatenate([states, bound * probs], axis=1))
        n = len(states)
        # minimise L_a = -mean Q(s, mu(s))
        _, dq_dinput = nn.backward(self.critic, critic_tape, np.full((n, 1), -1.0 / n))
        dq_da = dq_dinput[:, self.state_dim:]
        grads, _ = nn.backward(self.actor, actor_tape, bound * dq_da)
        nn.adam_step(self.actor, grads, self.actor_adam)
        return float(-q.mean())

    def train_step(self, batch) -> tuple[float, float]:
        s, a, r, s2 = batch
        y = self.td_targets(r, s2)
        critic_loss = self.critic_update(s, a, y)
        actor_loss = self.actor_update(s)
        nn.soft_update(self.critic_target, self.critic, self.config.tau)
        nn.soft_update(self.actor_target, self.actor, self.config.tau)
        self.updates += 1
        return critic_loss, actor_loss

    def observe(self, state, action, reward, next_state) -> Optional[tuple[float, float]]:
        """Store a transition and train once if the buffer is past the threshold."""
        self.buffer.push(state, action, reward, next_state)
        if not self.ready():
            return None
        return self.train_step(self.buffer.sample(self.config.batch_size, self.replay_rng))

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in ("actor", "critic", "actor_target", "critic_target"):
            nn.save(getattr(self, name), d / f"{name}.net")
        for name in ("actor_adam", "critic_adam"):
            st = getattr(self, name)
            arrays = {f"m{i}": m for i, m in enumerate(st.m)}
            arrays.update({f"v{i}": v for i, v in enumerate(st.v)})
            np.savez(d / f"{name}.npz", step=st.step, **arrays)
        meta = dict(state_dim=self.state_dim, action_dim=self.action_dim, seed=self.seed,
                    updates=self.updates, config=asdict(self.config))
        (d / "agent.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return d

    @classmethod
    def load(cls, directory) -> "DdpgAgent":
        d = Path(directory)
        meta = json.loads((d / "agent.json").read_text())
        agent = cls(meta["state_dim"], meta["action_dim"], DdpgConfig(**meta["config"]), meta["seed"])
        for name in ("actor", "critic", "actor_target", "critic_target"):
            setattr(agent, name, nn.load(d / f"{name}.net"))
        for name, lr in (("actor_adam", agent.config.actor_lr), ("critic_adam", agent.config.critic_lr)):
            with np.load(d / f"{name}.npz") as z:
                k = (len(z.files) - 1) // 2
                st = AdamState([z[f"m{i}"].copy() for i in range(k)],
                               [z[f"v{i}"].copy() for i in range(k)], lr, step=int(z["step"]))
            setattr(agent, name, st)
        agent.updates = meta["updates"]
        return agent


def train(env, agent: DdpgAgent, episodes: int,
          on_step: Optional[Callable[[dict], None]] = None,
          on_checkpoint: Optional[Callable[[int], None]] = None,
          checkpoint_every: int = 0) -> list[dict]:
    """Run the full training loop; returns one record per environment step."""
    records = []
    step = 0
    bound = agent.config.a_bound
    for episode in range(episodes):
        state = env.reset(episode)
        agent.noise.reset()
        for _ in range(env.config.steps_per_episode):
            step += 1
            action = clamp_weights(agent.act(state), bound)
            res = env.step(action)
            losses = agent.observe(state, action, res.reward, res.next_state)
            m = res.metrics
            rec = dict(
                step=step,
                episode=episode,
                reward=res.reward,
                critic_loss=None if losses is None else losses[0],
                actor_loss=None if losses is None else losses[1],
                mean_delay_ms=None if m.mean_delay is None else m.mean_delay * 1e3,
                delivered=m.delivered,
                dropped=m.dropped,
            )
            records.append(rec)
            if on_step is not None:
                on_step(rec)
            if on_checkpoint is not None and checkpoint_every and step % checkpoint_every == 0:
                on_checkpoint(step)
            state = res.next_state
        log.info("episode %d done: step %d, reward %.3f", episode, step, rec["reward"])
    return records
