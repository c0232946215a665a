"""Train / evaluate / compare runs and the files they leave behind."""

from __future__ import annotations

import dataclasses
import io
import logging
import platform
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .baselines import ActorPolicy, OspfPolicy, RandomPolicy
from .config import ExperimentConfig
from .ddpg import DdpgAgent, train
from .env import RoutingEnv

log = logging.getLogger(__name__)

METRICS_FIELDS = ("step", "episode", "reward", "critic_loss", "actor_loss", "mean_delay_ms",
                  "delivered", "dropped")
COMPARE_FIELDS = ("policy", "mean_delay_ms", "stddev", "drop_rate")


class CheckpointError(ValueError):
    pass


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_row(rec: dict, fields=METRICS_FIELDS) -> str:
    return ",".join(_cell(rec[k]) for k in fields)


def make_env(cfg: ExperimentConfig, seed: Optional[int] = None, mode: Optional[str] = None) -> RoutingEnv:
    env_cfg = cfg.env
    if seed is not None:
        env_cfg = dataclasses.replace(env_cfg, seed=seed)
    if mode is not None:
        env_cfg = dataclasses.replace(env_cfg, forwarding_mode=mode)
    return RoutingEnv(cfg.topology, cfg.flows, env_cfg)


def make_agent(cfg: ExperimentConfig) -> DdpgAgent:
    return DdpgAgent(cfg.state_dim, cfg.action_dim, cfg.ddpg, seed=cfg.run.seed)


def manifest(cfg: ExperimentConfig) -> dict:
    return {
        "version": __version__,
        "seed": cfg.run.seed,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.to_dict(),
    }


def _prepare_out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def run_train(cfg: ExperimentConfig) -> list[dict]:
    """Train per config; writes metrics.csv, manifest.yaml and checkpoints/ under run.out_dir."""
    out = _prepare_out_dir(cfg.run.out_dir)
    (out / "manifest.yaml").write_text(yaml.safe_dump(manifest(cfg), sort_keys=False))
    env = make_env(cfg)
    agent = make_agent(cfg)
    ckpt_root = out / "checkpoints"

    with open(out / "metrics.csv", "w", newline="") as fh:
        fh.write(",".join(METRICS_FIELDS) + "\n")

        def on_step(rec):
            fh.write(format_row(rec) + "\n")

        def on_checkpoint(step):
            agent.save(ckpt_root / f"step_{step:07d}")

        records = train(env, agent, cfg.run.episodes, on_step=on_step,
                        on_checkpoint=on_checkpoint, checkpoint_every=cfg.run.checkpoint_every)
    agent.save(ckpt_root / "final")
    log.info("trained %d steps, %d updates -> %s", len(records), agent.updates, out)
    return records


def resolve_checkpoint(path) -> Path:
    p = Path(path)
    if (p / "agent.json").is_file():
        return p
    if (p / "checkpoints" / "final" / "agent.json").is_file():
        return p / "checkpoints" / "final"
    raise CheckpointError(f"no checkpoint found at {p}")


def load_agent(cfg: ExperimentConfig, checkpoint) -> DdpgAgent:
    agent = DdpgAgent.load(resolve_checkpoint(checkpoint))
    for name, expected in (("state_dim", cfg.state_dim), ("action_dim", cfg.action_dim)):
        found = getattr(agent, name)
        if found != expected:
            raise CheckpointError(f"checkpoint {name} is {found}, config expects {expected}")
    return agent


def rollout(cfg: ExperimentConfig, policy, seed: int, episodes: Optional[int] = None) -> dict:
    """Run `policy` greedily for eval episodes; collects per-slot mean delays (ms)."""
    env = make_env(cfg, seed=seed, mode=policy.mode)
    slot_delays = []
    injected = dropped = 0
    for ep in range(cfg.run.eval_episodes if episodes is None else episodes):
        state = env.reset(ep)
        policy.reset(ep)
        for _ in range(env.config.steps_per_episode):
            res = env.step(policy(state))
            m = res.metrics
            if m.mean_delay is not None:
                slot_delays.append(m.mean_delay * 1e3)
            injected += m.injected
            dropped += m.dropped
            state = res.next_state
    return {"slot_delays": slot_delays, "injected": injected, "dropped": dropped}


def summarize(name: str, rollouts: list[dict]) -> dict:
    delays = [d for r in rollouts for d in r["slot_delays"]]
    injected = sum(r["injected"] for r in rollouts)
    dropped = sum(r["dropped"] for r in rollouts)
    return {
        "policy": name,
        "mean_delay_ms": float(np.mean(delays)) if delays else None,
        "stddev": float(np.std(delays)) if delays else None,
        "drop_rate": dropped / injected if injected else 0.0,
    }


def eval_seeds(cfg: ExperimentConfig, seed: Optional[int] = None) -> list[int]:
    return [seed] if seed is not None else list(cfg.run.eval_seeds)


def run_eval(cfg: ExperimentConfig, checkpoint, seed: Optional[int] = None) -> dict:
    policy = ActorPolicy(load_agent(cfg, checkpoint))
    return summarize("ddpg", [rollout(cfg, policy, s) for s in eval_seeds(cfg, seed)])


def policies(cfg: ExperimentConfig, agent: DdpgAgent, random_seed: int) -> list:
    return [
        ActorPolicy(agent),
        OspfPolicy(cfg.topology, cfg.baselines.reference_bandwidth),
        RandomPolicy(cfg.topology, random_seed, cfg.ddpg.a_bound,
                     cfg.baselines.random_resample_every_step),
    ]


def run_compare(cfg: ExperimentConfig, checkpoint, seed: Optional[int] = None) -> tuple[list, list]:
    """Evaluate ddpg, ospf and random on identical traffic seeds.

    Returns (summary rows, per-seed rows).
    """
    agent = load_agent(cfg, checkpoint)
    seeds = eval_seeds(cfg, seed)
    per_policy = {}
    per_seed = []
    for s in seeds:
        for pol in policies(cfg, agent, s):
            r = rollout(cfg, pol, s)
            per_policy.setdefault(pol.name, []).append(r)
            row = summarize(pol.name, [r])
            row["seed"] = s
            per_seed.append(row)
    rows = [summarize(name, rs) for name, rs in per_policy.items()]
    return rows, per_seed


def format_table(rows: list[dict]) -> str:
    head = ("policy", "mean_delay_ms", "stddev", "drop_rate")
    cells = [head]
    for r in rows:
        cells.append((
            r["policy"],
            "-" if r["mean_delay_ms"] is None else f"{r['mean_delay_ms']:.4f}",
            "-" if r["stddev"] is None else f"{r['stddev']:.4f}",
            f"{r['drop_rate']:.6f}",
        ))
    widths = [max(len(c[i]) for c in cells) for i in range(len(head))]
    lines = []
    for k, c in enumerate(cells):
        lines.append("  ".join(c[i].ljust(widths[i]) if i == 0 else c[i].rjust(widths[i])
                               for i in range(len(head))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def rows_to_csv(rows: list[dict], fields=COMPARE_FIELDS) -> str:
    buf = io.StringIO()
    buf.write(",".join(fields) + "\n")
    for r in rows:
        buf.write(format_row(r, fields) + "\n")
    return buf.getvalue()
