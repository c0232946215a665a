"""Experiment configuration: YAML in, validated dataclasses out."""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .ddpg import DdpgConfig
from .env import EnvConfig
from .simkernel import FlowSpec
from .topology import Topology, TopologyError


class ConfigError(ValueError):
    pass


class _Loader(yaml.SafeLoader):
    pass


# accept 1e-4 / 5e6 as floats (YAML 1.1 insists on a dot and a signed exponent)
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*)?(?:\.[0-9_]*)?(?:[eE][-+]?[0-9]+)$
               |^[-+]?(?:[0-9][0-9_]*)\.[0-9_]*$
               |^[-+]?\.[0-9_]+$
               |^[-+]?\.(?:inf|Inf|INF)$
               |^\.(?:nan|NaN|NAN)$""", re.X),
    list("-+0123456789."),
)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    episodes: int = 100
    eval_episodes: int = 3
    eval_seeds: tuple = (101, 102, 103, 104, 105)
    checkpoint_every: int = 0
    out_dir: str = "runs/default"


@dataclass(frozen=True)
class BaselineConfig:
    reference_bandwidth: Optional[float] = None
    random_resample_every_step: bool = True


@dataclass
class ExperimentConfig:
    topology: Topology
    flows: list
    env: EnvConfig
    ddpg: DdpgConfig
    run: RunConfig
    baselines: BaselineConfig
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def state_dim(self) -> int:
        return self.topology.num_nodes ** 2

    @property
    def action_dim(self) -> int:
        return self.topology.num_links

    def to_dict(self) -> dict:
        """Fully defaulted config, loadable again by `load_config`."""
        return self.raw

    def with_overrides(self, seed=None, out_dir=None, steps=None, episodes=None) -> "ExperimentConfig":
        raw = yaml.load(yaml.safe_dump(self.raw), Loader=_Loader)
        if seed is not None:
            raw["run"]["seed"] = int(seed)
        if out_dir is not None:
            raw["run"]["out_dir"] = str(out_dir)
        if steps is not None:
            raw["env"]["steps_per_episode"] = int(steps)
        if episodes is not None:
            raw["run"]["episodes"] = int(episodes)
        return from_dict(raw)


_TOP_KEYS = {"topology", "flows", "env", "ddpg", "run", "baselines"}
_TOPO_KEYS = {"nodes", "links", "duplex", "bandwidth", "prop_delay", "queue_capacity"}
_LINK_KEYS = {"src", "dst", "bandwidth", "prop_delay", "queue_capacity"}
_FLOW_KEYS = {f.name for f in dataclasses.fields(FlowSpec)}
_ENV_KEYS = {"slot_duration", "steps_per_episode", "state_normalizer", "forwarding_mode",
             "delay_penalty"}


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected a mapping")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key '{where}.{key}'" if where else f"unknown key '{key}'")


def _build(cls, values: dict, where: str):
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def from_dict(data: dict) -> ExperimentConfig:
    if data is None:
        data = {}
    if "config" in data and "version" in data:
        data = data["config"]  # a run manifest
    _check_keys(data, _TOP_KEYS, "")

    topo = dict(data.get("topology") or {})
    _check_keys(topo, _TOPO_KEYS, "topology")
    if "nodes" not in topo or "links" not in topo:
        raise ConfigError("topology: 'nodes' and 'links' are required")
    topo.setdefault("duplex", False)
    topo.setdefault("bandwidth", 5e6)
    topo.setdefault("prop_delay", 0.0)
    topo.setdefault("queue_capacity", 100)
    n = int(topo["nodes"])
    links = []
    for i, spec in enumerate(topo["links"]):
        where = f"topology.links[{i}]"
        if isinstance(spec, dict):
            _check_keys(spec, _LINK_KEYS, where)
            if "src" not in spec or "dst" not in spec:
                raise ConfigError(f"{where}: needs 'src' and 'dst'")
            link = dict(spec)
        else:
            if len(spec) != 2:
                raise ConfigError(f"{where}: expected [src, dst]")
            link = {"src": spec[0], "dst": spec[1]}
        for key in ("bandwidth", "prop_delay", "queue_capacity"):
            link.setdefault(key, topo[key])
        for end in (link["src"], link["dst"]):
            if not 0 <= int(end) < n:
                raise ConfigError(f"{where}: node {end} does not exist in a {n}-node topology")
        links.append(link)
        if topo["duplex"]:
            links.append(dict(link, src=link["dst"], dst=link["src"]))
    try:
        topology = Topology(n, links)
    except TopologyError as exc:
        raise ConfigError(f"topology: {exc}") from None

    flows = []
    for i, spec in enumerate(data.get("flows") or []):
        where = f"flows[{i}]"
        _check_keys(spec, _FLOW_KEYS, where)
        spec = dict(spec)
        if spec.get("stop") is not None and math.isinf(float(spec["stop"])):
            spec["stop"] = None
        flow = _build(FlowSpec, spec, where)
        for end in (flow.src, flow.dst):
            if not 0 <= end < n:
                raise ConfigError(f"{where}: node {end} does not exist in a {n}-node topology")
        flows.append(flow)

    ddpg_raw = dict(data.get("ddpg") or {})
    _check_keys(ddpg_raw, {f.name for f in dataclasses.fields(DdpgConfig)}, "ddpg")
    ddpg = _build(DdpgConfig, ddpg_raw, "ddpg")

    run_raw = dict(data.get("run") or {})
    _check_keys(run_raw, {f.name for f in dataclasses.fields(RunConfig)}, "run")
    if "eval_seeds" in run_raw:
        run_raw["eval_seeds"] = tuple(int(s) for s in run_raw["eval_seeds"])
    run = _build(RunConfig, run_raw, "run")
    if run.seed < 0 or any(s < 0 for s in run.eval_seeds):
        raise ConfigError("run.seed: seeds must be non-negative integers")
    if run.episodes < 1:
        raise ConfigError("run.episodes: must be >= 1")

    env_raw = dict(data.get("env") or {})
    _check_keys(env_raw, _ENV_KEYS, "env")
    env = _build(EnvConfig, dict(env_raw, seed=run.seed, a_bound=ddpg.a_bound), "env")

    base_raw = dict(data.get("baselines") or {})
    _check_keys(base_raw, {f.name for f in dataclasses.fields(BaselineConfig)}, "baselines")
    baselines = _build(BaselineConfig, base_raw, "baselines")
    if (baselines.reference_bandwidth is not None
            and baselines.reference_bandwidth < topology.max_bandwidth()):
        raise ConfigError("baselines.reference_bandwidth: must be >= the fastest link bandwidth")

    env_echo = {k: getattr(env, k) for k in _ENV_KEYS}
    ddpg_echo = asdict(ddpg)
    ddpg_echo["actor_hidden"] = list(ddpg.actor_hidden)
    ddpg_echo["critic_hidden"] = list(ddpg.critic_hidden)
    run_echo = asdict(run)
    run_echo["eval_seeds"] = list(run.eval_seeds)
    raw = {
        "topology": {
            "nodes": n,
            "links": [{"src": l.src, "dst": l.dst, "bandwidth": l.bandwidth,
                       "prop_delay": l.prop_delay, "queue_capacity": l.queue_capacity}
                      for l in topology.links],
        },
        "flows": [asdict(f) for f in flows],
        "env": env_echo,
        "ddpg": ddpg_echo,
        "run": run_echo,
        "baselines": asdict(baselines),
    }
    return ExperimentConfig(topology, flows, env, ddpg, run, baselines, raw)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    with open(p) as fh:
        try:
            data = yaml.load(fh, Loader=_Loader)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{p}: not valid YAML ({exc})") from None
    return from_dict(data)


def bundled_config(name: str = "default") -> Path:
    """Path of a config shipped with the package ('default' or 'smoke')."""
    return Path(str(resources.files("cogroute") / "configs" / f"{name}.yaml"))
