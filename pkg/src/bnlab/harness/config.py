"""Experiment configuration: loading, validation, materialized defaults, hashing.

A config file is a single YAML document.  Loading materializes every
default into the returned :class:`RunConfig`, so the copy written next to
the run outputs is fully self-describing — nothing about a result depends
on defaults that might change later.  The config hash is computed over the
canonical JSON form of everything except ``out_dir`` (where results land
does not change what was run).
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import yaml

from bnlab.agent import (
    AgentConfig,
    DdpgAgent,
    NoiseSchedule,
    TrainSettings,
    parse_target_strategy,
    resolve_mode_variant,
)
from bnlab.envs import LqrEnv, LqrSpec, MazeEnv, PendulumEnv, PendulumParams, \
    default_maze
from bnlab.errors import ConfigError

ENV_DEFAULTS = {
    "lqr": {
        "a": 1.0,
        "b": 1.0,
        "state_cost": 1.0,
        "action_cost": 1.0,
        "discount": 0.99,
        "horizon": 200,
        "action_limit": 1.0,
        "init_range": 1.0,
    },
    "maze": {
        "max_step": 0.05,
        "episode_cap": 300,
        "grid_resolution": 20,
        "goal_bonus": 10.0,
        "death_penalty": -10.0,
        "step_penalty": -0.01,
        "shaping_weight": 1.0,
    },
    "pendulum": {
        "gravity": 10.0,
        "mass": 1.0,
        "length": 1.0,
        "dt": 0.05,
        "max_torque": 2.0,
        "max_speed": 8.0,
        "horizon": 200,
    },
}

AGENT_DEFAULTS = {
    "hidden": [32, 32],
    "activation": "relu",
    "norm_pos": "post",
    "mode": "ETT/TT",
    "mix_ratio": None,
    "target_stats": None,
    "discount": None,  # resolved from the env section (lqr) or 0.99
    "tau": 0.01,
    "learning_rate": 1e-3,
    "optimizer": "adam",
    "noise": {
        "sigma_init": 1.0,
        "sigma_final": 0.1,
        "decay_steps": None,  # resolved to half of train.total_steps
        "clip_c": 0.3,
        "decaying": True,
    },
}

TRAIN_DEFAULTS = {
    "total_steps": None,  # required
    "warmup_steps": 1000,
    "batch_size": 256,
    "eval_every": 500,
    "eval_episodes": 5,
    "qbias_episodes": 2,
    "eval_discounted": None,  # resolved: True for lqr, False otherwise
    "buffer_capacity": 100_000,
}

TOP_LEVEL_KEYS = ("label", "env", "agent", "train", "seeds", "out_dir")


def _merge_section(section, user, defaults):
    """Overlay ``user`` onto ``defaults``, rejecting unknown keys."""
    user = dict(user or {})
    merged = {}
    for key, default in defaults.items():
        value = user.pop(key, default)
        if isinstance(default, dict) and value is not default:
            value = _merge_section(f"{section}.{key}", value, default)
        merged[key] = value
    if user:
        name = sorted(user)[0]
        raise ConfigError(f"{section}.{name}", "unknown field")
    return merged


@dataclass(frozen=True)
class RunConfig:
    """A fully materialized experiment description."""

    label: str
    env: dict
    agent: dict
    train: dict
    seeds: tuple
    out_dir: str

    @property
    def config_hash(self):
        payload = {
            "label": self.label,
            "env": self.env,
            "agent": self.agent,
            "train": self.train,
            "seeds": list(self.seeds),
        }
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]

    def to_mapping(self):
        return {
            "label": self.label,
            "env": dict(self.env),
            "agent": json.loads(json.dumps(self.agent)),
            "train": dict(self.train),
            "seeds": list(self.seeds),
            "out_dir": self.out_dir,
        }

    def build_env(self, rng):
        return build_env(self.env, rng)

    def build_agent(self, env, rng):
        a = self.agent
        mode = resolve_mode_variant(a["mode"], mix_ratio=a["mix_ratio"])
        target = a["target_stats"]
        cfg = AgentConfig(
            state_dim=env.observation_dim,
            action_dim=env.action_dim,
            action_limit=env.action_limit,
            hidden=tuple(a["hidden"]),
            activation=a["activation"],
            norm_pos=a["norm_pos"],
            mode=mode,
            target_stats=None if target is None else parse_target_strategy(target),
            discount=a["discount"],
            tau=a["tau"],
            learning_rate=a["learning_rate"],
            optimizer=a["optimizer"],
            noise=NoiseSchedule(**a["noise"]),
        )
        return DdpgAgent(cfg, rng)

    def train_settings(self):
        t = self.train
        return TrainSettings(
            total_steps=t["total_steps"],
            warmup_steps=t["warmup_steps"],
            batch_size=t["batch_size"],
            eval_every=t["eval_every"],
            eval_episodes=t["eval_episodes"],
            qbias_episodes=t["qbias_episodes"],
            eval_discounted=t["eval_discounted"],
        )

    @property
    def buffer_capacity(self):
        return self.train["buffer_capacity"]


def build_env(env_section, rng):
    kind = env_section["kind"]
    params = {k: v for k, v in env_section.items() if k != "kind"}
    if kind == "lqr":
        spec = LqrSpec(
            a=params["a"],
            b=params["b"],
            state_cost=params["state_cost"],
            action_cost=params["action_cost"],
            discount=params["discount"],
        )
        return LqrEnv(
            spec,
            horizon=params["horizon"],
            action_limit=params["action_limit"],
            init_range=params["init_range"],
            rng=rng,
        )
    if kind == "maze":
        spec = dataclasses.replace(default_maze(), **params)
        return MazeEnv(spec, rng=rng)
    if kind == "pendulum":
        horizon = params.pop("horizon")
        return PendulumEnv(PendulumParams(**params), horizon=horizon, rng=rng)
    raise ConfigError("env.kind", f"unknown environment kind {kind!r}")


def from_mapping(mapping, base_label="run"):
    """Validate a raw mapping and materialize every default."""
    if not isinstance(mapping, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = set(mapping) - set(TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")

    env_user = dict(mapping.get("env") or {})
    kind = env_user.pop("kind", None)
    if kind not in ENV_DEFAULTS:
        raise ConfigError(
            "env.kind", f"must be one of {sorted(ENV_DEFAULTS)}, got {kind!r}"
        )
    env = {"kind": kind}
    env.update(_merge_section("env", env_user, ENV_DEFAULTS[kind]))

    agent = _merge_section("agent", mapping.get("agent"), AGENT_DEFAULTS)
    train = _merge_section("train", mapping.get("train"), TRAIN_DEFAULTS)

    if train["total_steps"] is None:
        raise ConfigError("train.total_steps", "required")
    if not isinstance(train["total_steps"], int) or train["total_steps"] < 0:
        raise ConfigError("train.total_steps", "must be a non-negative integer")
    if agent["discount"] is None:
        agent["discount"] = env["discount"] if kind == "lqr" else 0.99
    if agent["noise"]["decay_steps"] is None:
        agent["noise"]["decay_steps"] = max(train["total_steps"] // 2, 1)
    if train["eval_discounted"] is None:
        train["eval_discounted"] = kind == "lqr"

    seeds = mapping.get("seeds")
    if not seeds or not isinstance(seeds, (list, tuple)):
        raise ConfigError("seeds", "must be a non-empty list of integers")
    for s in seeds:
        if not isinstance(s, int):
            raise ConfigError("seeds", f"seed {s!r} is not an integer")

    cfg = RunConfig(
        label=str(mapping.get("label", base_label)),
        env=env,
        agent=agent,
        train=train,
        seeds=tuple(seeds),
        out_dir=str(mapping.get("out_dir", "")),
    )
    # Fail fast on invalid agent/env settings rather than at run time.
    cfg.build_env(None)
    resolve_mode_variant(agent["mode"], mix_ratio=agent["mix_ratio"])
    if agent["target_stats"] is not None:
        parse_target_strategy(agent["target_stats"])
    return cfg


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return from_mapping(raw)


def with_updates(cfg, updates):
    """Return a revalidated copy with dotted-path overrides applied.

    >>> with_updates(cfg, {"agent.learning_rate": 3e-4}).agent["learning_rate"]
    0.0003
    """
    mapping = cfg.to_mapping()
    for dotted, value in updates.items():
        parts = dotted.split(".")
        node = mapping
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(dotted, "no such config section")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(dotted, "no such config field")
        node[parts[-1]] = value
    return from_mapping(mapping)
