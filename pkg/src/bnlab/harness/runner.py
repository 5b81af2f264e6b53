"""Seeded experiment execution and deterministic output-file layout.

Each run writes ``run_<confighash>_seed<seed>.csv`` plus a materialized
``config_<confighash>.json``; a faulted run additionally leaves a
``.fault`` sidecar recording where it stopped.  Re-running an identical
config overwrites its own files byte for byte and never touches anyone
else's.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bnlab.agent import train
from bnlab.replay import ReplayBuffer

OUT_ENV_VAR = "BNLAB_OUT"


def output_root(explicit=None, cfg=None):
    """Resolve the output directory: argument > config > $BNLAB_OUT > runs."""
    if explicit:
        return Path(explicit)
    if cfg is not None and cfg.out_dir:
        return Path(cfg.out_dir)
    return Path(os.environ.get(OUT_ENV_VAR, "runs"))


def run_filename(config_hash, seed):
    return f"run_{config_hash}_seed{seed}.csv"


@dataclass
class RunResult:
    seed: int
    csv_path: Path
    metrics: object

    @property
    def faulted(self):
        return self.metrics.faulted


def _seeded_components(cfg, seed):
    children = np.random.SeedSequence(seed).spawn(4)
    env = cfg.build_env(np.random.default_rng(children[0]))
    agent = cfg.build_agent(env, np.random.default_rng(children[1]))
    buf = ReplayBuffer(
        cfg.buffer_capacity,
        env.observation_dim,
        env.action_dim,
        rng=np.random.default_rng(children[2]),
    )
    # Rebuilding from the same child sequence gives every evaluation the
    # same freshly seeded environment, so eval returns are comparable
    # across training steps and across configurations.
    eval_child = children[3]

    def eval_env_fn():
        return cfg.build_env(np.random.default_rng(eval_child))

    return env, agent, buf, eval_env_fn


def run_single(cfg, seed, out_dir=None, hooks=None):
    """Train one seed of ``cfg`` and write its CSV (and fault sidecar)."""
    root = output_root(out_dir, cfg)
    root.mkdir(parents=True, exist_ok=True)
    env, agent, buf, eval_env_fn = _seeded_components(cfg, seed)
    metrics = train(
        agent, env, buf, cfg.train_settings(), eval_env_fn=eval_env_fn,
        hooks=hooks,
    )
    csv_path = root / run_filename(cfg.config_hash, seed)
    metrics.to_csv(csv_path)
    fault_path = csv_path.with_suffix(".fault")
    if metrics.faulted:
        fault_path.write_text(
            f"step {metrics.fault_step}\n{metrics.fault_message}\n",
            encoding="utf-8",
        )
    elif fault_path.exists():
        fault_path.unlink()
    return RunResult(seed=seed, csv_path=csv_path, metrics=metrics)


def write_config_json(cfg, out_dir=None):
    root = output_root(out_dir, cfg)
    root.mkdir(parents=True, exist_ok=True)
    payload = cfg.to_mapping()
    payload["config_hash"] = cfg.config_hash
    path = root / f"config_{cfg.config_hash}.json"
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return path


def run_config(cfg, out_dir=None, seeds=None, hooks=None):
    """Run every seed of a config sequentially; returns one result per seed."""
    write_config_json(cfg, out_dir)
    results = []
    for seed in seeds if seeds is not None else cfg.seeds:
        results.append(run_single(cfg, seed, out_dir=out_dir, hooks=hooks))
    return results
