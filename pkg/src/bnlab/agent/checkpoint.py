"""Single-file agent checkpoints (npz).

Stores every network array (weights, norm scales, running statistics),
per-optimizer state, the agent rng state, and the live noise scale under
a format-version key so older files can be rejected loudly instead of
being misread.
"""

import json

import numpy as np

FORMAT_VERSION = 1

_NET_NAMES = ("actor", "critic0", "critic1", "target0", "target1")
_OPT_NAMES = ("actor_opt", "critic_opt0", "critic_opt1")


def _nets(agent):
    return dict(
        zip(
            _NET_NAMES,
            [agent.actor, *agent.critics, *agent.target_critics],
        )
    )


def _opts(agent):
    return dict(zip(_OPT_NAMES, [agent.actor_opt, *agent.critic_opts]))


def save_checkpoint(agent, path):
    arrays = {"format_version": np.array(FORMAT_VERSION)}
    for net_name, net in _nets(agent).items():
        for arr_name, arr in net.state_arrays().items():
            arrays[f"{net_name}/{arr_name}"] = arr
    for opt_name, opt in _opts(agent).items():
        for arr_name, arr in opt.state_arrays().items():
            arrays[f"{opt_name}/{arr_name}"] = arr
    arrays["rng_state"] = np.frombuffer(
        json.dumps(agent.rng.bit_generator.state).encode("utf-8"), dtype=np.uint8
    )
    arrays["sigma_now"] = np.array(agent.sigma_now)
    np.savez(path, **arrays)


def load_checkpoint(agent, path):
    """Restore a checkpoint in place; shapes must match the live agent."""
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(
                f"checkpoint format {version} unsupported (expected {FORMAT_VERSION})"
            )
        for net_name, net in _nets(agent).items():
            for arr_name, arr in net.state_arrays().items():
                stored = data[f"{net_name}/{arr_name}"]
                if stored.shape != arr.shape:
                    raise ValueError(
                        f"{net_name}/{arr_name}: shape {stored.shape} does not "
                        f"match live array {arr.shape}"
                    )
                arr[...] = stored
        for opt_name, opt in _opts(agent).items():
            prefix = f"{opt_name}/"
            stored = {
                key[len(prefix):]: data[key]
                for key in data.files
                if key.startswith(prefix)
            }
            opt.load_state(stored)
        agent.rng.bit_generator.state = json.loads(
            data["rng_state"].tobytes().decode("utf-8")
        )
        agent.sigma_now = float(data["sigma_now"])
