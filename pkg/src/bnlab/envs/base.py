"""Common environment plumbing."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EnvStep:
    """One transition: successor observation, reward, termination flag.

    ``done`` covers both absorbing terminations (goal/death) and horizon
    truncations; ``info["truncated"]`` distinguishes the latter so the
    replay buffer can keep bootstrapping through time limits.
    """

    next_state: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)

    @property
    def truncated(self):
        return bool(self.info.get("truncated", False))

    @property
    def absorbing(self):
        """True only for real terminal states (used as the bootstrap mask)."""
        return self.done and not self.truncated
