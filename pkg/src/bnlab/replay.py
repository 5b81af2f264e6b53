"""FIFO replay buffer with plain and stats-mixing sampling.

The buffer owns a seeded generator; every sampling method consumes it,
so a fixed seed reproduces the exact sample sequence.  Sampling is
uniform *with replacement*, which keeps batches i.i.d. draws from the
buffer's empirical distribution (the assumption under the batch-mean
variance law used throughout the statistics module).
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool  # true only for absorbing terminations, not truncations


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    def __len__(self):
        return self.s.shape[0]


class ReplayBuffer:
    def __init__(self, capacity, state_dim, action_dim, rng=None):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.rng = rng if rng is not None else np.random.default_rng()
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s_next = np.zeros((capacity, state_dim))
        self._done = np.zeros(capacity, dtype=bool)
        self._size = 0
        self._head = 0  # next write slot; oldest entry once full

    def __len__(self):
        return self._size

    def push(self, s, a, r, s_next, done):
        if not (
            np.isfinite(s).all()
            and np.isfinite(a).all()
            and math.isfinite(r)
            and np.isfinite(s_next).all()
        ):
            raise ValueError("non-finite transition")
        i = self._head
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s_next[i] = s_next
        self._done[i] = done
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def push_transition(self, t):
        self.push(t.s, t.a, t.r, t.s_next, t.done)

    def contents(self):
        """Current entries, oldest first (for order/eviction tests)."""
        if self._size < self.capacity:
            idx = np.arange(self._size)
        else:
            idx = np.arange(self.capacity)
            idx = (idx + self._head) % self.capacity
        return Batch(
            self._s[idx].copy(),
            self._a[idx].copy(),
            self._r[idx].copy(),
            self._s_next[idx].copy(),
            self._done[idx].copy(),
        )

    def sample(self, batch_size):
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if self._size < batch_size:
            raise ValueError(
                f"cannot sample {batch_size} transitions from buffer of {self._size}"
            )
        idx = self.rng.integers(0, self._size, size=batch_size)
        return Batch(
            self._s[idx],
            self._a[idx],
            self._r[idx],
            self._s_next[idx],
            self._done[idx],
        )

    def sample_state_action_pairs(self, count):
        """(s, a) pairs for statistics-only use; draws like sample()."""
        if count == 0:
            return (
                np.empty((0, self._s.shape[1])),
                np.empty((0, self._a.shape[1])),
            )
        batch = self.sample(count)
        return batch.s, batch.a


def aux_row_count(batch_size, x):
    """Stats-only rows for mixing ratio 1:x -- ceil(batch/x), so the
    realized ratio is never weaker than requested.  ``x=None`` (or
    infinity) disables mixing."""
    if x is None or x == math.inf:
        return 0
    if not x >= 1:
        raise ValueError(f"mixing ratio denominator must be >= 1, got {x}")
    return math.ceil(batch_size / x)


def sample_mixed(buf, policy_s, policy_a, x):
    """Assemble the two row groups of a buffer-mixed BN forward.

    Returns ``(grad_rows, aux_rows)``: the actor-generated (s, a') pairs
    carrying gradient, and ceil(|batch|/x) buffer-drawn (s, a) pairs that
    participate in normalization statistics only.
    """
    if policy_s.shape[0] != policy_a.shape[0]:
        raise ValueError("policy state/action row counts differ")
    n_aux = aux_row_count(policy_s.shape[0], x)
    aux_s, aux_a = buf.sample_state_action_pairs(n_aux)
    return (policy_s, policy_a), (aux_s, aux_a)
