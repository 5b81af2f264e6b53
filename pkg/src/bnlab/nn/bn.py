"""Batch and layer normalization with explicitly selectable modes.

The point of this module is that the *mode* of a batch-norm forward is a
call-site argument, not a global training flag:

* ``BnMode.TRAIN`` -- normalize with the current batch's mean and biased
  variance, and fold those statistics into the running estimates with an
  exponential moving average.
* ``BnMode.EVAL`` -- normalize with the frozen running statistics; rows
  are processed independently and nothing is mutated.
* ``BnMode.STATS_ONLY_MIXED`` -- like TRAIN, but the statistics are
  computed over the gradient batch concatenated with extra ``aux`` rows.
  Both row groups are normalized and propagated; gradients flow only
  along the gradient rows (the aux pathway is stop-gradient), while the
  correction terms of the backward pass keep the divisor of the full
  mixed batch.

Statistics are per feature; variances use the biased (divide by m)
convention throughout.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from bnlab._kernels import ops


class BnMode(enum.Enum):
    TRAIN = "train"
    EVAL = "eval"
    STATS_ONLY_MIXED = "stats_only_mixed"


@dataclass
class BatchNormState:
    """Learnable affine parameters plus running statistics for one layer."""

    gamma: np.ndarray
    beta: np.ndarray
    run_mean: np.ndarray
    run_var: np.ndarray
    momentum: float = 0.1
    epsilon: float = 1e-5

    @classmethod
    def create(cls, width, momentum=0.1, epsilon=1e-5):
        if width < 1:
            raise ValueError(f"batch norm width must be >= 1, got {width}")
        if not 0.0 < momentum <= 1.0:
            raise ValueError(f"momentum must be in (0, 1], got {momentum}")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be > 0, got {epsilon}")
        return cls(
            gamma=np.ones(width),
            beta=np.zeros(width),
            run_mean=np.zeros(width),
            run_var=np.ones(width),
            momentum=momentum,
            epsilon=epsilon,
        )

    @property
    def width(self):
        return self.gamma.shape[0]

    def clone(self):
        return BatchNormState(
            gamma=self.gamma.copy(),
            beta=self.beta.copy(),
            run_mean=self.run_mean.copy(),
            run_var=self.run_var.copy(),
            momentum=self.momentum,
            epsilon=self.epsilon,
        )


@dataclass
class LayerNormState:
    """Learnable affine parameters for per-row normalization."""

    gamma: np.ndarray
    beta: np.ndarray
    epsilon: float = 1e-5

    @classmethod
    def create(cls, width, epsilon=1e-5):
        if width < 2:
            raise ValueError(f"layer norm needs width >= 2, got {width}")
        return cls(gamma=np.ones(width), beta=np.zeros(width), epsilon=epsilon)

    @property
    def width(self):
        return self.gamma.shape[0]

    def clone(self):
        return LayerNormState(self.gamma.copy(), self.beta.copy(), self.epsilon)


@dataclass
class BnTape:
    """Backward cache for one bn_forward call.

    Valid until the layer's parameters change; single use.  In mixed
    mode ``aux_out`` carries the normalized stats-only rows so a network
    can keep threading them through subsequent layers.
    """

    mode: BnMode
    xhat: np.ndarray
    invstd: np.ndarray
    m_total: int
    state: BatchNormState
    aux_out: np.ndarray | None = None
    consumed: bool = field(default=False, compare=False)


@dataclass
class LnTape:
    xhat: np.ndarray
    invstd: np.ndarray
    state: LayerNormState
    consumed: bool = field(default=False, compare=False)


def _check_input(x, width, name="x"):
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-d (batch, features), got shape {x.shape}")
    if x.shape[1] != width:
        raise ValueError(f"{name} has {x.shape[1]} features, layer expects {width}")
    if not np.isfinite(x).all():
        raise ValueError(f"{name} contains non-finite values")


def bn_forward(x, state, mode, aux=None, want_tape=True):
    """Run one batch-norm forward in the requested mode.

    Returns ``(y, tape)``; ``tape`` is None when ``want_tape`` is false
    (mixed mode always produces a tape because the caller needs the
    normalized aux rows from it).
    """
    _check_input(x, state.width)
    if mode is BnMode.TRAIN:
        if aux is not None:
            raise ValueError("aux rows are only accepted in STATS_ONLY_MIXED mode")
        m = x.shape[0]
        if m < 2:
            raise ValueError(f"train mode needs at least 2 rows, got {m}")
        mean, var = ops.bn_batch_stats(x)
        y, xhat, invstd = ops.bn_apply(
            x, mean, var, state.gamma, state.beta, state.epsilon, want_cache=want_tape
        )
        _update_running(state, mean, var)
        tape = BnTape(mode, xhat, invstd, m, state) if want_tape else None
        return y, tape

    if mode is BnMode.EVAL:
        if aux is not None:
            raise ValueError("aux rows are only accepted in STATS_ONLY_MIXED mode")
        y, xhat, invstd = ops.bn_apply(
            x,
            state.run_mean,
            state.run_var,
            state.gamma,
            state.beta,
            state.epsilon,
            want_cache=want_tape,
        )
        tape = BnTape(mode, xhat, invstd, x.shape[0], state) if want_tape else None
        return y, tape

    if mode is BnMode.STATS_ONLY_MIXED:
        if aux is None:
            raise ValueError("STATS_ONLY_MIXED requires an aux row block (may be empty)")
        _check_input(aux, state.width, name="aux")
        if not want_tape:
            raise ValueError("mixed mode always needs a tape (it carries aux output)")
        m_total = x.shape[0] + aux.shape[0]
        if m_total < 2:
            raise ValueError(f"mixed mode needs at least 2 total rows, got {m_total}")
        stacked = np.concatenate([x, aux], axis=0) if aux.shape[0] else x
        mean, var = ops.bn_batch_stats(stacked)
        y, xhat, invstd = ops.bn_apply(
            x, mean, var, state.gamma, state.beta, state.epsilon, want_cache=True
        )
        if aux.shape[0]:
            aux_out, _, _ = ops.bn_apply(
                aux, mean, var, state.gamma, state.beta, state.epsilon, want_cache=False
            )
        else:
            aux_out = aux.copy()
        _update_running(state, mean, var)
        return y, BnTape(mode, xhat, invstd, m_total, state, aux_out=aux_out)

    raise ValueError(f"unknown mode {mode!r}")


def _update_running(state, batch_mean, batch_var):
    lam = state.momentum
    state.run_mean[:] = (1.0 - lam) * state.run_mean + lam * batch_mean
    state.run_var[:] = (1.0 - lam) * state.run_var + lam * batch_var


def bn_backward(tape, dy):
    """Backpropagate through a taped bn_forward; returns (dx, dgamma, dbeta)."""
    if tape is None:
        raise ValueError("forward was taken without a tape; cannot backpropagate")
    if tape.consumed:
        raise ValueError("tape already consumed")
    if dy.shape != tape.xhat.shape:
        raise ValueError(f"dy shape {dy.shape} does not match forward {tape.xhat.shape}")
    tape.consumed = True
    state = tape.state
    if tape.mode is BnMode.EVAL:
        return ops.bn_eval_backward(dy, tape.xhat, tape.invstd, state.gamma)
    return ops.bn_train_backward(dy, tape.xhat, tape.invstd, state.gamma, tape.m_total)


def ln_forward(x, state, want_tape=True):
    """Per-row layer normalization; mode-free and stateless."""
    _check_input(x, state.width)
    y, xhat, invstd = ops.ln_forward(x, state.gamma, state.beta, state.epsilon)
    tape = LnTape(xhat, invstd, state) if want_tape else None
    return y, tape


def ln_backward(tape, dy):
    if tape is None:
        raise ValueError("forward was taken without a tape; cannot backpropagate")
    if tape.consumed:
        raise ValueError("tape already consumed")
    if dy.shape != tape.xhat.shape:
        raise ValueError(f"dy shape {dy.shape} does not match forward {tape.xhat.shape}")
    tape.consumed = True
    return ops.ln_backward(dy, tape.xhat, tape.invstd, tape.state.gamma)


def steps_to_converge(momentum, rel_tol=1e-9):
    """Number of EMA updates with a fixed batch until the running stats
    sit within ``rel_tol`` (relatively) of that batch's statistics.

    The residual after n updates decays as (1 - momentum)**n.
    """
    return int(np.ceil(np.log(rel_tol) / np.log(1.0 - momentum)))
