"""Finite-difference gradient checking utilities.

Used both by the test suite and by the ``verify gradients`` CLI
command.  All checks report the worst relative error
``|a - n| / max(1e-12, |a| + |n|)`` between analytic and central-
difference gradients.
"""

import numpy as np

from bnlab.nn.bn import BnMode
from bnlab.nn.net import net_backward, net_forward


def relative_errors(analytic, numeric, floor=1e-12):
    """Elementwise |a - n| / max(floor, |a| + |n|).

    ``floor`` guards the denominator.  Whole-net checks raise it because
    some gradients are *structurally* zero -- e.g. a bias feeding
    straight into a batch norm, whose shift the normalization removes --
    and there the ~1e-11 noise in the numeric estimate would otherwise
    read as O(1) relative error.  With floor=1e-3 and threshold 1e-6,
    near-zero entries are effectively compared with absolute tolerance
    1e-9: an order of magnitude above central-difference noise, far
    below any real gradient signal.
    """
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(floor, np.abs(analytic) + np.abs(numeric))
    return np.abs(analytic - numeric) / denom


def numeric_gradient(loss_fn, x, h=1e-5):
    """Central-difference gradient of a scalar function at ``x``.

    ``loss_fn`` takes no arguments and reads ``x`` by reference; ``x``
    is perturbed in place and restored on exit.
    """
    grad = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        hi = loss_fn()
        x[idx] = orig - h
        lo = loss_fn()
        x[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * h)
        it.iternext()
    return grad


def grad_check(loss_fn, grad_fn, x, h=1e-5):
    """Max relative error between ``grad_fn(x)`` and finite differences
    of ``loss_fn`` (which reads ``x`` by reference)."""
    analytic = grad_fn(x)
    numeric = numeric_gradient(loss_fn, x, h)
    return float(relative_errors(analytic, numeric).max())


def net_grad_check(
    net, x, mode=BnMode.EVAL, aux=None, h=1e-5, rng=None, wrt="all", floor=1e-3
):
    """Finite-difference check of a whole network's backward pass.

    The scalar loss is ``sum(net(x) * c)`` for a fixed random cotangent
    ``c``.  ``wrt`` selects what to perturb: "input", "params" or "all".
    Works on a clone, so the caller's net (and its running statistics)
    is untouched.  Returns the max relative error seen.

    Note on mixed mode: the stats-only pathway is stop-gradient by
    definition, so finite differences only agree with the backward pass
    for ``wrt="input"`` on a net with a single batch-norm site.  Aux
    rows flow through the same affine parameters, so true parameter
    gradients contain an aux-pathway term the backward pass deliberately
    drops; and past the first norm site an input perturbation reaches
    later statistics through the aux rows, another dropped pathway.
    """
    net = net.clone()
    rng = rng or np.random.default_rng(0)
    need_tape = mode is BnMode.STATS_ONLY_MIXED
    y0, tape = net_forward(net, x, mode=mode, aux=aux, want_tape=True)
    cotangent = rng.standard_normal(y0.shape)
    dx, grads = net_backward(net, tape, cotangent)

    def loss():
        y, _ = net_forward(net, x, mode=mode, aux=aux, want_tape=need_tape)
        return float((y * cotangent).sum())

    worst = 0.0
    if wrt in ("input", "all"):
        numeric = numeric_gradient(loss, x, h)
        worst = max(worst, float(relative_errors(dx, numeric, floor).max()))
    if wrt in ("params", "all"):
        for p, g in zip(net.parameters(), grads):
            numeric = numeric_gradient(loss, p, h)
            worst = max(worst, float(relative_errors(g, numeric, floor).max()))
    return worst
