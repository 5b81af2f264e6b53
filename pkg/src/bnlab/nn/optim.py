"""Plain SGD and Adam over flat parameter lists.

Both optimizers update in place through the kernel backend and raise
:class:`~bnlab.errors.TrainingFault` on non-finite gradients so a
diverging run surfaces as a recordable fault rather than silent NaN
propagation.
"""

import numpy as np

from bnlab._kernels import ops
from bnlab.errors import TrainingFault


def _check(params, grads):
    if len(params) != len(grads):
        raise ValueError(
            f"got {len(grads)} gradients for {len(params)} parameters"
        )
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(
                f"gradient {i} has shape {g.shape}, parameter has {p.shape}"
            )
        if not p.flags.c_contiguous:
            raise ValueError(f"parameter {i} must be C-contiguous for in-place update")
        if not np.isfinite(g).all():
            raise TrainingFault(f"non-finite gradient for parameter {i}")


class SgdOptimizer:
    def __init__(self, lr):
        if lr <= 0:
            raise ValueError(f"learning rate must be > 0, got {lr}")
        self.lr = lr

    def step(self, params, grads):
        _check(params, grads)
        for p, g in zip(params, grads):
            ops.sgd_step(p.reshape(-1), np.ascontiguousarray(g).reshape(-1), self.lr)

    def state_arrays(self):
        return {"t": np.array(0)}

    def load_state(self, arrays):
        pass


class AdamOptimizer:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be > 0, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        _check(params, grads)
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        elif len(self.m) != len(params):
            raise ValueError("parameter list changed size under the optimizer")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            ops.adam_step(
                p.reshape(-1),
                np.ascontiguousarray(g).reshape(-1),
                m.reshape(-1),
                v.reshape(-1),
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            )

    def state_arrays(self):
        out = {"t": np.array(self.t)}
        if self.m is not None:
            for i, (m, v) in enumerate(zip(self.m, self.v)):
                out[f"m.{i}"] = m
                out[f"v.{i}"] = v
        return out

    def load_state(self, arrays):
        self.t = int(arrays["t"])
        ms, vs = [], []
        i = 0
        while f"m.{i}" in arrays:
            ms.append(np.array(arrays[f"m.{i}"]))
            vs.append(np.array(arrays[f"v.{i}"]))
            i += 1
        self.m = ms or None
        self.v = vs or None


def make_optimizer(kind, lr):
    if kind == "sgd":
        return SgdOptimizer(lr)
    if kind == "adam":
        return AdamOptimizer(lr)
    raise ValueError(f"unknown optimizer {kind!r} (expected 'sgd' or 'adam')")
