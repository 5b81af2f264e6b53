"""Pure-numpy reference kernels.

These are the fallback implementations of the hot inner-loop primitives
(normalization forward/backward and optimizer updates).  The compiled
extension in ``_cyops.pyx`` mirrors these signatures exactly; both
backends must agree to tight numerical tolerance (see
tests/test_kernel_backends.py).  Matrix products are deliberately *not*
kernels -- numpy's BLAS already does those as fast as we could.

Conventions: ``x`` and ``dy`` are (m, f) float64 C-contiguous arrays,
per-feature parameters are (f,) vectors, and all backward kernels return
``(dx, dgamma, dbeta)``.
"""

import numpy as np

NAME = "numpy"


def bn_batch_stats(x):
    """Per-feature mean and biased variance (divisor m) of a batch."""
    mean = x.mean(axis=0)
    var = np.square(x - mean).mean(axis=0)
    return mean, var


def bn_apply(x, mean, var, gamma, beta, eps, want_cache=True):
    """Affine-normalize ``x`` with the given statistics.

    Returns ``(y, xhat, invstd)``; ``xhat`` is None when ``want_cache``
    is false (saves a matrix when no backward pass will follow).
    """
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * invstd
    y = xhat * gamma + beta
    return y, (xhat if want_cache else None), invstd


def bn_train_backward(dy, xhat, invstd, gamma, m_total):
    """Backward through batch-stat normalization.

    ``m_total`` is the row count the statistics were computed over.  It
    equals ``dy.shape[0]`` for a plain training batch but is larger when
    extra stats-only rows were mixed in: those rows receive no gradient,
    yet they still took part in the mean/variance, so the correction
    terms keep the full divisor while summing only over gradient rows.
    """
    dgamma = np.einsum("ij,ij->j", dy, xhat)
    dbeta = dy.sum(axis=0)
    dx = (gamma * invstd) * (dy - (dbeta + xhat * dgamma) / m_total)
    return dx, dgamma, dbeta


def bn_eval_backward(dy, xhat, invstd, gamma):
    """Backward through normalization with frozen (constant) statistics."""
    dgamma = np.einsum("ij,ij->j", dy, xhat)
    dbeta = dy.sum(axis=0)
    dx = dy * (gamma * invstd)
    return dx, dgamma, dbeta


def ln_forward(x, gamma, beta, eps):
    """Per-row (layer) normalization; returns ``(y, xhat, invstd_rows)``."""
    mean = x.mean(axis=1, keepdims=True)
    var = np.square(x - mean).mean(axis=1, keepdims=True)
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * invstd
    y = xhat * gamma + beta
    return y, xhat, invstd[:, 0]


def ln_backward(dy, xhat, invstd, gamma):
    """Backward through per-row normalization."""
    f = dy.shape[1]
    g = dy * gamma
    s1 = g.sum(axis=1, keepdims=True)
    s2 = (g * xhat).sum(axis=1, keepdims=True)
    dx = invstd[:, None] * (g - (s1 + xhat * s2) / f)
    dgamma = np.einsum("ij,ij->j", dy, xhat)
    dbeta = dy.sum(axis=0)
    return dx, dgamma, dbeta


def sgd_step(param, grad, lr):
    """In-place vanilla gradient step on a flat float64 view."""
    param -= lr * grad


def adam_step(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """In-place Adam step on flat float64 views.

    ``bc1``/``bc2`` are the bias corrections ``1 - beta**t`` computed by
    the caller, which owns the step counter.
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
