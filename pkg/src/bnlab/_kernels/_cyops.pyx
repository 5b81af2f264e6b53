# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the normalization/optimizer hot path.

Signature-compatible with ``reference.py``; the dispatcher in
``__init__`` picks whichever backend is available (or forced via the
BNLAB_KERNELS environment variable).  Loops are fused so each kernel
makes a single pass over its operands where possible.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "cython"


def bn_batch_stats(double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], f = x.shape[1]
    cdef cnp.ndarray[double, ndim=1] mean = np.zeros(f)
    cdef cnp.ndarray[double, ndim=1] var = np.zeros(f)
    cdef double[::1] mu = mean, vv = var
    cdef Py_ssize_t i, j
    cdef double d
    for i in range(m):
        for j in range(f):
            mu[j] += x[i, j]
    for j in range(f):
        mu[j] /= m
    for i in range(m):
        for j in range(f):
            d = x[i, j] - mu[j]
            vv[j] += d * d
    for j in range(f):
        vv[j] /= m
    return mean, var


def bn_apply(double[:, ::1] x, double[::1] mean, double[::1] var,
             double[::1] gamma, double[::1] beta, double eps, bint want_cache=True):
    cdef Py_ssize_t m = x.shape[0], f = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] y = np.empty((m, f))
    cdef cnp.ndarray[double, ndim=1] inv = np.empty(f)
    cdef cnp.ndarray[double, ndim=2] xhat_arr
    cdef double[:, ::1] yv = y
    cdef double[::1] iv = inv
    cdef double[:, ::1] xh
    cdef Py_ssize_t i, j
    cdef double z
    for j in range(f):
        iv[j] = 1.0 / sqrt(var[j] + eps)
    if want_cache:
        xhat_arr = np.empty((m, f))
        xh = xhat_arr
        for i in range(m):
            for j in range(f):
                z = (x[i, j] - mean[j]) * iv[j]
                xh[i, j] = z
                yv[i, j] = z * gamma[j] + beta[j]
        return y, xhat_arr, inv
    for i in range(m):
        for j in range(f):
            z = (x[i, j] - mean[j]) * iv[j]
            yv[i, j] = z * gamma[j] + beta[j]
    return y, None, inv


def bn_train_backward(double[:, ::1] dy, double[:, ::1] xhat,
                      double[::1] invstd, double[::1] gamma, Py_ssize_t m_total):
    cdef Py_ssize_t m = dy.shape[0], f = dy.shape[1]
    cdef cnp.ndarray[double, ndim=2] dx = np.empty((m, f))
    cdef cnp.ndarray[double, ndim=1] dgamma = np.zeros(f)
    cdef cnp.ndarray[double, ndim=1] dbeta = np.zeros(f)
    cdef double[:, ::1] dxv = dx
    cdef double[::1] dg = dgamma, db = dbeta
    cdef Py_ssize_t i, j
    cdef double scale
    for i in range(m):
        for j in range(f):
            dg[j] += dy[i, j] * xhat[i, j]
            db[j] += dy[i, j]
    for i in range(m):
        for j in range(f):
            scale = gamma[j] * invstd[j]
            dxv[i, j] = scale * (dy[i, j] - (db[j] + xhat[i, j] * dg[j]) / m_total)
    return dx, dgamma, dbeta


def bn_eval_backward(double[:, ::1] dy, double[:, ::1] xhat,
                     double[::1] invstd, double[::1] gamma):
    cdef Py_ssize_t m = dy.shape[0], f = dy.shape[1]
    cdef cnp.ndarray[double, ndim=2] dx = np.empty((m, f))
    cdef cnp.ndarray[double, ndim=1] dgamma = np.zeros(f)
    cdef cnp.ndarray[double, ndim=1] dbeta = np.zeros(f)
    cdef double[:, ::1] dxv = dx
    cdef double[::1] dg = dgamma, db = dbeta
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(f):
            dg[j] += dy[i, j] * xhat[i, j]
            db[j] += dy[i, j]
            dxv[i, j] = dy[i, j] * gamma[j] * invstd[j]
    return dx, dgamma, dbeta


def ln_forward(double[:, ::1] x, double[::1] gamma, double[::1] beta, double eps):
    cdef Py_ssize_t m = x.shape[0], f = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] y = np.empty((m, f))
    cdef cnp.ndarray[double, ndim=2] xhat = np.empty((m, f))
    cdef cnp.ndarray[double, ndim=1] inv = np.empty(m)
    cdef double[:, ::1] yv = y, xh = xhat
    cdef double[::1] iv = inv
    cdef Py_ssize_t i, j
    cdef double mu, var, d, s
    for i in range(m):
        mu = 0.0
        for j in range(f):
            mu += x[i, j]
        mu /= f
        var = 0.0
        for j in range(f):
            d = x[i, j] - mu
            var += d * d
        var /= f
        s = 1.0 / sqrt(var + eps)
        iv[i] = s
        for j in range(f):
            d = (x[i, j] - mu) * s
            xh[i, j] = d
            yv[i, j] = d * gamma[j] + beta[j]
    return y, xhat, inv


def ln_backward(double[:, ::1] dy, double[:, ::1] xhat,
                double[::1] invstd, double[::1] gamma):
    cdef Py_ssize_t m = dy.shape[0], f = dy.shape[1]
    cdef cnp.ndarray[double, ndim=2] dx = np.empty((m, f))
    cdef cnp.ndarray[double, ndim=1] dgamma = np.zeros(f)
    cdef cnp.ndarray[double, ndim=1] dbeta = np.zeros(f)
    cdef double[:, ::1] dxv = dx
    cdef double[::1] dg = dgamma, db = dbeta
    cdef Py_ssize_t i, j
    cdef double s1, s2, g
    for i in range(m):
        s1 = 0.0
        s2 = 0.0
        for j in range(f):
            g = dy[i, j] * gamma[j]
            s1 += g
            s2 += g * xhat[i, j]
            dg[j] += dy[i, j] * xhat[i, j]
            db[j] += dy[i, j]
        for j in range(f):
            g = dy[i, j] * gamma[j]
            dxv[i, j] = invstd[i] * (g - (s1 + xhat[i, j] * s2) / f)
    return dx, dgamma, dbeta


def sgd_step(double[::1] param, double[::1] grad, double lr):
    cdef Py_ssize_t n = param.shape[0]
    cdef Py_ssize_t i
    for i in range(n):
        param[i] -= lr * grad[i]


def adam_step(double[::1] param, double[::1] grad, double[::1] m, double[::1] v,
              double lr, double beta1, double beta2, double eps, double bc1, double bc2):
    cdef Py_ssize_t n = param.shape[0]
    cdef Py_ssize_t i
    cdef double mi, vi
    for i in range(n):
        mi = beta1 * m[i] + (1.0 - beta1) * grad[i]
        vi = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
        m[i] = mi
        v[i] = vi
        param[i] -= lr * (mi / bc1) / (sqrt(vi / bc2) + eps)
