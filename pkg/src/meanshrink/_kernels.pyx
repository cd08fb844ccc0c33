# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-replication sums over an ``(n, p)`` data block.

Both kernels walk the block row by row so the data is read in memory order
and no ``(n, p)`` temporaries are allocated.
"""

import numpy as np


def col_mean_var(const double[:, ::1] X):
    """Column means and unbiased (divisor ``n - 1``) column variances."""
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1], i, j
    mean_arr = np.zeros(p)
    var_arr = np.zeros(p)
    cdef double[::1] mean = mean_arr
    cdef double[::1] var = var_arr
    cdef double d
    for i in range(n):
        for j in range(p):
            mean[j] += X[i, j]
    for j in range(p):
        mean[j] /= n
    for i in range(n):
        for j in range(p):
            d = X[i, j] - mean[j]
            var[j] += d * d
    if n > 1:
        for j in range(p):
            var[j] /= n - 1
    return mean_arr, var_arr


def centered_qsums(const double[:, ::1] X, const double[::1] xbar, const double[::1] q):
    """Return ``(W, V)`` for diagonal weights ``q``.

    ``W = sum_k (x_k - xbar)' Q (x_k - xbar)`` and
    ``V = sum_k (e' Q (x_k - xbar))**2``.
    """
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1], i, j
    cdef double w = 0.0, v = 0.0, a, d, qd
    for i in range(n):
        a = 0.0
        for j in range(p):
            d = X[i, j] - xbar[j]
            qd = q[j] * d
            w += qd * d
            a += qd
        v += a * a
    return w, v
