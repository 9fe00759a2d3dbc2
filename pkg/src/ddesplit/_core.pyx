# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``_core_py`` exactly."""

import numpy as np


def exp_recursion(const double[:, ::1] g, double decay, double w_lo, double w_hi):
    cdef Py_ssize_t rows = g.shape[0], n = g.shape[1], j, i
    out_arr = np.zeros((rows, n))
    cdef double[:, ::1] out = out_arr
    for j in range(rows - 2, -1, -1):
        for i in range(n):
            out[j, i] = decay * out[j + 1, i] + w_lo * g[j, i] + w_hi * g[j + 1, i]
    return out_arr


def thomas(const double[::1] sub, const double[::1] diag, const double[::1] sup,
           const double[:, ::1] rhs):
    cdef Py_ssize_t n = diag.shape[0], k = rhs.shape[1], i, c
    cdef double denom
    cp_arr = np.empty(n)
    x_arr = np.empty((n, k))
    cdef double[::1] cp = cp_arr
    cdef double[:, ::1] x = x_arr
    denom = diag[0]
    if denom == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    cp[0] = sup[0] / denom
    for c in range(k):
        x[0, c] = rhs[0, c] / denom
    for i in range(1, n):
        denom = diag[i] - sub[i] * cp[i - 1]
        if denom == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        cp[i] = sup[i] / denom
        for c in range(k):
            x[i, c] = (rhs[i, c] - sub[i] * x[i - 1, c]) / denom
    for i in range(n - 2, -1, -1):
        for c in range(k):
            x[i, c] -= cp[i] * x[i + 1, c]
    return x_arr


def hermite_midpoint_sum(const double[:, ::1] U, const double[:, ::1] D,
                         const double[::1] W, Py_ssize_t start, double delta,
                         Py_ssize_t last_linear):
    cdef Py_ssize_t count = W.shape[0], n = U.shape[1], j, i, a
    cdef double w, q = delta / 8.0
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    for j in range(count):
        w = W[j]
        if w == 0.0:
            continue
        a = start + j
        if a + 1 <= last_linear:
            for i in range(n):
                out[i] += w * 0.5 * (U[a, i] + U[a + 1, i])
        else:
            for i in range(n):
                out[i] += w * (0.5 * (U[a, i] + U[a + 1, i]) + q * (D[a, i] - D[a + 1, i]))
    return out_arr
