# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled split scan; see _split_py.py for the contract.

The arithmetic mirrors the numpy fallback operation for operation so the
two backends return bit-identical results.
"""

import math

import numpy as np

cimport cython

# CPython's constants, so sentinel bit patterns match the fallback exactly.
_NEG_INF = -math.inf
_NAN = math.nan


def scan_feature(xs_in, ys_in, Py_ssize_t min_leaf=1):
    cdef double[::1] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef double[:, ::1] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef Py_ssize_t m = xs.shape[0]
    cdef Py_ssize_t n_out = ys.shape[1]
    cdef double neg_inf = _NEG_INF

    if m < 2 or m < 2 * min_leaf:
        return (neg_inf, _NAN, -1)

    cdef double[::1] left = np.zeros(n_out, dtype=np.float64)
    cdef double[::1] total = np.zeros(n_out, dtype=np.float64)
    cdef Py_ssize_t i, k
    for i in range(m):
        for k in range(n_out):
            total[k] += ys[i, k]

    cdef double best = neg_inf
    cdef Py_ssize_t best_i = -1
    cdef double nl, nr, acc, lk, rk
    for i in range(m - 1):
        for k in range(n_out):
            left[k] += ys[i, k]
        nl = <double>(i + 1)
        nr = <double>m - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        if xs[i + 1] <= xs[i]:
            continue
        acc = 0.0
        for k in range(n_out):
            lk = left[k]
            rk = total[k] - lk
            acc += lk * lk / nl + rk * rk / nr
        if acc > best:
            best = acc
            best_i = i

    if best_i < 0:
        return (neg_inf, _NAN, -1)
    cdef double threshold = (xs[best_i] + xs[best_i + 1]) / 2.0
    if threshold >= xs[best_i + 1]:
        threshold = xs[best_i]
    return (best, threshold, best_i)
