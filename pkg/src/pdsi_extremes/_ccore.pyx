# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Same signatures and semantics as ``_pycore``."""

import numpy as np

from libc.math cimport sqrt
from libc.stdint cimport int64_t


def mk_score(const double[::1] x):
    """Mann-Kendall S: sum of sign(x[j] - x[i]) over all pairs i < j."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef int64_t s = 0
    cdef double xi, d
    with nogil:
        for i in range(n - 1):
            xi = x[i]
            for j in range(i + 1, n):
                d = x[j] - xi
                if d > 0:
                    s += 1
                elif d < 0:
                    s -= 1
    return int(s)


def assign_nearest(const double[:, ::1] X, const double[:, ::1] C):
    """Index of the nearest centroid and the squared distance to it.

    Ties go to the lowest centroid index.
    """
    cdef Py_ssize_t n = X.shape[0], k = C.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, c, f
    cdef double best, dist, diff
    cdef Py_ssize_t arg
    labels = np.empty(n, dtype=np.int64)
    d2 = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] lab = labels
    cdef double[::1] dd = d2
    with nogil:
        for i in range(n):
            best = 0.0
            arg = 0
            for c in range(k):
                dist = 0.0
                for f in range(d):
                    diff = X[i, f] - C[c, f]
                    dist += diff * diff
                if c == 0 or dist < best:
                    best = dist
                    arg = c
            lab[i] = arg
            dd[i] = best
    return labels, d2


def silhouette_samples(const double[:, ::1] X, const int64_t[::1] labels, Py_ssize_t k):
    """Per-point silhouette values; points in singleton clusters get 0."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, f, c
    cdef double dist, diff, a, b, m
    cdef int64_t li
    sizes_arr = np.zeros(k, dtype=np.int64)
    sums_arr = np.zeros(k, dtype=np.float64)
    out = np.zeros(n, dtype=np.float64)
    cdef int64_t[::1] sizes = sizes_arr
    cdef double[::1] sums = sums_arr
    cdef double[::1] s = out
    for i in range(n):
        sizes[labels[i]] += 1
    with nogil:
        for i in range(n):
            li = labels[i]
            if sizes[li] <= 1:
                s[i] = 0.0
                continue
            for c in range(k):
                sums[c] = 0.0
            for j in range(n):
                if j == i:
                    continue
                dist = 0.0
                for f in range(d):
                    diff = X[i, f] - X[j, f]
                    dist += diff * diff
                sums[labels[j]] += sqrt(dist)
            a = sums[li] / (sizes[li] - 1)
            b = -1.0
            for c in range(k):
                if c == li or sizes[c] == 0:
                    continue
                m = sums[c] / sizes[c]
                if b < 0 or m < b:
                    b = m
            if a > b:
                m = a
            else:
                m = b
            if m > 0:
                s[i] = (b - a) / m
            else:
                s[i] = 0.0
    return out
