# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot candidate scans (L1 nearest-neighbor)."""

from libc.math cimport fabs, INFINITY


def nearest_index(double[::1] xs, double[::1] ys, double ax, double ay):
    """Index of the candidate minimizing |x-ax|+|y-ay|; first index on ties."""
    cdef Py_ssize_t i, n = xs.shape[0]
    cdef Py_ssize_t best = -1
    cdef double d, best_d = INFINITY
    for i in range(n):
        d = fabs(xs[i] - ax) + fabs(ys[i] - ay)
        if d < best_d:
            best_d = d
            best = i
    return best


def nearest_index_masked(double[::1] xs, double[::1] ys,
                         unsigned char[::1] eligible, double ax, double ay):
    """Masked variant; candidates with eligible[i] == 0 are skipped."""
    cdef Py_ssize_t i, n = xs.shape[0]
    cdef Py_ssize_t best = -1
    cdef double d, best_d = INFINITY
    for i in range(n):
        if eligible[i] == 0:
            continue
        d = fabs(xs[i] - ax) + fabs(ys[i] - ay)
        if d < best_d:
            best_d = d
            best = i
    return best
