# cython: language_level=3
"""Compiled twins of the loops in ``_kernels_py``."""
import numpy as np
cimport cython
from libc.math cimport floor, fabs

cdef double SNAP_TOL = 1e-9


cdef inline double _snap(double x) nogil:
    cdef double r = floor(x + 0.5)
    cdef double scale = fabs(x)
    if scale < 1.0:
        scale = 1.0
    if fabs(x - r) <= SNAP_TOL * scale:
        return r
    return x


def round_greedy(const double[::1] values, const double[::1] coef, const long long[::1] minimum):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t k
    cdef double x, c, lo, inc
    cdef double acc = 0.0
    cdef long long low
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for k in range(n):
            x = _snap(values[k])
            c = coef[k]
            low = minimum[k]
            if x <= <double>low:
                o[k] = low
                if c > 0.0 and x > -2.0:
                    acc += c / (2.0 + x) - c / (2.0 + <double>low)
                continue
            lo = floor(x)
            if lo == x:
                o[k] = <long long>lo
                continue
            inc = c / (2.0 + lo) - c / (2.0 + x)
            if inc < acc:
                o[k] = <long long>lo
                acc -= inc
            else:
                o[k] = <long long>lo + 1
                acc += c / (2.0 + x) - c / (2.0 + (lo + 1.0))
    return out


def round_sum_preserving(const double[::1] values, const long long[::1] order):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t j, k
    cdef double y, q, scale
    cdef double acc = 0.0
    out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for j in range(n):
            k = order[j]
            y = _snap(values[k]) + acc
            scale = fabs(y)
            if scale < 1.0:
                scale = 1.0
            q = floor(y + SNAP_TOL * scale)
            if q < 0:
                q = 0
            o[k] = <long long>q
            acc = y - q
    return out


def nearest_centroid(const double[:, ::1] data, const double[:, ::1] centroids):
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t d = data.shape[1]
    cdef Py_ssize_t m = centroids.shape[0]
    cdef Py_ssize_t i, c, j, best
    cdef double acc, best_d, diff
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    cdef long long[::1] lab = labels
    cdef double[::1] dst = dist2
    with nogil:
        for i in range(n):
            best = 0
            best_d = 0.0
            for c in range(m):
                acc = 0.0
                for j in range(d):
                    diff = data[i, j] - centroids[c, j]
                    acc = acc + diff * diff
                    # partial sums only grow, so this cannot skip a tie
                    if c > 0 and acc > best_d:
                        break
                if c == 0 or acc < best_d:
                    best = c
                    best_d = acc
            lab[i] = best
            dst[i] = best_d
    return labels, dist2
