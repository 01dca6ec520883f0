# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: lp distance scans, swap evaluation, cut scans,
tree routing.  Mirrors the signatures of ``_kernels_py``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, pow

cnp.import_array()

BACKEND = "cython"


def pow_dist_one(const double[:, ::1] points not None, const double[::1] center not None,
                 double p):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += pow(fabs(points[i, j] - center[j]), p)
        o[i] = acc
    return out


def min_pow_dist(const double[:, ::1] points not None, const double[:, ::1] centers not None,
                 double p):
    cdef Py_ssize_t n = points.shape[0], k = centers.shape[0], d = points.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best = np.empty(n)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] arg = np.empty(n, dtype=np.int64)
    cdef double[::1] b = best
    cdef cnp.int64_t[::1] a = arg
    cdef Py_ssize_t i, j, c
    cdef double acc, lo
    cdef Py_ssize_t lo_c
    for i in range(n):
        lo = INFINITY
        lo_c = 0
        for c in range(k):
            acc = 0.0
            for j in range(d):
                acc += pow(fabs(points[i, j] - centers[c, j]), p)
                if acc >= lo:
                    break
            if acc < lo:
                lo = acc
                lo_c = c
        b[i] = lo
        a[i] = lo_c
    return best, arg


def nearest_two(const double[:, ::1] points not None, const double[:, ::1] centers not None,
                double p):
    cdef Py_ssize_t n = points.shape[0], k = centers.shape[0], d = points.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d1 = np.empty(n)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] a1 = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d2 = np.empty(n)
    cdef double[::1] v1 = d1
    cdef cnp.int64_t[::1] w1 = a1
    cdef double[::1] v2 = d2
    cdef Py_ssize_t i, j, c
    cdef double acc, lo1, lo2
    cdef Py_ssize_t lo_c
    for i in range(n):
        lo1 = INFINITY
        lo2 = INFINITY
        lo_c = 0
        for c in range(k):
            acc = 0.0
            for j in range(d):
                acc += pow(fabs(points[i, j] - centers[c, j]), p)
                if acc >= lo2:
                    break
            if acc < lo1:
                lo2 = lo1
                lo1 = acc
                lo_c = c
            elif acc < lo2:
                lo2 = acc
        v1[i] = lo1
        w1[i] = lo_c
        v2[i] = lo2
    return d1, a1, d2


def best_swap_batch(const double[:, ::1] points not None, const long long[::1] cand_rows not None,
                    double p, const double[::1] d1 not None, const cnp.int64_t[::1] a1 not None,
                    const double[::1] d2 not None, Py_ssize_t k):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1]
    cdef Py_ssize_t m = cand_rows.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] delta_arr = np.empty(k)
    cdef double[::1] delta = delta_arr
    cdef double inv = 1.0 / p
    cdef double best_cost = INFINITY
    cdef Py_ssize_t best_pos = -1, best_out = -1
    cdef Py_ssize_t pos, i, j, c, r
    cdef double acc, dx, keep, base, lo
    cdef Py_ssize_t lo_c
    for pos in range(m):
        r = cand_rows[pos]
        base = 0.0
        for c in range(k):
            delta[c] = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += pow(fabs(points[i, j] - points[r, j]), p)
            dx = pow(acc, inv)
            keep = d1[i] if d1[i] < dx else dx
            base += keep
            # dropping a1[i] reroutes i to min(second nearest, candidate)
            delta[a1[i]] += (d2[i] if d2[i] < dx else dx) - keep
        lo = delta[0]
        lo_c = 0
        for c in range(1, k):
            if delta[c] < lo:
                lo = delta[c]
                lo_c = c
        if base + lo < best_cost:
            best_cost = base + lo
            best_pos = pos
            best_out = lo_c
    return best_pos, best_out, best_cost


def first_separating(const double[:, ::1] coords not None, const long long[::1] feats not None,
                     const double[::1] thresholds not None):
    cdef Py_ssize_t n = coords.shape[0], m = feats.shape[0]
    cdef Py_ssize_t i, j
    cdef double t
    cdef bint lt, ge
    for j in range(m):
        t = thresholds[j]
        lt = False
        ge = False
        for i in range(n):
            if coords[i, feats[j]] < t:
                lt = True
            else:
                ge = True
            if lt and ge:
                return j
    return -1


def route_points(const int[::1] feat not None, const double[::1] thresh not None,
                 const int[::1] left not None, const int[::1] right not None,
                 const cnp.int64_t[::1] leaf_center not None,
                 const double[:, ::1] points not None):
    cdef Py_ssize_t n = points.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef Py_ssize_t i
    cdef int node
    for i in range(n):
        node = 0
        while feat[node] >= 0:
            if points[i, feat[node]] < thresh[node]:
                node = left[node]
            else:
                node = right[node]
        o[i] = leaf_center[node]
    return out
