# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the per-frame hot kernels.

Mirrors ``_kernels_py`` exactly; see that module for the contracts.
"""

from libc.math cimport floor, log

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def prefix_sum(double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] pre = out
    cdef double acc = 0.0
    cdef Py_ssize_t i
    pre[0] = 0.0
    for i in range(n):
        acc += x[i]
        pre[i + 1] = acc
    return out


def moving_average(double[::1] x, int window):
    cdef Py_ssize_t n = x.shape[0]
    cdef int w = window if window < n else <int> n
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] sm = out
    cdef Py_ssize_t i, lo, hi
    cdef int half_lo, half_hi
    if w <= 1:
        for i in range(n):
            sm[i] = x[i]
        return out
    half_lo = w // 2
    half_hi = (w - 1) // 2
    pre_arr = prefix_sum(x)
    cdef double[::1] pre = pre_arr
    for i in range(n):
        lo = i - half_lo
        if lo < 0:
            lo = 0
        hi = i + half_hi
        if hi > n - 1:
            hi = n - 1
        sm[i] = (pre[hi + 1] - pre[lo]) / (hi - lo + 1)
    return out


def minmax_normalize(double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef double mn = x[0]
    cdef double mx = x[0]
    cdef Py_ssize_t i
    for i in range(1, n):
        if x[i] < mn:
            mn = x[i]
        if x[i] > mx:
            mx = x[i]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] nm = out
    if mx == mn:
        for i in range(n):
            nm[i] = 0.5
        return out
    cdef double rng = mx - mn
    for i in range(n):
        nm[i] = (x[i] - mn) / rng
    return out


def runs_above(double[::1] x, double threshold):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, count = 0
    cdef bint inside = False
    for i in range(n):
        if x[i] > threshold:
            if not inside:
                count += 1
                inside = True
        else:
            inside = False
    out = np.empty((count, 2), dtype=np.int64)
    cdef long long[:, ::1] runs = out
    cdef Py_ssize_t k = 0
    inside = False
    for i in range(n):
        if x[i] > threshold:
            if not inside:
                runs[k, 0] = i
                inside = True
            runs[k, 1] = i
        else:
            if inside:
                k += 1
            inside = False
    return out


cdef inline Py_ssize_t _inflation_length(Py_ssize_t seg_len):
    cdef Py_ssize_t l = <Py_ssize_t> floor(seg_len / 4.0 + 0.5)
    return l if l > 1 else 1


def inflation_length(seg_len):
    return int(_inflation_length(seg_len))


def batch_segment_scores(double[::1] norm, double[::1] pre,
                         long long[::1] starts, long long[::1] ends,
                         double eta, double gamma1, double gamma2,
                         bint uniform_outer=False):
    cdef Py_ssize_t n_seg = starts.shape[0]
    cdef Py_ssize_t t = norm.shape[0]
    inner_arr = np.empty(n_seg, dtype=np.float64)
    outer_arr = np.empty(n_seg, dtype=np.float64)
    max_arr = np.empty(n_seg, dtype=np.float64)
    p_arr = np.empty(n_seg, dtype=np.float64)
    cdef double[::1] s_inner = inner_arr
    cdef double[::1] s_outer = outer_arr
    cdef double[::1] s_max = max_arr
    cdef double[::1] p = p_arr
    cdef Py_ssize_t i, j, b, e, length, l, n_left, n_right
    cdef double mx, w, acc, wsum, left, right, outer
    cdef int sides
    for i in range(n_seg):
        b = starts[i]
        e = ends[i]
        length = e - b + 1
        s_inner[i] = (pre[e + 1] - pre[b]) / length
        mx = norm[b]
        for j in range(b + 1, e + 1):
            if norm[j] > mx:
                mx = norm[j]
        s_max[i] = mx
        l = _inflation_length(length)
        n_left = l if l < b else b
        n_right = l if l < t - 1 - e else t - 1 - e
        sides = 0
        outer = 0.0
        if n_left > 0:
            acc = 0.0
            wsum = 0.0
            for j in range(1, n_left + 1):
                w = 1.0 if uniform_outer else 1.0 / log(j + eta)
                acc += w * norm[b - j]
                wsum += w
            left = acc / wsum
            outer += left
            sides += 1
        if n_right > 0:
            acc = 0.0
            wsum = 0.0
            for j in range(1, n_right + 1):
                w = 1.0 if uniform_outer else 1.0 / log(j + eta)
                acc += w * norm[e + j]
                wsum += w
            right = acc / wsum
            outer += right
            sides += 1
        s_outer[i] = outer / sides if sides > 0 else 0.0
        p[i] = s_inner[i] - gamma1 * s_outer[i] + gamma2 * s_max[i]
    return inner_arr, outer_arr, max_arr, p_arr
