# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: exact Euclidean-disc dilation, changed-pixel
counting, and integer squared-difference sums.

Dilation computes the exact squared Euclidean distance transform in two
passes (columns, then a lower-envelope-of-parabolas sweep per row) and
thresholds it, so the result is identical to brute-force disc dilation.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def dilate_disc(mask, int radius):
    """Dilate a {0,1} uint8 mask by a Euclidean disc of integer radius."""
    m_arr = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef const cnp.uint8_t[:, ::1] m = m_arr
    cdef Py_ssize_t h = m.shape[0]
    cdef Py_ssize_t w = m.shape[1]
    cdef Py_ssize_t x, y, q, k
    cdef long long big = <long long> (h + w + 1)
    cdef long long r2 = <long long> radius * <long long> radius
    cdef long long gval, d2
    cdef bint any_true = False

    for y in range(h):
        for x in range(w):
            if m[y, x]:
                any_true = True
                break
        if any_true:
            break
    if radius == 0 or not any_true:
        return m_arr.copy()

    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr

    # column pass: rows to the nearest true pixel within each column
    g_arr = np.empty((h, w), dtype=np.int64)
    cdef long long[:, ::1] g = g_arr
    for x in range(w):
        gval = big
        for y in range(h):
            if m[y, x]:
                gval = 0
            elif gval < big:
                gval = gval + 1
            g[y, x] = gval
        gval = big
        for y in range(h - 1, -1, -1):
            if m[y, x]:
                gval = 0
            elif gval < big:
                gval = gval + 1
            if gval < g[y, x]:
                g[y, x] = gval

    # row pass: lower envelope of parabolas over f(x) = g(y, x)^2
    cdef long long[::1] f = np.empty(w, dtype=np.int64)
    cdef Py_ssize_t[::1] v = np.empty(w, dtype=np.intp)
    cdef double[::1] z = np.empty(w + 1, dtype=np.float64)
    cdef double s
    cdef double INF = 1e30
    for y in range(h):
        for x in range(w):
            gval = g[y, x]
            f[x] = gval * gval
        k = 0
        v[0] = 0
        z[0] = -INF
        z[1] = INF
        for q in range(1, w):
            s = (<double> (f[q] - f[v[k]]) + <double> (q * q - v[k] * v[k])) / (2.0 * <double> (q - v[k]))
            while s <= z[k]:
                k = k - 1
                s = (<double> (f[q] - f[v[k]]) + <double> (q * q - v[k] * v[k])) / (2.0 * <double> (q - v[k]))
            k = k + 1
            v[k] = q
            z[k] = s
            z[k + 1] = INF
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k = k + 1
            d2 = <long long> (q - v[k]) * <long long> (q - v[k]) + f[v[k]]
            if d2 <= r2:
                out[y, q] = 1
    return out_arr


def count_changed(a, b, int tau):
    """Count pixels whose max per-channel absolute difference exceeds tau."""
    a_arr = np.ascontiguousarray(a, dtype=np.uint8)
    b_arr = np.ascontiguousarray(b, dtype=np.uint8)
    cdef const cnp.uint8_t[:, :, ::1] av = a_arr
    cdef const cnp.uint8_t[:, :, ::1] bv = b_arr
    cdef Py_ssize_t h = av.shape[0]
    cdef Py_ssize_t w = av.shape[1]
    cdef Py_ssize_t c = av.shape[2]
    cdef Py_ssize_t y, x, j
    cdef int d, peak
    cdef long long n = 0
    for y in range(h):
        for x in range(w):
            peak = 0
            for j in range(c):
                d = <int> av[y, x, j] - <int> bv[y, x, j]
                if d < 0:
                    d = -d
                if d > peak:
                    peak = d
            if peak > tau:
                n = n + 1
    return int(n)


def sq_diff_sum(a, b):
    """Exact integer sum of squared per-channel differences."""
    a_arr = np.ascontiguousarray(a, dtype=np.uint8)
    b_arr = np.ascontiguousarray(b, dtype=np.uint8)
    cdef const cnp.uint8_t[:, :, ::1] av = a_arr
    cdef const cnp.uint8_t[:, :, ::1] bv = b_arr
    cdef Py_ssize_t h = av.shape[0]
    cdef Py_ssize_t w = av.shape[1]
    cdef Py_ssize_t c = av.shape[2]
    cdef Py_ssize_t y, x, j
    cdef long long d
    cdef long long total = 0
    for y in range(h):
        for x in range(w):
            for j in range(c):
                d = <long long> av[y, x, j] - <long long> bv[y, x, j]
                total = total + d * d
    return int(total)
