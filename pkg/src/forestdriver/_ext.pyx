# cython: language_level=3
"""Compiled versions of the kernels in ``_pure.py``.

Every function mirrors its pure counterpart exactly, including the order of
floating point operations, so the two backends are interchangeable.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdlib cimport free, malloc

cnp.import_array()


cdef inline void _insertion_sort(float* buf, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef float v
    for i in range(1, n):
        v = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > v:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = v


def masked_median(values, valid):
    cdef cnp.float32_t[:, ::1] v = np.ascontiguousarray(values, dtype=np.float32)
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef Py_ssize_t k = v.shape[0]
    cdef Py_ssize_t n = v.shape[1]
    out_arr = np.zeros(n, dtype=np.float32)
    ok_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.float32_t[::1] out = out_arr
    cdef cnp.uint8_t[::1] ok = ok_arr
    cdef float* buf = <float*> malloc(max(k, 1) * sizeof(float))
    cdef Py_ssize_t col, row, c
    cdef double a, b
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for col in range(n):
                c = 0
                for row in range(k):
                    if m[row, col]:
                        buf[c] = v[row, col]
                        c += 1
                if c == 0:
                    continue
                _insertion_sort(buf, c)
                a = <double> buf[(c - 1) // 2]
                b = <double> buf[c // 2]
                out[col] = <float> ((a + b) * 0.5)
                ok[col] = 1
    finally:
        free(buf)
    return out_arr, ok_arr


def even_odd_fill(edges, Py_ssize_t width, Py_ssize_t height, double eps):
    cdef cnp.float64_t[:, ::1] e = np.ascontiguousarray(
        np.asarray(edges, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t m = e.shape[0]
    out_arr = np.zeros((height, width), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef double* xs = <double*> malloc(max(m, 1) * sizeof(double))
    cdef Py_ssize_t row, col, j, nx, i, p
    cdef double py, px, x0, y0, x1, y1, t
    if xs == NULL:
        raise MemoryError()
    try:
        with nogil:
            for row in range(height):
                py = <double> row + 0.5 + eps
                nx = 0
                for j in range(m):
                    x0 = e[j, 0]
                    y0 = e[j, 1]
                    x1 = e[j, 2]
                    y1 = e[j, 3]
                    if (y0 > py) != (y1 > py):
                        xs[nx] = (x1 - x0) * (py - y0) / (y1 - y0) + x0
                        nx += 1
                if nx == 0:
                    continue
                # insertion sort of the crossings
                for i in range(1, nx):
                    t = xs[i]
                    j = i - 1
                    while j >= 0 and xs[j] > t:
                        xs[j + 1] = xs[j]
                        j -= 1
                    xs[j + 1] = t
                # p = number of crossings <= px; inside iff (nx - p) is odd
                p = 0
                for col in range(width):
                    px = <double> col + 0.5 + eps
                    while p < nx and not (px < xs[p]):
                        p += 1
                    if (nx - p) & 1:
                        out[row, col] = 1
    finally:
        free(xs)
    return out_arr


def gini_best_split(X, y, features, Py_ssize_t n_classes, Py_ssize_t min_leaf):
    cdef cnp.float64_t[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t n = yv.shape[0]
    cdef long best_f = -1
    cdef double best_t = 0.0
    cdef double best_s = -INFINITY
    if n < 2 * min_leaf:
        return best_f, best_t, best_s
    total_arr = np.bincount(np.asarray(yv), minlength=n_classes).astype(np.int64)
    cdef cnp.int64_t[::1] total = total_arr
    left_arr = np.zeros(n_classes, dtype=np.int64)
    right_arr = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.int64_t[::1] left = left_arr
    cdef cnp.int64_t[::1] right = right_arr
    cdef cnp.int64_t[::1] order
    cdef cnp.float64_t[::1] col_vals
    cdef Py_ssize_t i, c, nl, nr, idx
    cdef long long sq_l, sq_r, tot_sq
    cdef double score, lo, hi, t
    tot_sq = 0
    for c in range(n_classes):
        tot_sq += total[c] * total[c]
    for f in features:
        col_vals = np.ascontiguousarray(np.asarray(Xv[:, f]))
        order = np.argsort(np.asarray(col_vals), kind="stable").astype(np.int64)
        for c in range(n_classes):
            left[c] = 0
            right[c] = total[c]
        sq_l = 0
        sq_r = tot_sq
        for i in range(n - 1):
            idx = order[i]
            c = yv[idx]
            sq_l += 2 * left[c] + 1
            left[c] += 1
            sq_r -= 2 * right[c] - 1
            right[c] -= 1
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            lo = col_vals[idx]
            hi = col_vals[order[i + 1]]
            if not (lo < hi):
                continue
            score = (<double> sq_l) / (<double> nl) + (<double> sq_r) / (<double> nr)
            if score > best_s:
                best_s = score
                best_f = f
                t = (lo + hi) * 0.5
                if t >= hi:
                    t = lo
                best_t = t
    return int(best_f), float(best_t), float(best_s)
