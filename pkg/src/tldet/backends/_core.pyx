# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels behind the same contracts as numpy_ops.

Loop nests accumulate in the same order as the numpy fallback so both
backends agree to within a few ulps.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def conv2d_single_out(const double[:, :, :, ::1] u, const double[:, :, ::1] k):
    """Correlate (n, cin, h, w) with one (cin, kh, kw) filter, stride 1,
    zero padding (kh//2, kw//2).  Returns (n, h, w)."""
    cdef Py_ssize_t n = u.shape[0], cin = u.shape[1], h = u.shape[2], w = u.shape[3]
    cdef Py_ssize_t kh = k.shape[1], kw = k.shape[2]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    out_arr = np.zeros((n, h, w), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, ci, y, x, dy, dx, sy, sx
    cdef double acc
    with nogil:
        for i in range(n):
            for y in range(h):
                for x in range(w):
                    acc = 0.0
                    for ci in range(cin):
                        for dy in range(kh):
                            sy = y + dy - ph
                            if sy < 0 or sy >= h:
                                continue
                            for dx in range(kw):
                                sx = x + dx - pw
                                if sx < 0 or sx >= w:
                                    continue
                                acc += k[ci, dy, dx] * u[i, ci, sy, sx]
                    out[i, y, x] = acc
    return out_arr


def conv2d_single_out_backward(
    const double[:, :, :, ::1] u, const double[:, :, ::1] k, const double[:, :, ::1] gout
):
    """Gradients of conv2d_single_out w.r.t. input and kernel."""
    cdef Py_ssize_t n = u.shape[0], cin = u.shape[1], h = u.shape[2], w = u.shape[3]
    cdef Py_ssize_t kh = k.shape[1], kw = k.shape[2]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    gu_arr = np.zeros((n, cin, h, w), dtype=np.float64)
    gk_arr = np.zeros((cin, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] gu = gu_arr
    cdef double[:, :, ::1] gk = gk_arr
    cdef Py_ssize_t i, ci, y, x, dy, dx, sy, sx
    cdef double g, acc
    with nogil:
        for ci in range(cin):
            for dy in range(kh):
                for dx in range(kw):
                    acc = 0.0
                    for i in range(n):
                        for y in range(h):
                            sy = y + dy - ph
                            if sy < 0 or sy >= h:
                                continue
                            for x in range(w):
                                sx = x + dx - pw
                                if sx < 0 or sx >= w:
                                    continue
                                g = gout[i, y, x]
                                gu[i, ci, sy, sx] += k[ci, dy, dx] * g
                                acc += g * u[i, ci, sy, sx]
                    gk[ci, dy, dx] = acc
    return gu_arr, gk_arr


def channel_pool(const double[:, :, :, ::1] x):
    """Mean, max and argmax over the channel axis of (n, c, h, w)."""
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    mean_arr = np.empty((n, h, w), dtype=np.float64)
    mx_arr = np.empty((n, h, w), dtype=np.float64)
    amax_arr = np.empty((n, h, w), dtype=np.int64)
    cdef double[:, :, ::1] mean = mean_arr
    cdef double[:, :, ::1] mx = mx_arr
    cdef cnp.int64_t[:, :, ::1] amax = amax_arr
    cdef Py_ssize_t i, ci, y, xx, best_ci
    cdef double s, best, v
    with nogil:
        for i in range(n):
            for y in range(h):
                for xx in range(w):
                    s = 0.0
                    best = x[i, 0, y, xx]
                    best_ci = 0
                    for ci in range(c):
                        v = x[i, ci, y, xx]
                        s += v
                        if v > best:
                            best = v
                            best_ci = ci
                    mean[i, y, xx] = s / c
                    mx[i, y, xx] = best
                    amax[i, y, xx] = best_ci
    return mean_arr, mx_arr, amax_arr


def global_pool(const double[:, :, :, ::1] x):
    """Mean, max and flat-hw argmax over the spatial axes of (n, c, h, w)."""
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    mean_arr = np.empty((n, c), dtype=np.float64)
    mx_arr = np.empty((n, c), dtype=np.float64)
    amax_arr = np.empty((n, c), dtype=np.int64)
    cdef double[:, ::1] mean = mean_arr
    cdef double[:, ::1] mx = mx_arr
    cdef cnp.int64_t[:, ::1] amax = amax_arr
    cdef Py_ssize_t i, ci, y, xx, best_idx
    cdef double s, best, v
    with nogil:
        for i in range(n):
            for ci in range(c):
                s = 0.0
                best = x[i, ci, 0, 0]
                best_idx = 0
                for y in range(h):
                    for xx in range(w):
                        v = x[i, ci, y, xx]
                        s += v
                        if v > best:
                            best = v
                            best_idx = y * w + xx
                mean[i, ci] = s / (h * w)
                mx[i, ci] = best
                amax[i, ci] = best_idx
    return mean_arr, mx_arr, amax_arr


def wh_iou_matrix(const double[:, ::1] a, const double[:, ::1] b):
    """Pairwise co-centered IoU of (N, 2) and (M, 2) width/height arrays."""
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    out_arr = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double mw, mh, inter, area_a
    with nogil:
        for i in range(na):
            area_a = a[i, 0] * a[i, 1]
            for j in range(nb):
                mw = a[i, 0] if a[i, 0] < b[j, 0] else b[j, 0]
                mh = a[i, 1] if a[i, 1] < b[j, 1] else b[j, 1]
                inter = mw * mh
                out[i, j] = inter / (area_a + b[j, 0] * b[j, 1] - inter)
    return out_arr


def iou_matrix(const double[:, ::1] a, const double[:, ::1] b):
    """Pairwise IoU of (N, 4) and (M, 4) corner boxes (x1, y1, x2, y2)."""
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    out_arr = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double ix1, iy1, ix2, iy2, iw, ih, inter, area_a, union
    with nogil:
        for i in range(na):
            area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
            for j in range(nb):
                ix1 = a[i, 0] if a[i, 0] > b[j, 0] else b[j, 0]
                iy1 = a[i, 1] if a[i, 1] > b[j, 1] else b[j, 1]
                ix2 = a[i, 2] if a[i, 2] < b[j, 2] else b[j, 2]
                iy2 = a[i, 3] if a[i, 3] < b[j, 3] else b[j, 3]
                iw = ix2 - ix1
                ih = iy2 - iy1
                if iw < 0.0:
                    iw = 0.0
                if ih < 0.0:
                    ih = 0.0
                inter = iw * ih
                union = area_a + (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1]) - inter
                out[i, j] = inter / union if union > 0.0 else 0.0
    return out_arr
