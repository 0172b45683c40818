# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels.

Same contracts as `_fallback.py`; the inner loops keep the exact operation
order of the NumPy versions so both backends return bit-identical arrays.
"""

from libc.math cimport floor as c_floor
from libc.string cimport memcpy

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "native"


def fill_polygons(polys, int height, int width):
    """Rasterize polygons into a binary uint8 mask (even-odd, pixel centers)."""
    mask_arr = np.zeros((height, width), dtype=np.uint8)
    cdef unsigned char[:, ::1] mask = mask_arr
    cdef double[:, ::1] pts
    cdef double[::1] xs
    cdef double x0, y0, x1, y1, yc, t, xc, key
    cdef Py_ssize_t n, i, j, row, col, ncross, ptr, k

    xs_arr = np.empty(0, dtype=np.float64)
    for poly in polys:
        pts_arr = np.ascontiguousarray(poly, dtype=np.float64)
        pts = pts_arr
        n = pts.shape[0]
        if n < 2:
            continue
        if xs_arr.shape[0] < n:
            xs_arr = np.empty(n, dtype=np.float64)
        xs = xs_arr
        for row in range(height):
            yc = row + 0.5
            ncross = 0
            for i in range(n):
                j = i + 1
                if j == n:
                    j = 0
                x0 = pts[i, 0]
                y0 = pts[i, 1]
                x1 = pts[j, 0]
                y1 = pts[j, 1]
                if y0 == y1:
                    continue
                if (y0 <= yc and yc < y1) or (y1 <= yc and yc < y0):
                    t = (yc - y0) / (y1 - y0)
                    xs[ncross] = x0 + t * (x1 - x0)
                    ncross += 1
            if ncross == 0:
                continue
            # insertion sort; crossing counts per row are tiny
            for i in range(1, ncross):
                key = xs[i]
                k = i - 1
                while k >= 0 and xs[k] > key:
                    xs[k + 1] = xs[k]
                    k -= 1
                xs[k + 1] = key
            ptr = 0
            for col in range(width):
                xc = col + 0.5
                while ptr < ncross and xs[ptr] <= xc:
                    ptr += 1
                if ptr & 1:
                    mask[row, col] = 1
    return mask_arr


cdef inline double _load(const double[:, :, ::1] src, Py_ssize_t i, Py_ssize_t j,
                         Py_ssize_t ch, Py_ssize_t h, Py_ssize_t w,
                         bint clamp_edges) nogil:
    if clamp_edges:
        if i < 0:
            i = 0
        elif i > h - 1:
            i = h - 1
        if j < 0:
            j = 0
        elif j > w - 1:
            j = w - 1
        return src[i, j, ch]
    if i < 0 or i >= h or j < 0 or j >= w:
        return 0.0
    return src[i, j, ch]


def warp_bilinear(const double[:, :, ::1] src, int out_h, int out_w,
                  double row_scale, double row_off,
                  double col_scale, double col_off, bint clamp_edges):
    """Bilinear resample; see the fallback docstring for the sampling grid."""
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t c = src.shape[2]
    out_arr = np.empty((out_h, out_w, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, ch, y0, x0
    cdef double v, u, fy, fx, p00, p01, p10, p11, top, bot

    with nogil:
        for i in range(out_h):
            v = i * row_scale + row_off
            fy = v - c_floor(v)
            y0 = <Py_ssize_t>c_floor(v)
            for j in range(out_w):
                u = j * col_scale + col_off
                fx = u - c_floor(u)
                x0 = <Py_ssize_t>c_floor(u)
                for ch in range(c):
                    p00 = _load(src, y0, x0, ch, h, w, clamp_edges)
                    p01 = _load(src, y0, x0 + 1, ch, h, w, clamp_edges)
                    p10 = _load(src, y0 + 1, x0, ch, h, w, clamp_edges)
                    p11 = _load(src, y0 + 1, x0 + 1, ch, h, w, clamp_edges)
                    top = p00 * (1.0 - fx) + p01 * fx
                    bot = p10 * (1.0 - fx) + p11 * fx
                    out[i, j, ch] = top * (1.0 - fy) + bot * fy
    return out_arr


def diffuse_iterate(double[:, :, ::1] work, const unsigned char[:, ::1] hole,
                    int max_iters, double tol):
    """Jacobi-relax hole pixels in place; returns the sweep count."""
    cdef Py_ssize_t h = work.shape[0]
    cdef Py_ssize_t w = work.shape[1]
    cdef Py_ssize_t c = work.shape[2]
    cdef Py_ssize_t i, j, ch, k, nhole
    cdef double s, cnt, nv, d, delta
    cdef int iters = 0

    hole_idx = np.nonzero(np.asarray(hole).astype(bool))
    hy_arr = hole_idx[0].astype(np.intp)
    hx_arr = hole_idx[1].astype(np.intp)
    nhole = hy_arr.shape[0]
    if nhole == 0:
        return 0
    cdef Py_ssize_t[::1] hy = hy_arr
    cdef Py_ssize_t[::1] hx = hx_arr

    buf_arr = np.empty((h, w, c), dtype=np.float64)
    cdef double[:, :, ::1] buf = buf_arr

    with nogil:
        while iters < max_iters:
            iters += 1
            memcpy(&buf[0, 0, 0], &work[0, 0, 0], h * w * c * sizeof(double))
            delta = 0.0
            for k in range(nhole):
                i = hy[k]
                j = hx[k]
                cnt = 0.0
                if i > 0:
                    cnt += 1.0
                if i < h - 1:
                    cnt += 1.0
                if j > 0:
                    cnt += 1.0
                if j < w - 1:
                    cnt += 1.0
                for ch in range(c):
                    s = 0.0
                    if i > 0:
                        s = s + buf[i - 1, j, ch]
                    if i < h - 1:
                        s = s + buf[i + 1, j, ch]
                    if j > 0:
                        s = s + buf[i, j - 1, ch]
                    if j < w - 1:
                        s = s + buf[i, j + 1, ch]
                    nv = s / cnt
                    d = nv - buf[i, j, ch]
                    if d < 0.0:
                        d = -d
                    if d > delta:
                        delta = d
                    work[i, j, ch] = nv
            if delta < tol:
                break
    return iters
