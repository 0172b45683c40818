"""Pure-NumPy implementations of the pixel kernels.

Mirrors the compiled module in `_native.pyx` operation for operation; the two
backends must produce bit-identical output (the compiled build disables FP
contraction for this reason).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def fill_polygons(polys, height, width):
    """Rasterize polygons into a binary uint8 mask.

    Each polygon is an (n, 2) float64 array of (x, y) vertices.  A pixel is
    set when its center lies inside a polygon under the even-odd rule; masks
    of separate polygons are OR-combined.
    """
    mask = np.zeros((height, width), dtype=np.uint8)
    centers_x = np.arange(width, dtype=np.float64) + 0.5
    for poly in polys:
        poly = np.asarray(poly, dtype=np.float64)
        x0 = poly[:, 0]
        y0 = poly[:, 1]
        x1 = np.roll(x0, -1)
        y1 = np.roll(y0, -1)
        keep = y0 != y1  # horizontal edges never cross a scanline
        if not keep.any():
            continue
        x0, y0, x1, y1 = x0[keep], y0[keep], x1[keep], y1[keep]
        for row in range(height):
            yc = row + 0.5
            hit = ((y0 <= yc) & (yc < y1)) | ((y1 <= yc) & (yc < y0))
            if not hit.any():
                continue
            t = (yc - y0[hit]) / (y1[hit] - y0[hit])
            xs = x0[hit] + t * (x1[hit] - x0[hit])
            xs.sort()
            inside = (np.searchsorted(xs, centers_x, side="right") & 1).astype(bool)
            mask[row, inside] = 1
    return mask


def warp_bilinear(src, out_h, out_w, row_scale, row_off, col_scale, col_off, clamp_edges):
    """Resample `src` (H, W, C float64) onto an (out_h, out_w, C) grid.

    Output pixel (i, j) samples src at array coordinates
    (i*row_scale + row_off, j*col_scale + col_off) with bilinear weights.
    Out-of-range samples read zero, or the clamped edge pixel when
    `clamp_edges` is set.
    """
    h, w, c = src.shape
    v = np.arange(out_h, dtype=np.float64) * row_scale + row_off
    u = np.arange(out_w, dtype=np.float64) * col_scale + col_off
    vf = np.floor(v)
    uf = np.floor(u)
    fy = v - vf
    fx = u - uf
    y0 = vf.astype(np.int64)
    x0 = uf.astype(np.int64)

    if clamp_edges:
        y0c = np.clip(y0, 0, h - 1)
        y1c = np.clip(y0 + 1, 0, h - 1)
        x0c = np.clip(x0, 0, w - 1)
        x1c = np.clip(x0 + 1, 0, w - 1)
        p00 = src[np.ix_(y0c, x0c)]
        p01 = src[np.ix_(y0c, x1c)]
        p10 = src[np.ix_(y1c, x0c)]
        p11 = src[np.ix_(y1c, x1c)]
    else:
        padded = np.zeros((h + 2, w + 2, c), dtype=np.float64)
        padded[1:-1, 1:-1] = src
        y0c = np.clip(y0, -1, h) + 1
        y1c = np.clip(y0 + 1, -1, h) + 1
        x0c = np.clip(x0, -1, w) + 1
        x1c = np.clip(x0 + 1, -1, w) + 1
        p00 = padded[np.ix_(y0c, x0c)]
        p01 = padded[np.ix_(y0c, x1c)]
        p10 = padded[np.ix_(y1c, x0c)]
        p11 = padded[np.ix_(y1c, x1c)]

    fx = fx[None, :, None]
    fy = fy[:, None, None]
    top = p00 * (1.0 - fx) + p01 * fx
    bot = p10 * (1.0 - fx) + p11 * fx
    return top * (1.0 - fy) + bot * fy


def diffuse_iterate(work, hole, max_iters, tol):
    """Jacobi-relax hole pixels of `work` (H, W, C float64) in place.

    Every hole pixel is repeatedly replaced by the average of its in-bounds
    4-neighbors (known pixels act as fixed boundary values).  Stops when the
    largest per-pixel change drops below `tol` or after `max_iters` sweeps.
    Returns the number of sweeps run.
    """
    h, w, c = work.shape
    hole_b = hole.astype(bool)
    hy, hx = np.nonzero(hole_b)
    if hy.size == 0:
        return 0

    padded = np.zeros((h + 2, w + 2, c), dtype=np.float64)
    ones = np.zeros((h + 2, w + 2), dtype=np.float64)
    ones[1:-1, 1:-1] = 1.0
    count = (
        ones[:-2, 1:-1] + ones[2:, 1:-1] + ones[1:-1, :-2] + ones[1:-1, 2:]
    )[hy, hx][:, None]

    iters = 0
    for _ in range(max_iters):
        iters += 1
        padded[1:-1, 1:-1] = work
        total = (
            padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:]
        )
        new_vals = total[hy, hx] / count
        delta = np.abs(new_vals - work[hy, hx]).max()
        work[hy, hx] = new_vals
        if delta < tol:
            break
    return iters
