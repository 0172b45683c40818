"""Pixel-level machinery: matte extraction with edge-aware feathering,
affine warping, diffusion inpainting, donor-background preparation and
alpha compositing.

Rasters are (H, W, 3) uint8 arrays; alpha masks are (H, W) float64 in [0, 1].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from . import _kernels
from .errors import ConfigError, DegenerateWarp, EmptyMaskError, InpaintError
from .match import AffineTransform

_SUPPORT_EPS = 1e-12  # alpha above this counts as covered


@dataclass(frozen=True)
class MattingParams:
    """Feathering controls: guided-filter window radius and regularization."""

    radius: int = 4
    eps: float = 1e-4

    def __post_init__(self):
        if self.radius < 0:
            raise ConfigError(f"matting radius must be >= 0, got {self.radius}")
        if self.eps <= 0:
            raise ConfigError(f"matting eps must be > 0, got {self.eps}")


@dataclass(frozen=True)
class InpaintParams:
    """Diffusion stopping rule: sweep cap and per-pixel change tolerance."""

    max_iters: int = 500
    tol: float = 0.1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")


@dataclass
class Matte:
    """An instance cutout: raster crop, matching alpha, and the crop's
    top-left corner (x, y) in the source image frame."""

    raster: np.ndarray
    alpha: np.ndarray
    origin: tuple[int, int]

    def __post_init__(self):
        if self.raster.shape[:2] != self.alpha.shape:
            raise ConfigError(
                f"matte raster {self.raster.shape[:2]} and alpha {self.alpha.shape} disagree"
            )
        if not (self.alpha > _SUPPORT_EPS).any():
            raise EmptyMaskError("matte has empty alpha support")


@dataclass
class Background:
    """A full-size raster plus the binary hole mask of removed instances."""

    raster: np.ndarray
    hole: np.ndarray

    def __post_init__(self):
        if self.raster.shape[:2] != self.hole.shape:
            raise ConfigError(
                f"background raster {self.raster.shape[:2]} and hole {self.hole.shape} disagree"
            )


def _box_sum(img: np.ndarray, radius: int) -> np.ndarray:
    """Sum of each (2r+1)^2 window, truncated at the borders."""
    h, w = img.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.float64)
    ii[1:, 1:] = img.cumsum(axis=0).cumsum(axis=1)
    r0 = np.clip(np.arange(h) - radius, 0, h)
    r1 = np.clip(np.arange(h) + radius + 1, 0, h)
    c0 = np.clip(np.arange(w) - radius, 0, w)
    c1 = np.clip(np.arange(w) + radius + 1, 0, w)
    return ii[np.ix_(r1, c1)] - ii[np.ix_(r0, c1)] - ii[np.ix_(r1, c0)] + ii[np.ix_(r0, c0)]


def guided_filter(guide: np.ndarray, src: np.ndarray, radius: int, eps: float) -> np.ndarray:
    """Edge-preserving smoothing of `src` steered by `guide` (both 2-D float)."""
    n = _box_sum(np.ones_like(guide), radius)
    mean_i = _box_sum(guide, radius) / n
    mean_p = _box_sum(src, radius) / n
    cov_ip = _box_sum(guide * src, radius) / n - mean_i * mean_p
    var_i = _box_sum(guide * guide, radius) / n - mean_i * mean_i
    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i
    return (_box_sum(a, radius) / n) * guide + _box_sum(b, radius) / n


def extract_matte(image: np.ndarray, mask: np.ndarray, params: MattingParams) -> Matte:
    """Cut an instance out of `image` with a feathered alpha edge.

    The binary mask is smoothed by a guided filter over the image luminance;
    pixels deeper than `radius` inside the mask keep alpha 1, pixels farther
    than `radius` outside stay 0.  radius=0 returns the binary mask as-is.
    """
    mask_b = np.asarray(mask).astype(bool)
    if mask_b.shape != image.shape[:2]:
        raise ConfigError(
            f"mask {mask_b.shape} does not match image {image.shape[:2]}"
        )
    if not mask_b.any():
        raise EmptyMaskError("cannot extract a matte from an empty mask")
    h, w = mask_b.shape

    rows = np.flatnonzero(mask_b.any(axis=1))
    cols = np.flatnonzero(mask_b.any(axis=0))
    pad = params.radius + 2
    y0 = max(int(rows[0]) - pad, 0)
    y1 = min(int(rows[-1]) + 1 + pad, h)
    x0 = max(int(cols[0]) - pad, 0)
    x1 = min(int(cols[-1]) + 1 + pad, w)

    crop = image[y0:y1, x0:x1]
    m = mask_b[y0:y1, x0:x1].astype(np.float64)

    if params.radius == 0:
        alpha = m
    else:
        lum = crop.astype(np.float64) @ np.array([0.299, 0.587, 0.114]) / 255.0
        alpha = np.clip(guided_filter(lum, m, params.radius, params.eps), 0.0, 1.0)
        inside = distance_transform_edt(m > 0)
        outside = distance_transform_edt(m == 0)
        alpha[inside > params.radius] = 1.0
        alpha[outside > params.radius] = 0.0

    return Matte(raster=crop.copy(), alpha=alpha, origin=(x0, y0))


def warp_matte(matte: Matte, transform: AffineTransform) -> Matte:
    """Resample a matte through a scale/shift transform.

    Colors are interpolated premultiplied by alpha, then the result is
    tight-cropped to its alpha support.  Raises DegenerateWarp when the
    support collapses below one pixel.
    """
    ox, oy = matte.origin
    ch, cw = matte.alpha.shape
    r, tx, ty = transform.r, transform.t_x, transform.t_y

    covered_in = matte.alpha > _SUPPORT_EPS
    sup_h = int(covered_in.any(axis=1).sum())
    sup_w = int(covered_in.any(axis=0).sum())
    # below half a pixel the point-sampled support may alias onto a stray
    # pixel or vanish depending on phase; treat both as collapse
    if r * sup_w < 0.5 or r * sup_h < 0.5:
        raise DegenerateWarp("warped support is below one pixel")

    out_x0 = math.floor(r * ox + tx)
    out_y0 = math.floor(r * oy + ty)
    out_x1 = math.ceil(r * (ox + cw) + tx)
    out_y1 = math.ceil(r * (oy + ch) + ty)
    out_w = out_x1 - out_x0
    out_h = out_y1 - out_y0
    if out_w < 1 or out_h < 1:
        raise DegenerateWarp("warped support is below one pixel")

    src = np.empty((ch, cw, 4), dtype=np.float64)
    src[:, :, :3] = matte.raster.astype(np.float64) * matte.alpha[:, :, None]
    src[:, :, 3] = matte.alpha

    inv = 1.0 / r
    col_off = (out_x0 + 0.5 - tx) * inv - ox - 0.5
    row_off = (out_y0 + 0.5 - ty) * inv - oy - 0.5
    warped = _kernels.warp_bilinear(src, out_h, out_w, inv, row_off, inv, col_off, False)

    alpha = warped[:, :, 3]
    covered = alpha > _SUPPORT_EPS
    if not covered.any():
        raise DegenerateWarp("warped support is empty")
    rows = np.flatnonzero(covered.any(axis=1))
    cols = np.flatnonzero(covered.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1

    alpha = np.clip(alpha[r0:r1, c0:c1], 0.0, 1.0)
    rgb = warped[r0:r1, c0:c1, :3]
    safe = np.maximum(alpha, _SUPPORT_EPS)[:, :, None]
    raster = np.clip(np.rint(rgb / safe), 0, 255).astype(np.uint8)
    raster[alpha <= _SUPPORT_EPS] = 0

    return Matte(raster=raster, alpha=alpha, origin=(out_x0 + c0, out_y0 + r0))


def inpaint(bg: Background, params: InpaintParams) -> np.ndarray:
    """Fill hole pixels by diffusion from the hole boundary.

    Hole pixels start from the mean boundary color and relax toward the
    harmonic fill; all non-hole pixels are returned bit-identical.
    """
    hole = np.asarray(bg.hole).astype(bool)
    out = np.asarray(bg.raster).copy()
    if not hole.any():
        return out
    if hole.all():
        raise InpaintError("hole covers the whole image; nothing to diffuse from")

    shifted = np.zeros_like(hole)
    shifted[1:, :] |= hole[:-1, :]
    shifted[:-1, :] |= hole[1:, :]
    shifted[:, 1:] |= hole[:, :-1]
    shifted[:, :-1] |= hole[:, 1:]
    boundary = shifted & ~hole

    work = out.astype(np.float64)
    if boundary.any():
        work[hole] = work[boundary].mean(axis=0)
    _kernels.diffuse_iterate(work, hole.astype(np.uint8), params.max_iters, params.tol)

    out[hole] = np.clip(np.rint(work[hole]), 0, 255).astype(np.uint8)
    return out


def background_fit_transform(candidate_dims: tuple[int, int], dims: tuple[int, int]):
    """Scale factor and crop offsets mapping a candidate image onto `dims`.

    Both are (width, height).  The candidate is scaled uniformly so its short
    side covers the requested frame, then center-cropped; a candidate point
    (x, y) lands at (x*scale - off_x, y*scale - off_y).
    """
    cw, ch = candidate_dims
    dw, dh = dims
    if cw < 1 or ch < 1:
        raise ConfigError(f"candidate image is degenerate: {cw}x{ch}")
    scale = max(dw / cw, dh / ch)
    rw = max(int(round(cw * scale)), dw)
    rh = max(int(round(ch * scale)), dh)
    off_x = (rw - dw) // 2
    off_y = (rh - dh) // 2
    return scale, off_x, off_y


def prepare_new_background(candidate: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Resize (aspect-preserving, covering) and center-crop a donor image to
    exactly `dims` = (width, height)."""
    dw, dh = dims
    ch, cw = candidate.shape[:2]
    if (cw, ch) == (dw, dh):
        return np.asarray(candidate).copy()
    scale, off_x, off_y = background_fit_transform((cw, ch), dims)

    inv = 1.0 / scale
    row_off = (0.5 + off_y) * inv - 0.5
    col_off = (0.5 + off_x) * inv - 0.5
    out = _kernels.warp_bilinear(
        candidate.astype(np.float64), dh, dw, inv, row_off, inv, col_off, True
    )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def composite(background: np.ndarray, mattes) -> np.ndarray:
    """Alpha-over each matte onto the background, in the given order.

    Mattes lying entirely outside the frame are skipped; everything outside
    the pasted supports is returned untouched.
    """
    out = np.asarray(background).copy()
    h, w = out.shape[:2]
    for matte in mattes:
        mx, my = matte.origin
        mh, mw = matte.alpha.shape
        x0, y0 = max(mx, 0), max(my, 0)
        x1, y1 = min(mx + mw, w), min(my + mh, h)
        if x1 <= x0 or y1 <= y0:
            warnings.warn(f"matte at {matte.origin} lies entirely outside the frame; skipped")
            continue
        a = matte.alpha[y0 - my : y1 - my, x0 - mx : x1 - mx][:, :, None]
        fg = matte.raster[y0 - my : y1 - my, x0 - mx : x1 - mx].astype(np.float64)
        region = out[y0:y1, x0:x1].astype(np.float64)
        blended = a * fg + (1.0 - a) * region
        out[y0:y1, x0:x1] = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    return out
