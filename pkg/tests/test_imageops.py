"""Matting, warping, inpainting, background prep, and compositing."""

from __future__ import annotations

import numpy as np
import pytest

from scalematch import (
    Background,
    InpaintParams,
    Matte,
    MattingParams,
    background_fit_transform,
    composite,
    compute_affine,
    extract_matte,
    inpaint,
    prepare_new_background,
    warp_matte,
)
from scalematch.errors import ConfigError, DegenerateWarp, EmptyMaskError, InpaintError
from scalematch.match import AffineTransform


def flat_image(h, w, color=(40, 90, 160)):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:] = color
    return img


def square_mask(h, w, y0, x0, side):
    m = np.zeros((h, w), dtype=bool)
    m[y0 : y0 + side, x0 : x0 + side] = True
    return m


class TestParams:
    def test_matting_validation(self):
        with pytest.raises(ConfigError):
            MattingParams(radius=-1)
        with pytest.raises(ConfigError):
            MattingParams(eps=0.0)
        MattingParams(radius=0)

    def test_inpaint_validation(self):
        with pytest.raises(ConfigError):
            InpaintParams(max_iters=0)
        with pytest.raises(ConfigError):
            InpaintParams(tol=-0.5)


class TestExtractMatte:
    def test_radius_zero_alpha_equals_mask(self):
        img = flat_image(30, 30)
        img[10:20, 10:20] = (250, 30, 30)
        mask = square_mask(30, 30, 10, 10, 10)
        matte = extract_matte(img, mask, MattingParams(radius=0))
        y0, x0 = matte.origin[1], matte.origin[0]
        sub = mask[y0 : y0 + matte.alpha.shape[0], x0 : x0 + matte.alpha.shape[1]]
        assert np.array_equal(matte.alpha > 0, sub)
        assert set(np.unique(matte.alpha)) <= {0.0, 1.0}

    def test_feathered_band_and_solid_interior(self):
        img = flat_image(40, 40, (10, 10, 10))
        img[8:28, 8:28] = (240, 240, 240)
        mask = square_mask(40, 40, 8, 8, 20)
        matte = extract_matte(img, mask, MattingParams(radius=2))
        a = matte.alpha
        assert a.min() >= 0.0 and a.max() <= 1.0
        # map mask into crop frame
        x0, y0 = matte.origin
        sub = mask[y0 : y0 + a.shape[0], x0 : x0 + a.shape[1]]
        from scipy.ndimage import distance_transform_edt

        d_in = distance_transform_edt(sub)
        d_out = distance_transform_edt(~sub)
        assert np.all(a[d_in > 2] == 1.0)
        assert np.all(a[d_out > 2] == 0.0)
        band = (d_in <= 2) & (d_out <= 2)
        assert band.any()
        assert a[band].std() > 0.0

    def test_crop_clipped_at_image_edge(self):
        img = flat_image(20, 20)
        mask = square_mask(20, 20, 0, 0, 6)
        matte = extract_matte(img, mask, MattingParams(radius=3))
        assert matte.origin == (0, 0)
        assert matte.alpha.shape[0] <= 20 and matte.alpha.shape[1] <= 20

    def test_empty_mask_is_error(self):
        img = flat_image(10, 10)
        with pytest.raises(EmptyMaskError):
            extract_matte(img, np.zeros((10, 10), dtype=bool), MattingParams())

    def test_mask_shape_mismatch(self):
        img = flat_image(10, 10)
        bad = np.zeros((9, 10), dtype=bool)
        bad[2:5, 2:5] = True
        with pytest.raises(ConfigError):
            extract_matte(img, bad, MattingParams())


class TestWarpMatte:
    def make_matte(self, side=12, color=(200, 60, 20)):
        img = flat_image(40, 40)
        img[10 : 10 + side, 14 : 14 + side] = color
        mask = square_mask(40, 40, 10, 14, side)
        return extract_matte(img, mask, MattingParams(radius=0))

    def test_identity_preserves_support_bytes(self):
        # output may be cropped tighter than the input, so compare in the
        # shared image frame over the alpha support
        matte = self.make_matte()
        out = warp_matte(matte, AffineTransform.identity())
        dx = out.origin[0] - matte.origin[0]
        dy = out.origin[1] - matte.origin[1]
        assert dx >= 0 and dy >= 0
        h, w = out.alpha.shape
        in_alpha = matte.alpha[dy : dy + h, dx : dx + w]
        in_raster = matte.raster[dy : dy + h, dx : dx + w]
        assert np.array_equal(out.alpha, in_alpha)
        sup = out.alpha > 0
        assert sup.any()
        assert np.array_equal(out.raster[sup], in_raster[sup])

    def test_halving_a_square(self):
        matte = self.make_matte(side=20)
        t = compute_affine(20.0, 10.0, (24.0, 20.0))
        out = warp_matte(matte, t)
        cover = out.alpha > 0.5
        h = int(cover.any(axis=1).sum())
        w = int(cover.any(axis=0).sum())
        assert abs(h - 10) <= 1 and abs(w - 10) <= 1

    def test_size_contract_fuzz(self, rng):
        for _ in range(40):
            side = int(rng.integers(6, 24))
            matte = self.make_matte(side=side)
            s_hat = float(rng.uniform(4, 40))
            t = compute_affine(float(side), s_hat, (20.0, 16.0))
            out = warp_matte(matte, t)
            cover = out.alpha > 0.5
            h = int(cover.any(axis=1).sum())
            w = int(cover.any(axis=0).sum())
            assert abs(h - s_hat) <= 1.0
            assert abs(w - s_hat) <= 1.0

    def test_sub_pixel_shrink_degenerates(self):
        matte = self.make_matte(side=10)
        t = compute_affine(10.0, 0.1, (19.0, 15.0))
        with pytest.raises(DegenerateWarp):
            warp_matte(matte, t)

    def test_interior_color_preserved(self):
        matte = self.make_matte(side=16, color=(200, 60, 20))
        t = compute_affine(16.0, 8.0, (22.0, 18.0))
        out = warp_matte(matte, t)
        solid = out.alpha >= 0.999
        assert solid.any()
        px = out.raster[solid]
        assert np.all(px == np.array([200, 60, 20], dtype=np.uint8))


class TestInpaint:
    def test_untouched_pixels_byte_identical(self, rng):
        img = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
        hole = square_mask(24, 24, 8, 8, 6)
        out = inpaint(Background(img, hole), InpaintParams())
        assert np.array_equal(out[~hole], img[~hole])

    def test_constant_background_fills_flat(self):
        img = flat_image(20, 20, (77, 120, 33))
        hole = square_mask(20, 20, 5, 5, 8)
        out = inpaint(Background(img, hole), InpaintParams())
        diff = np.abs(out[hole].astype(int) - np.array([77, 120, 33]))
        assert diff.max() <= 1

    def test_linear_gradient_is_recovered(self):
        # a linear ramp is harmonic, so diffusion should reproduce it
        h, w = 28, 28
        ramp = np.linspace(10, 240, w)
        img = np.repeat(ramp[None, :], h, axis=0)
        img = np.stack([img, img, img], axis=2).astype(np.uint8)
        hole = square_mask(h, w, 10, 10, 8)
        out = inpaint(Background(img, hole), InpaintParams(max_iters=4000, tol=0.01))
        diff = np.abs(out[hole].astype(int) - img[hole].astype(int))
        assert diff.max() <= 5

    def test_maximum_principle(self, rng):
        img = rng.integers(0, 256, (30, 30, 3), dtype=np.uint8)
        hole = square_mask(30, 30, 12, 9, 7)
        out = inpaint(Background(img, hole), InpaintParams())
        boundary = ~hole
        lo = img[boundary].min()
        hi = img[boundary].max()
        assert out[hole].min() >= lo
        assert out[hole].max() <= hi

    def test_empty_hole_returns_copy(self, rng):
        img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        out = inpaint(Background(img, np.zeros((16, 16), dtype=bool)), InpaintParams())
        assert np.array_equal(out, img)
        assert out is not img

    def test_full_hole_is_error(self):
        img = flat_image(8, 8)
        with pytest.raises(InpaintError):
            inpaint(Background(img, np.ones((8, 8), dtype=bool)), InpaintParams())


class TestBackgroundFit:
    def test_identity_dims(self):
        assert background_fit_transform((64, 48), (64, 48)) == (1.0, 0, 0)

    def test_wide_candidate_center_crop(self):
        scale, off_x, off_y = background_fit_transform((200, 100), (100, 100))
        assert scale == pytest.approx(1.0)
        assert off_x == 50 and off_y == 0

    def test_upscale_small_candidate(self):
        scale, off_x, off_y = background_fit_transform((50, 50), (100, 100))
        assert scale == pytest.approx(2.0)
        assert off_x == 0 and off_y == 0

    def test_degenerate_candidate(self):
        with pytest.raises(ConfigError):
            background_fit_transform((0, 10), (5, 5))


class TestPrepareNewBackground:
    def test_identity_short_circuit(self, rng):
        img = rng.integers(0, 256, (32, 48, 3), dtype=np.uint8)
        out = prepare_new_background(img, (48, 32))
        assert np.array_equal(out, img)
        assert out is not img

    def test_center_crop_of_wide_image(self):
        img = np.zeros((100, 200, 3), dtype=np.uint8)
        img[:, :50] = (255, 0, 0)
        img[:, 50:150] = (0, 255, 0)
        img[:, 150:] = (0, 0, 255)
        out = prepare_new_background(img, (100, 100))
        assert out.shape == (100, 100, 3)
        # the middle green stripe survives the center crop
        center = out[50, 50]
        assert tuple(center) == (0, 255, 0)

    def test_upscale_preserves_flat_color(self):
        img = flat_image(50, 50, (12, 200, 90))
        out = prepare_new_background(img, (100, 100))
        assert out.shape == (100, 100, 3)
        assert np.all(out == np.array([12, 200, 90], dtype=np.uint8))

    def test_output_dims_always_exact(self, rng):
        for _ in range(25):
            ch = int(rng.integers(8, 120))
            cw = int(rng.integers(8, 120))
            dh = int(rng.integers(8, 90))
            dw = int(rng.integers(8, 90))
            img = rng.integers(0, 256, (ch, cw, 3), dtype=np.uint8)
            out = prepare_new_background(img, (dw, dh))
            assert out.shape == (dh, dw, 3)


class TestComposite:
    def test_opaque_matte_replaces_pixels(self):
        bg = flat_image(20, 20, (0, 0, 0))
        fg = flat_image(5, 5, (255, 255, 255))
        matte = Matte(fg, np.ones((5, 5)), (3, 4))
        out = composite(bg, [matte])
        assert np.all(out[4:9, 3:8] == 255)
        assert np.all(out[:4] == 0)

    def test_zero_alpha_leaves_background(self):
        bg = flat_image(20, 20, (9, 9, 9))
        fg = flat_image(5, 5, (255, 255, 255))
        alpha = np.zeros((5, 5))
        alpha[0, 0] = 1e-9  # nonzero support so the matte constructs
        matte = Matte(fg, alpha, (3, 4))
        out = composite(bg, [matte])
        assert np.abs(out.astype(int) - 9).max() <= 1

    def test_overlap_later_wins(self):
        bg = flat_image(20, 20, (0, 0, 0))
        red = Matte(flat_image(6, 6, (255, 0, 0)), np.ones((6, 6)), (5, 5))
        blue = Matte(flat_image(6, 6, (0, 0, 255)), np.ones((6, 6)), (7, 7))
        out = composite(bg, [red, blue])
        assert tuple(out[8, 8]) == (0, 0, 255)
        assert tuple(out[6, 6]) == (255, 0, 0)

    def test_empty_list_byte_identical(self, rng):
        bg = rng.integers(0, 256, (12, 12, 3), dtype=np.uint8)
        out = composite(bg, [])
        assert np.array_equal(out, bg)
        assert out is not bg

    def test_partial_alpha_blends(self):
        bg = flat_image(10, 10, (0, 0, 0))
        fg = flat_image(4, 4, (200, 100, 50))
        matte = Matte(fg, np.full((4, 4), 0.5), (3, 3))
        out = composite(bg, [matte])
        assert tuple(out[4, 4]) == (100, 50, 25)

    def test_fully_outside_matte_warns_and_skips(self, rng):
        bg = rng.integers(0, 256, (10, 10, 3), dtype=np.uint8)
        matte = Matte(flat_image(4, 4, (1, 2, 3)), np.ones((4, 4)), (50, 50))
        with pytest.warns(UserWarning):
            out = composite(bg, [matte])
        assert np.array_equal(out, bg)

    def test_straddling_matte_clips(self):
        bg = flat_image(10, 10, (0, 0, 0))
        matte = Matte(flat_image(4, 4, (255, 255, 255)), np.ones((4, 4)), (8, 8))
        out = composite(bg, [matte])
        assert np.all(out[8:, 8:] == 255)
        assert np.all(out[:8, :8] == 0)
