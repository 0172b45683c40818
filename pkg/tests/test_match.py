"""Size samplers, the scale affine, and seeded substream behavior."""

from __future__ import annotations

import numpy as np
import pytest

from scalematch import (
    AffineTransform,
    CdfMapSampler,
    HistogramSampler,
    IdentitySampler,
    MatchMethod,
    RngStream,
    build_histogram,
    compute_affine,
    empirical_cdf,
    image_level_scale_factor,
    msm_map_size,
    pmf_on_bins,
    rsm_sample_target_size,
)
from scalematch.errors import ConfigError


class TestMatchMethod:
    def test_parse_canonical_names(self):
        assert MatchMethod.parse("rsm") is MatchMethod.RSM
        assert MatchMethod.parse("RSM+") is MatchMethod.RSM_PLUS
        assert MatchMethod.parse(" msm ") is MatchMethod.MSM
        assert MatchMethod.parse("msm+") is MatchMethod.MSM_PLUS
        assert MatchMethod.parse("cp") is MatchMethod.CP
        assert MatchMethod.parse("cp+") is MatchMethod.CP_PLUS

    def test_parse_unknown(self):
        with pytest.raises(ConfigError):
            MatchMethod.parse("bogus")

    def test_level_split(self):
        instance = {MatchMethod.RSM_PLUS, MatchMethod.MSM_PLUS, MatchMethod.CP, MatchMethod.CP_PLUS}
        for method in MatchMethod:
            assert method.instance_level == (method in instance)

    def test_identity_scale_methods(self):
        for method in MatchMethod:
            assert method.identity_scale == (method in {MatchMethod.CP, MatchMethod.CP_PLUS})

    def test_mask_requirements(self):
        for method in MatchMethod:
            assert method.needs_masks == method.instance_level

    def test_donor_annotations_only_for_cp_plus(self):
        for method in MatchMethod:
            assert method.keeps_donor_annotations == (method is MatchMethod.CP_PLUS)


class TestComputeAffine:
    def test_halving_about_center(self):
        t = compute_affine(10.0, 5.0, (100.0, 100.0))
        assert t.r == pytest.approx(0.5)
        assert t.t_x == pytest.approx(50.0)
        assert t.t_y == pytest.approx(50.0)

    def test_identity_when_sizes_match(self):
        t = compute_affine(7.0, 7.0, (33.0, 91.0))
        assert t.r == 1.0 and t.t_x == 0.0 and t.t_y == 0.0

    def test_upscale_offsets(self):
        t = compute_affine(8.0, 12.0, (40.0, 20.0))
        assert t.r == pytest.approx(1.5)
        assert t.t_x == pytest.approx(-20.0)
        assert t.t_y == pytest.approx(-10.0)

    def test_anchor_is_fixed_point(self, rng):
        for _ in range(200):
            s = float(rng.uniform(1, 50))
            s_hat = float(rng.uniform(1, 50))
            ax, ay = float(rng.uniform(0, 300)), float(rng.uniform(0, 300))
            t = compute_affine(s, s_hat, (ax, ay))
            bx, by = t.apply(ax, ay)
            assert abs(bx - ax) <= 1e-9 * max(1.0, abs(ax))
            assert abs(by - ay) <= 1e-9 * max(1.0, abs(ay))

    def test_size_ratio_preserved(self, rng):
        for _ in range(200):
            s = float(rng.uniform(1, 50))
            s_hat = float(rng.uniform(1, 50))
            t = compute_affine(s, s_hat, (10.0, 10.0))
            # two points separated by s map to points separated by s_hat
            x0, _ = t.apply(0.0, 0.0)
            x1, _ = t.apply(s, 0.0)
            assert abs((x1 - x0) - s_hat) <= 1e-9 * s_hat

    def test_nonpositive_sizes_rejected(self):
        with pytest.raises(ConfigError):
            compute_affine(0.0, 5.0, (0.0, 0.0))
        with pytest.raises(ConfigError):
            compute_affine(5.0, -1.0, (0.0, 0.0))

    def test_affine_scale_must_be_positive(self):
        with pytest.raises(ConfigError):
            AffineTransform(r=0.0, t_x=0.0, t_y=0.0)


class TestRsmSampling:
    def test_single_bin_stays_inside(self, rng):
        hist = build_histogram(np.array([8.0, 9.0, 11.0, 12.0]), 1)
        for _ in range(500):
            v = rsm_sample_target_size(hist, rng)
            assert 8.0 <= v <= 12.0

    def test_degenerate_histogram_returns_center(self, rng):
        hist = build_histogram(np.array([6.0, 6.0]), 4)
        draws = {round(rsm_sample_target_size(hist, rng), 6) for _ in range(50)}
        # the padded bin [5.5, 6.5] is the only support
        assert all(5.5 <= v <= 6.5 for v in draws)

    def test_bin_frequencies(self, rng):
        from scalematch.stats import ScaleHistogram

        hist = ScaleHistogram(
            boundaries=np.array([0.0, 10.0, 20.0]), prob=np.array([0.3, 0.7])
        )
        draws = np.array([rsm_sample_target_size(hist, rng) for _ in range(100_000)])
        low = float((draws < 10.0).mean())
        assert abs(low - 0.3) <= 0.01
        assert draws.min() >= 0.0 and draws.max() <= 20.0

    def test_recovered_pmf_linf(self, rng):
        sizes = rng.lognormal(2.5, 0.5, 4_000)
        hist = build_histogram(sizes, 12)
        draws = np.array([rsm_sample_target_size(hist, rng) for _ in range(120_000)])
        p = pmf_on_bins(draws, hist.boundaries)
        assert np.max(np.abs(p - hist.prob)) <= 0.01


class TestMsmMapping:
    def test_self_map_is_near_identity(self, rng):
        samples = np.sort(rng.uniform(5, 50, 300))
        cdf = empirical_cdf(samples)
        gap = float(np.diff(samples).max())
        for s in samples[5:-5:17]:
            assert abs(msm_map_size(float(s), cdf, cdf) - s) <= gap + 1e-9

    def test_doubling_law(self, rng):
        src = rng.uniform(0, 1, 20_000)
        cdf_src = empirical_cdf(src)
        cdf_tgt = empirical_cdf(2 * src)
        for s in np.linspace(0.05, 0.95, 19):
            assert abs(msm_map_size(float(s), cdf_src, cdf_tgt) - 2 * s) <= 0.05

    def test_below_minimum_clamps_to_target_minimum(self, rng):
        cdf_src = empirical_cdf(rng.uniform(10, 20, 100))
        tgt = rng.uniform(30, 40, 100)
        cdf_tgt = empirical_cdf(tgt)
        assert msm_map_size(1.0, cdf_src, cdf_tgt) == float(np.min(tgt))

    def test_monotone_fuzz(self, rng):
        cdf_src = empirical_cdf(rng.lognormal(1.0, 0.8, 1_000))
        cdf_tgt = empirical_cdf(rng.uniform(3, 90, 1_000))
        pairs = rng.uniform(0.5, 60, (10_000, 2))
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        for a, b in zip(lo, hi):
            assert msm_map_size(float(a), cdf_src, cdf_tgt) <= msm_map_size(
                float(b), cdf_src, cdf_tgt
            ) + 1e-12


class TestSamplers:
    def test_histogram_sampler_ignores_input_size(self, rng):
        hist = build_histogram(np.array([8.0, 9.0, 11.0, 12.0]), 1)
        sampler = HistogramSampler(hist)
        for s in (1.0, 50.0, 400.0):
            assert 8.0 <= sampler.target_size(s, rng) <= 12.0

    def test_cdf_sampler_matches_map(self, rng):
        src = rng.uniform(1, 10, 500)
        tgt = rng.uniform(5, 50, 500)
        cdf_src, cdf_tgt = empirical_cdf(src), empirical_cdf(tgt)
        sampler = CdfMapSampler(cdf_src, cdf_tgt)
        for s in (2.0, 5.0, 9.5):
            assert sampler.target_size(s, rng) == msm_map_size(s, cdf_src, cdf_tgt)

    def test_identity_sampler(self, rng):
        sampler = IdentitySampler()
        assert sampler.target_size(17.25, rng) == 17.25


class TestImageLevelFactor:
    def test_mean_size_rule(self, rng):
        hist = build_histogram(np.array([29.0, 30.0, 31.0]), 1)
        sampler = HistogramSampler(hist)
        f = image_level_scale_factor([6.0, 14.0], sampler, rng)
        # mean source size is 10, target draw stays within [29, 31]
        assert 2.9 <= f <= 3.1

    def test_empty_sizes_is_error(self, rng):
        sampler = IdentitySampler()
        with pytest.raises(ConfigError):
            image_level_scale_factor([], sampler, rng)

    def test_identity_sampler_gives_unit_factor(self, rng):
        f = image_level_scale_factor([4.0, 16.0], IdentitySampler(), rng)
        assert f == pytest.approx(1.0)


class TestRngStream:
    def test_same_key_same_draws(self):
        a = RngStream(7).stream(12, "instance", 3)
        b = RngStream(7).stream(12, "instance", 3)
        assert np.array_equal(a.random(16), b.random(16))

    def test_different_keys_decorrelate(self):
        root = RngStream(7)
        a = root.stream(12, "instance", 3).random(64)
        b = root.stream(12, "instance", 4).random(64)
        c = root.stream(13, "instance", 3).random(64)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_different_seeds_decorrelate(self):
        a = RngStream(1).stream(5, "background").random(64)
        b = RngStream(2).stream(5, "background").random(64)
        assert not np.array_equal(a, b)

    def test_schedule_invariance(self):
        # draws for one key are unaffected by when other streams were opened
        root = RngStream(99)
        other = root.stream(1, "image")
        other.random(100)
        late = root.stream(2, "instance", 0).random(8)
        fresh = RngStream(99).stream(2, "instance", 0).random(8)
        assert np.array_equal(late, fresh)

    def test_string_words_are_stable_across_processes(self):
        import subprocess
        import sys

        code = (
            "from scalematch import RngStream;"
            "print(RngStream(3).stream(8, 'background').random())"
        )
        out1 = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, check=True
        ).stdout
        out2 = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, check=True
        ).stdout
        assert out1 == out2
