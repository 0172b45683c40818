"""Size samplers (random-histogram and monotone CDF-map, at image or
instance granularity), the scale/shift transform they induce, and the
deterministic RNG substreams that keep runs schedule-invariant.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .stats import EmpiricalCdf, ScaleHistogram


class MatchMethod(enum.Enum):
    RSM = "rsm"
    MSM = "msm"
    RSM_PLUS = "rsm+"
    MSM_PLUS = "msm+"
    CP = "cp"
    CP_PLUS = "cp+"

    @classmethod
    def parse(cls, name: str) -> "MatchMethod":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown method {name!r}; valid methods: {valid}") from None

    @property
    def instance_level(self) -> bool:
        """Image-level methods scale whole images; everything else scales per instance."""
        return self not in (MatchMethod.RSM, MatchMethod.MSM)

    @property
    def identity_scale(self) -> bool:
        """Copy-paste variants keep every instance at its original size."""
        return self in (MatchMethod.CP, MatchMethod.CP_PLUS)

    @property
    def needs_masks(self) -> bool:
        return self.instance_level

    @property
    def keeps_donor_annotations(self) -> bool:
        return self is MatchMethod.CP_PLUS


@dataclass(frozen=True)
class AffineTransform:
    """Uniform scale r about the origin followed by a (t_x, t_y) shift."""

    r: float
    t_x: float
    t_y: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise ConfigError(f"scale ratio must be finite and positive, got {self.r}")

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return (self.r * x + self.t_x, self.r * y + self.t_y)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(1.0, 0.0, 0.0)


def _entropy_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """Seeded factory of independent random substreams.

    A substream is addressed by a key tuple (e.g. image id, instance ordinal);
    the same (seed, key) always yields the same draw sequence, no matter which
    worker asks first.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, *key) -> np.random.Generator:
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF] + [_entropy_word(p) for p in key]
        return np.random.default_rng(np.random.SeedSequence(entropy))


def rsm_sample_target_size(hist: ScaleHistogram, rng: np.random.Generator) -> float:
    """Draw a bin by histogram mass, then a size uniformly inside the bin."""
    k = int(rng.choice(hist.num_bins, p=hist.prob))
    return float(rng.uniform(hist.boundaries[k], hist.boundaries[k + 1]))


def msm_map_size(s: float, cdf_source: EmpiricalCdf, cdf_target: EmpiricalCdf) -> float:
    """Monotone map: push s through the source CDF, pull back through the
    target inverse CDF.  Clamped to the target's observed range."""
    return float(cdf_target.inverse(cdf_source(s)))


def compute_affine(s: float, s_hat: float, anchor: tuple[float, float]) -> AffineTransform:
    """Transform scaling size s to s_hat while keeping `anchor` fixed."""
    if s <= 0 or s_hat <= 0:
        raise ConfigError(f"sizes must be positive, got {s} -> {s_hat}")
    r = s_hat / s
    cx, cy = anchor
    return AffineTransform(r=r, t_x=cx * (1.0 - r), t_y=cy * (1.0 - r))


class HistogramSampler:
    """Random scale match: the target size is drawn from the histogram,
    independent of the source size."""

    def __init__(self, hist: ScaleHistogram):
        self.hist = hist

    def target_size(self, s: float, rng: np.random.Generator) -> float:
        return rsm_sample_target_size(self.hist, rng)


class CdfMapSampler:
    """Monotone scale match: source size maps through F_target^-1(F_source(s))."""

    def __init__(self, cdf_source: EmpiricalCdf, cdf_target: EmpiricalCdf):
        self.cdf_source = cdf_source
        self.cdf_target = cdf_target

    def target_size(self, s: float, rng: np.random.Generator) -> float:
        return msm_map_size(s, self.cdf_source, self.cdf_target)


class IdentitySampler:
    """Copy-paste: sizes pass through unchanged."""

    def target_size(self, s: float, rng: np.random.Generator) -> float:
        return s


def image_level_scale_factor(sizes, sampler, rng: np.random.Generator) -> float:
    """One factor for a whole image: match the mean object size, then scale
    everything by matched/mean."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise ConfigError("image has no instances to size")
    mean = float(sizes.mean())
    return sampler.target_size(mean, rng) / mean
