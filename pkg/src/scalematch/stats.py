"""Scale histograms, empirical CDFs and the KL/JS divergences used to score
how well two object-size distributions line up.

All divergences use natural logarithms, so the JS maximum is ln 2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyDatasetError
from .model import DatasetIndex, object_size

LAYOUT_EQUAL_WIDTH = "equal-width"
LAYOUT_EQUAL_FREQUENCY = "equal-frequency"

# Additive floor applied to q-bins that p occupies but q leaves empty; far
# below print precision, so reported divergences are unaffected.
_KL_EPS = 1e-12


@dataclass(frozen=True)
class ScaleHistogram:
    """Discrete size histogram: K bins with boundaries[k] <= s < boundaries[k+1].

    Boundaries are ascending (a zero-width bin is tolerated only for the
    degenerate all-sizes-identical case); probabilities are non-negative and
    sum to one.
    """

    boundaries: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "boundaries", np.asarray(self.boundaries, dtype=np.float64))
        object.__setattr__(self, "prob", np.asarray(self.prob, dtype=np.float64))
        if self.boundaries.ndim != 1 or self.boundaries.size < 2:
            raise ConfigError("histogram needs at least one bin")
        if self.prob.shape != (self.boundaries.size - 1,):
            raise ConfigError("prob length must equal bin count")
        if np.any(np.diff(self.boundaries) < 0):
            raise ConfigError("histogram boundaries must be ascending")
        if np.any(self.prob < 0):
            raise ConfigError("histogram probabilities must be non-negative")
        if abs(float(self.prob.sum()) - 1.0) > 1e-9:
            raise ConfigError(f"histogram mass is {self.prob.sum()}, expected 1")

    @property
    def num_bins(self) -> int:
        return self.prob.size


class EmpiricalCdf:
    """Right-continuous step CDF of a size sample, with a piecewise-linear
    inverse interpolated between order statistics."""

    def __init__(self, sizes):
        sizes = np.asarray(sizes, dtype=np.float64)
        if sizes.size == 0:
            raise EmptyDatasetError("empirical CDF needs at least one sample")
        self.samples = np.sort(sizes)
        self._grid = np.linspace(0.0, 1.0, self.samples.size)

    def __call__(self, s):
        frac = np.searchsorted(self.samples, s, side="right") / self.samples.size
        return float(frac) if np.isscalar(s) else frac

    def inverse(self, u):
        u_arr = np.asarray(u, dtype=np.float64)
        if np.any(u_arr < 0) or np.any(u_arr > 1):
            raise ConfigError("quantile argument must lie in [0, 1]")
        if self.samples.size == 1:
            out = np.full_like(u_arr, self.samples[0])
        else:
            out = np.interp(u_arr, self._grid, self.samples)
        return float(out) if np.isscalar(u) else out


@dataclass
class DivergenceReport:
    """KL (both directions) and JS between two size samples on shared bins."""

    kl_forward: float
    kl_backward: float
    js: float
    boundaries: np.ndarray
    prob_source: np.ndarray
    prob_target: np.ndarray

    def to_dict(self) -> dict:
        return {
            "kl_forward": self.kl_forward,
            "kl_backward": self.kl_backward,
            "js": self.js,
            "boundaries": [float(b) for b in self.boundaries],
            "prob_source": [float(p) for p in self.prob_source],
            "prob_target": [float(p) for p in self.prob_target],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DivergenceReport":
        return cls(
            kl_forward=float(d["kl_forward"]),
            kl_backward=float(d["kl_backward"]),
            js=float(d["js"]),
            boundaries=np.asarray(d["boundaries"], dtype=np.float64),
            prob_source=np.asarray(d["prob_source"], dtype=np.float64),
            prob_target=np.asarray(d["prob_target"], dtype=np.float64),
        )

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lo", "bin_hi", "prob_source", "prob_target"])
            for k in range(self.prob_source.size):
                writer.writerow(
                    [
                        repr(float(self.boundaries[k])),
                        repr(float(self.boundaries[k + 1])),
                        repr(float(self.prob_source[k])),
                        repr(float(self.prob_target[k])),
                    ]
                )


def collect_sizes(index: DatasetIndex) -> np.ndarray:
    """One size per instance, in annotation-id order."""
    if not index.instances:
        raise EmptyDatasetError("dataset has no annotations to measure")
    ids = sorted(index.instances)
    return np.array([object_size(index.instances[i].bbox) for i in ids], dtype=np.float64)


def rectify_sizes(sizes, tail_quantile: float) -> np.ndarray:
    """Trim sizes strictly above the tail_quantile empirical quantile.

    tail_quantile=1 keeps the sample unchanged; values must lie in (0.5, 1].
    """
    if not (0.5 < tail_quantile <= 1.0):
        raise ConfigError(f"tail_quantile must lie in (0.5, 1], got {tail_quantile}")
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise EmptyDatasetError("cannot rectify an empty size sample")
    if tail_quantile == 1.0:
        return sizes.copy()
    cutoff = np.quantile(sizes, tail_quantile)
    return sizes[sizes <= cutoff]


def _degenerate_histogram(value: float) -> ScaleHistogram:
    return ScaleHistogram(
        boundaries=np.array([value - 0.5, value + 0.5]), prob=np.array([1.0])
    )


def build_histogram(sizes, num_bins: int, layout: str = LAYOUT_EQUAL_WIDTH) -> ScaleHistogram:
    """Build a K-bin histogram spanning [min, max] of the sizes.

    Bins are half-open with the last bin closed.  When all sizes coincide the
    result is a single bin of width 1 centered on the value.
    """
    if num_bins < 1:
        raise ConfigError(f"bin count must be >= 1, got {num_bins}")
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise EmptyDatasetError("cannot build a histogram from an empty sample")

    lo, hi = float(sizes.min()), float(sizes.max())
    if lo == hi:
        return _degenerate_histogram(lo)

    if layout == LAYOUT_EQUAL_WIDTH:
        boundaries = np.linspace(lo, hi, num_bins + 1)
    elif layout == LAYOUT_EQUAL_FREQUENCY:
        if sizes.size < num_bins:
            raise ConfigError(
                f"equal-frequency layout needs at least {num_bins} samples, got {sizes.size}"
            )
        boundaries = np.quantile(sizes, np.linspace(0.0, 1.0, num_bins + 1))
        boundaries = np.unique(boundaries)  # ties collapse bins
        if boundaries.size < 2:
            return _degenerate_histogram(lo)
    else:
        raise ConfigError(f"unknown histogram layout {layout!r}")

    counts, _ = np.histogram(sizes, bins=boundaries)
    return ScaleHistogram(boundaries=boundaries, prob=counts / sizes.size)


def pmf_on_bins(sizes, boundaries) -> np.ndarray:
    """Probability mass of the sizes over the given bin boundaries.

    Out-of-range sizes are clamped into the end bins, so the result always
    sums to one.
    """
    boundaries = np.asarray(boundaries, dtype=np.float64)
    if np.any(np.diff(boundaries) < 0):
        raise ConfigError("bin boundaries must be ascending")
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise EmptyDatasetError("cannot compute a PMF from an empty sample")
    clamped = np.clip(sizes, boundaries[0], boundaries[-1])
    counts, _ = np.histogram(clamped, bins=boundaries)
    return counts / sizes.size


def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ConfigError(f"probability vectors differ in length: {p.shape} vs {q.shape}")
    for name, vec in (("p", p), ("q", q)):
        if np.any(vec < 0):
            raise ConfigError(f"{name} has negative entries")
        if abs(float(vec.sum()) - 1.0) > 1e-6:
            raise ConfigError(f"{name} sums to {vec.sum()}, expected 1")
    return p, q


def _kl_raw(p: np.ndarray, q: np.ndarray) -> float:
    support = p > 0
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence sum(p * ln(p/q)), in nats.

    Bins where p > 0 but q = 0 get an additive 1e-12 floor on q (renormalized)
    so empty bins never produce infinities.
    """
    p, q = _check_pair(p, q)
    starved = (p > 0) & (q == 0)
    if starved.any():
        q = q.copy()
        q[starved] = _KL_EPS
        q = q / q.sum()
    return _kl_raw(p, q)


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence in nats: symmetric, bounded by ln 2."""
    p, q = _check_pair(p, q)
    m = (p + q) / 2.0
    return 0.5 * _kl_raw(p, m) + 0.5 * _kl_raw(q, m)


def empirical_cdf(sizes) -> EmpiricalCdf:
    return EmpiricalCdf(sizes)


def inverse_cdf(cdf: EmpiricalCdf, u):
    return cdf.inverse(u)


def common_boundaries(sizes_a, sizes_b, num_bins: int, layout: str = LAYOUT_EQUAL_WIDTH) -> np.ndarray:
    """Shared bin layout spanning the union support of two samples."""
    union = np.concatenate([np.asarray(sizes_a, dtype=np.float64), np.asarray(sizes_b, dtype=np.float64)])
    return build_histogram(union, num_bins, layout).boundaries


def compare_sizes(
    sizes_source,
    sizes_target,
    num_bins: int = 100,
    layout: str = LAYOUT_EQUAL_WIDTH,
) -> DivergenceReport:
    """Divergence report between two size samples on a common bin layout."""
    boundaries = common_boundaries(sizes_source, sizes_target, num_bins, layout)
    p = pmf_on_bins(sizes_source, boundaries)
    q = pmf_on_bins(sizes_target, boundaries)
    return DivergenceReport(
        kl_forward=kl_divergence(p, q),
        kl_backward=kl_divergence(q, p),
        js=js_divergence(p, q),
        boundaries=boundaries,
        prob_source=p,
        prob_target=q,
    )


def compare_indices(
    source: DatasetIndex,
    target: DatasetIndex,
    num_bins: int = 100,
    layout: str = LAYOUT_EQUAL_WIDTH,
) -> DivergenceReport:
    return compare_sizes(collect_sizes(source), collect_sizes(target), num_bins, layout)
