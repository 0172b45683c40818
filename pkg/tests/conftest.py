"""Shared synthetic-dataset builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from scalematch import (
    ROLE_SOURCE,
    ROLE_TARGET,
    BBox,
    DatasetIndex,
    ImageRecord,
    InstanceRecord,
)

# One line per acceptance criterion, shown in the terminal summary so the
# pass/fail verdicts survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def record_criterion(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")


def square_polygon(x: float, y: float, w: float, h: float) -> list[list[float]]:
    return [[x, y, x + w, y, x + w, y + h, x, y + h]]


def make_instance(ann_id, image_id, x, y, w, h, category_id=1, with_mask=True):
    return InstanceRecord(
        id=ann_id,
        image_id=image_id,
        bbox=BBox(x, y, w, h),
        category_id=category_id,
        segmentation=square_polygon(x, y, w, h) if with_mask else None,
    )


def make_target_index(sizes) -> DatasetIndex:
    """Index whose instances have the given sizes (square boxes, masks absent)."""
    sizes = np.asarray(sizes, dtype=np.float64)
    span = int(np.ceil(sizes.max())) + 4
    images = {1: ImageRecord(id=1, file_name="t.png", width=span, height=span)}
    instances = {
        j: InstanceRecord(id=j, image_id=1, bbox=BBox(0.5, 0.5, float(s), float(s)), category_id=1)
        for j, s in enumerate(sizes, start=1)
    }
    return DatasetIndex(images=images, instances=instances, role=ROLE_TARGET)


def paint_square(raster: np.ndarray, x: int, y: int, side: int, color) -> None:
    raster[y : y + side, x : x + side] = color


def make_source_dataset(
    rng: np.random.Generator,
    num_images: int,
    instances_per_image,
    side_range: tuple[int, int],
    canvas: int = 96,
    background: int = 32,
    spread_exponents: tuple[float, ...] = (),
):
    """Synthetic source: colored axis-aligned squares on a flat background.

    instances_per_image may be an int or an inclusive (lo, hi) range.
    spread_exponents, when given, force the first instances of every image to
    sides base*2^e for each exponent e (a guaranteed per-image size spread).
    Returns (DatasetIndex, {image_id: raster}).
    """
    images, instances, rasters = {}, {}, {}
    ann_id = 1
    for image_id in range(1, num_images + 1):
        images[image_id] = ImageRecord(
            id=image_id, file_name=f"{image_id:05d}.png", width=canvas, height=canvas
        )
        raster = np.full((canvas, canvas, 3), background, dtype=np.uint8)
        if isinstance(instances_per_image, int):
            count = instances_per_image
        else:
            count = int(rng.integers(instances_per_image[0], instances_per_image[1] + 1))
        base = float(rng.uniform(*side_range))
        for k in range(count):
            if k < len(spread_exponents):
                side = max(int(round(base * 2.0 ** spread_exponents[k])), 2)
            else:
                side = int(rng.integers(max(side_range[0] // 2, 2), side_range[1] + 1))
            side = min(side, canvas - 2)
            x = int(rng.integers(0, canvas - side))
            y = int(rng.integers(0, canvas - side))
            color = tuple(int(c) for c in rng.integers(60, 250, 3))
            paint_square(raster, x, y, side, color)
            instances[ann_id] = make_instance(ann_id, image_id, x, y, side, side)
            ann_id += 1
        rasters[image_id] = raster
    index = DatasetIndex(images=images, instances=instances, role=ROLE_SOURCE)
    return index, rasters


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
