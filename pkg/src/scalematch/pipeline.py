"""Dataset-level orchestration: per-image transforms, probabilistic
background selection, annotation rewriting, and the alignment report.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DegenerateWarp, EmptyMaskError, PipelineError
from .imageops import (
    Background,
    InpaintParams,
    MattingParams,
    background_fit_transform,
    composite,
    extract_matte,
    inpaint,
    prepare_new_background,
    warp_matte,
)
from .match import (
    AffineTransform,
    CdfMapSampler,
    HistogramSampler,
    IdentitySampler,
    MatchMethod,
    RngStream,
    compute_affine,
    image_level_scale_factor,
)
from .model import (
    ROLE_TARGET,
    BBox,
    DatasetIndex,
    ImageRecord,
    InstanceRecord,
    decode_rle,
    encode_rle,
    load_image,
    object_size,
    rasterize_mask,
)
from .stats import (
    LAYOUT_EQUAL_FREQUENCY,
    LAYOUT_EQUAL_WIDTH,
    DivergenceReport,
    EmpiricalCdf,
    build_histogram,
    collect_sizes,
    compare_sizes,
    rectify_sizes,
)

PROVENANCE_INPAINTED = "inpainted"
PROVENANCE_SWAPPED = "swapped"
PROVENANCE_UNCHANGED = "unchanged"

_FAILURE_BUDGET = 0.1  # abort the run when more than this fraction of images fail
_MIN_VISIBLE_AREA = 1.0  # px^2 left after clipping, below which an instance is dropped


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a dataset transform needs besides the datasets themselves."""

    method: MatchMethod
    psi_p: float = 0.4
    bins: int = 100
    tail_quantile: float = 0.99
    seed: int = 0
    layout: str = LAYOUT_EQUAL_WIDTH
    matting: MattingParams = MattingParams()
    inpaint: InpaintParams = InpaintParams()

    def __post_init__(self):
        if isinstance(self.method, str):
            object.__setattr__(self, "method", MatchMethod.parse(self.method))
        if not 0.0 <= self.psi_p <= 1.0:
            raise ConfigError(f"psi_p must lie in [0, 1], got {self.psi_p}")
        if self.bins < 1:
            raise ConfigError(f"bin count must be >= 1, got {self.bins}")
        if not 0.5 < self.tail_quantile <= 1.0:
            raise ConfigError(f"tail_quantile must lie in (0.5, 1], got {self.tail_quantile}")
        if self.layout not in (LAYOUT_EQUAL_WIDTH, LAYOUT_EQUAL_FREQUENCY):
            raise ConfigError(f"unknown histogram layout {self.layout!r}")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "psi_p": self.psi_p,
            "bins": self.bins,
            "tail_quantile": self.tail_quantile,
            "seed": self.seed,
            "layout": self.layout,
            "matting_radius": self.matting.radius,
            "matting_eps": self.matting.eps,
            "inpaint_max_iters": self.inpaint.max_iters,
            "inpaint_tol": self.inpaint.tol,
        }


@dataclass(frozen=True)
class InstanceScaleRecord:
    """One instance's trip through the matcher: original size, sampled size,
    applied factor, and whether it survived clipping."""

    instance_id: int
    s: float
    s_hat: float | None
    r: float | None
    kept: bool

    def to_dict(self, image_id: int) -> dict:
        return {
            "image_id": image_id,
            "instance_id": self.instance_id,
            "s": self.s,
            "s_hat": self.s_hat,
            "r": self.r,
            "kept": self.kept,
        }


@dataclass
class TransformOutcome:
    """Result of transforming a single image."""

    image: ImageRecord
    raster: np.ndarray
    provenance: str
    donor_id: int | None
    annotations: list[InstanceRecord]
    scale_log: list[InstanceScaleRecord]


@dataclass
class TransformReport:
    """Run summary: config echo, before/after divergence vs the target,
    background swap rate, drop count, per-image errors, per-instance log."""

    method: str
    config: dict
    before: DivergenceReport
    after: DivergenceReport | None
    swap_fraction: float
    dropped_instances: int
    errors: list[dict] = field(default_factory=list)
    scale_log: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "psi_p": self.config.get("psi_p"),
            "config": self.config,
            "before": self.before.to_dict(),
            "after": self.after.to_dict() if self.after is not None else None,
            "swap_fraction": self.swap_fraction,
            "dropped_instances": self.dropped_instances,
            "errors": self.errors,
            "scale_log": self.scale_log,
        }

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


@dataclass
class TransformResult:
    index: DatasetIndex
    report: TransformReport
    images: dict[int, np.ndarray] | None


def psi_select_background(
    rng: np.random.Generator,
    psi_p: float,
    background: Background,
    pool: Sequence[int],
    params: InpaintParams = InpaintParams(),
):
    """Decide between the diffusion-filled own background and a donor image.

    Draws u in [0, 1): u > psi_p selects a donor id uniformly from `pool`;
    otherwise the hole is inpainted.  Keeping the original (inpainted)
    background therefore has probability psi_p.  Returns (choice, provenance)
    where choice is the filled raster or the donor image id.
    """
    if not 0.0 <= psi_p <= 1.0:
        raise ConfigError(f"psi_p must lie in [0, 1], got {psi_p}")
    if psi_p < 1.0 and len(pool) == 0:
        raise ConfigError("background swapping needs at least one other image in the dataset")
    u = float(rng.random())
    if u > psi_p:
        donor = int(pool[int(rng.integers(len(pool)))])
        return donor, PROVENANCE_SWAPPED
    return inpaint(background, params), PROVENANCE_INPAINTED


def _transform_polygons(seg: list, affine: AffineTransform, dims: tuple[int, int]) -> list:
    """Map polygon vertices through the affine, clamped into the frame."""
    w, h = dims
    out = []
    for flat in seg:
        pts = np.asarray(flat, dtype=np.float64).reshape(-1, 2)
        xs = np.clip(affine.r * pts[:, 0] + affine.t_x, 0.0, w)
        ys = np.clip(affine.r * pts[:, 1] + affine.t_y, 0.0, h)
        out.append(np.stack([xs, ys], axis=1).reshape(-1).tolist())
    return out


def _warp_mask_rle(mask: np.ndarray, affine: AffineTransform, dims: tuple[int, int]) -> dict:
    """Resample a binary mask through the affine and re-encode it.

    The label mask is the geometric transform of the original mask; the
    feathered compositing alpha never leaks into annotations.
    """
    from . import _kernels

    w, h = dims
    inv = 1.0 / affine.r
    row_off = (0.5 - affine.t_y) * inv - 0.5
    col_off = (0.5 - affine.t_x) * inv - 0.5
    warped = _kernels.warp_bilinear(
        mask.astype(np.float64)[:, :, None], h, w, inv, row_off, inv, col_off, False
    )[:, :, 0]
    return encode_rle(warped >= 0.5)


def _rewrite_segmentation(inst: InstanceRecord, affine: AffineTransform, src_dims, out_dims):
    """Transform an instance's segmentation; polygons stay polygons, RLE is
    re-encoded from the resampled mask."""
    if isinstance(inst.segmentation, dict):
        mask = decode_rle(inst.segmentation)
        return _warp_mask_rle(mask, affine, out_dims)
    if inst.segmentation:
        return _transform_polygons(inst.segmentation, affine, out_dims)
    return None


def _clip_bbox(x: float, y: float, w: float, h: float, dims: tuple[int, int]) -> BBox | None:
    """Clip a box to the frame; None when less than one visible pixel remains."""
    fw, fh = dims
    x0, y0 = max(x, 0.0), max(y, 0.0)
    x1, y1 = min(x + w, float(fw)), min(y + h, float(fh))
    if x1 - x0 <= 0 or y1 - y0 <= 0 or (x1 - x0) * (y1 - y0) < _MIN_VISIBLE_AREA:
        return None
    return BBox(x0, y0, x1 - x0, y1 - y0)


def _passthrough(image: ImageRecord, raster: np.ndarray) -> TransformOutcome:
    return TransformOutcome(
        image=image,
        raster=np.asarray(raster).copy(),
        provenance=PROVENANCE_UNCHANGED,
        donor_id=None,
        annotations=[],
        scale_log=[],
    )


def transform_image_instance_level(
    image: ImageRecord,
    instances: Sequence[InstanceRecord],
    raster: np.ndarray,
    sampler,
    cfg: PipelineConfig,
    rng: RngStream,
    pool: Sequence[int] = (),
    fetch_image: Callable[[int], np.ndarray] | None = None,
) -> TransformOutcome:
    """Separate instances, rescale each one to its sampled size, pick a new
    background, and recombine.

    `pool` lists donor image ids (current image excluded); `fetch_image`
    loads a donor raster by id.  Zero instances short-circuit to an
    unchanged pass-through.
    """
    insts = sorted(instances, key=lambda i: i.id)
    if not insts:
        return _passthrough(image, raster)
    dims = (image.width, image.height)

    hole = np.zeros((image.height, image.width), dtype=bool)
    pasted = []  # (sort size, instance id, warped matte, new bbox, affine)
    log: list[InstanceScaleRecord] = []
    for idx, inst in enumerate(insts):
        s = object_size(inst.bbox)
        try:
            mask = rasterize_mask(inst, dims)
        except EmptyMaskError:
            log.append(InstanceScaleRecord(inst.id, s, None, None, False))
            continue
        hole |= mask.astype(bool)

        stream = rng.stream(image.id, "instance", idx)
        s_hat = float(sampler.target_size(s, stream))
        affine = compute_affine(s, s_hat, inst.bbox.center)
        r = affine.r

        nx, ny = affine.apply(inst.bbox.x, inst.bbox.y)
        new_bbox = _clip_bbox(nx, ny, r * inst.bbox.w, r * inst.bbox.h, dims)
        if new_bbox is None:
            log.append(InstanceScaleRecord(inst.id, s, s_hat, r, False))
            continue
        try:
            matte = extract_matte(raster, mask, cfg.matting)
            warped = warp_matte(matte, affine)
        except (EmptyMaskError, DegenerateWarp):
            log.append(InstanceScaleRecord(inst.id, s, s_hat, r, False))
            continue

        log.append(InstanceScaleRecord(inst.id, s, s_hat, r, True))
        pasted.append((s, inst, warped, new_bbox, affine))

    donor_id = None
    bg_stream = rng.stream(image.id, "background")
    choice, provenance = psi_select_background(
        bg_stream, cfg.psi_p, Background(raster, hole), pool, cfg.inpaint
    )
    if provenance == PROVENANCE_SWAPPED:
        donor_id = choice
        if fetch_image is None:
            raise PipelineError("background swap selected but no image fetcher was provided")
        background = prepare_new_background(fetch_image(donor_id), dims)
    else:
        background = choice

    # paste the largest originals first so smaller objects stay visible on top
    order = sorted(pasted, key=lambda t: (-t[0], t[1].id))
    out_raster = composite(background, [t[2] for t in order])

    annotations = []
    for _, inst, _, new_bbox, affine in pasted:
        annotations.append(
            InstanceRecord(
                id=inst.id,
                image_id=image.id,
                bbox=new_bbox,
                category_id=inst.category_id,
                segmentation=_rewrite_segmentation(inst, affine, dims, dims),
                extra=dict(inst.extra),
            )
        )

    return TransformOutcome(
        image=image,
        raster=out_raster,
        provenance=provenance,
        donor_id=donor_id,
        annotations=annotations,
        scale_log=log,
    )


def transform_image_image_level(
    image: ImageRecord,
    instances: Sequence[InstanceRecord],
    raster: np.ndarray,
    sampler,
    cfg: PipelineConfig,
    rng: RngStream,
) -> TransformOutcome:
    """Resize the whole image so the mean object size lands on the sampled
    size; every box scales by the same factor."""
    insts = sorted(instances, key=lambda i: i.id)
    if not insts:
        return _passthrough(image, raster)

    from . import _kernels

    sizes = [object_size(i.bbox) for i in insts]
    f = image_level_scale_factor(sizes, sampler, rng.stream(image.id, "image"))
    out_w = max(int(round(image.width * f)), 1)
    out_h = max(int(round(image.height * f)), 1)
    out_dims = (out_w, out_h)

    col_scale = image.width / out_w
    row_scale = image.height / out_h
    warped = _kernels.warp_bilinear(
        np.asarray(raster, dtype=np.float64),
        out_h,
        out_w,
        row_scale,
        0.5 * row_scale - 0.5,
        col_scale,
        0.5 * col_scale - 0.5,
        True,
    )
    out_raster = np.clip(np.rint(warped), 0, 255).astype(np.uint8)

    affine = AffineTransform(r=f, t_x=0.0, t_y=0.0)
    annotations = []
    log = []
    for inst in insts:
        s = object_size(inst.bbox)
        new_bbox = _clip_bbox(f * inst.bbox.x, f * inst.bbox.y, f * inst.bbox.w, f * inst.bbox.h, out_dims)
        if new_bbox is None:
            log.append(InstanceScaleRecord(inst.id, s, s * f, f, False))
            continue
        log.append(InstanceScaleRecord(inst.id, s, s * f, f, True))
        annotations.append(
            InstanceRecord(
                id=inst.id,
                image_id=image.id,
                bbox=new_bbox,
                category_id=inst.category_id,
                segmentation=_rewrite_segmentation(inst, affine, (image.width, image.height), out_dims),
                extra=dict(inst.extra),
            )
        )

    return TransformOutcome(
        image=ImageRecord(id=image.id, file_name=image.file_name, width=out_w, height=out_h),
        raster=out_raster,
        provenance=PROVENANCE_UNCHANGED,
        donor_id=None,
        annotations=annotations,
        scale_log=log,
    )


def _resolve_loader(images) -> Callable[[ImageRecord], np.ndarray]:
    if images is None:
        raise ConfigError("an image source (mapping, directory, or callable) is required")
    if isinstance(images, Mapping):
        def from_mapping(rec: ImageRecord) -> np.ndarray:
            if rec.id not in images:
                raise PipelineError(f"no raster provided for image {rec.id}")
            return np.asarray(images[rec.id])
        return from_mapping
    if isinstance(images, (str, Path)):
        root = Path(images)
        return lambda rec: load_image(root / rec.file_name)
    if callable(images):
        return images
    raise ConfigError(f"cannot load images from {type(images).__name__}")


def _build_sampler(method: MatchMethod, hist, source_cdf, target_cdf):
    if method.identity_scale:
        return IdentitySampler()
    if method in (MatchMethod.RSM, MatchMethod.RSM_PLUS):
        return HistogramSampler(hist)
    return CdfMapSampler(source_cdf, target_cdf)


def _remap_donor_annotations(
    donor: ImageRecord,
    donor_insts: Sequence[InstanceRecord],
    host: ImageRecord,
    next_id: int,
) -> tuple[list[InstanceRecord], int]:
    """Carry a donor image's annotations into the host frame it was fitted to."""
    scale, off_x, off_y = background_fit_transform(
        (donor.width, donor.height), (host.width, host.height)
    )
    affine = AffineTransform(r=scale, t_x=-float(off_x), t_y=-float(off_y))
    dims = (host.width, host.height)
    out = []
    for inst in sorted(donor_insts, key=lambda i: i.id):
        b = inst.bbox
        nx, ny = affine.apply(b.x, b.y)
        new_bbox = _clip_bbox(nx, ny, scale * b.w, scale * b.h, dims)
        if new_bbox is None:
            continue
        out.append(
            InstanceRecord(
                id=next_id,
                image_id=host.id,
                bbox=new_bbox,
                category_id=inst.category_id,
                segmentation=_rewrite_segmentation(inst, affine, (donor.width, donor.height), dims),
                extra=dict(inst.extra),
            )
        )
        next_id += 1
    return out, next_id


def transform_dataset(
    source: DatasetIndex,
    target: DatasetIndex,
    cfg: PipelineConfig,
    images,
    workers: int = 1,
    sink: Callable[[ImageRecord, np.ndarray], None] | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> TransformResult:
    """Transform every source image so the output size distribution matches
    the target's.

    `images` supplies pixel data: a mapping of image id to raster, a
    directory containing the records' file names, or a callable taking an
    ImageRecord.  With `sink` set, rasters are handed over as they finish
    instead of being accumulated in the result.  Raises PipelineError when
    more than 10% of images fail; individual failures are reported.
    """
    if workers < 1:
        raise ConfigError(f"worker count must be >= 1, got {workers}")
    if cfg.method.needs_masks:
        unmasked = sorted(i.id for i in source.instances.values() if not i.has_mask)
        if unmasked:
            raise PipelineError(
                f"method {cfg.method.value} separates instances and needs a segmentation "
                f"on every annotation; missing on {unmasked[:10]}"
            )

    loader = _resolve_loader(images)
    source_sizes = collect_sizes(source)
    target_sizes = collect_sizes(target)
    rectified = rectify_sizes(target_sizes, cfg.tail_quantile)
    hist = build_histogram(rectified, cfg.bins, cfg.layout)
    sampler = _build_sampler(
        cfg.method, hist, EmpiricalCdf(source_sizes), EmpiricalCdf(rectified)
    )
    rng = RngStream(cfg.seed)

    ids = sorted(source.images)
    total = len(ids)

    def run_one(image_id: int) -> TransformOutcome:
        rec = source.images[image_id]
        raster = loader(rec)
        insts = source.instances_of(image_id)
        if cfg.method.instance_level:
            pool = [i for i in ids if i != image_id]
            return transform_image_instance_level(
                rec, insts, raster, sampler, cfg, rng, pool,
                lambda donor_id: loader(source.images[donor_id]),
            )
        return transform_image_image_level(rec, insts, raster, sampler, cfg, rng)

    outcomes: dict[int, TransformOutcome] = {}
    failures: dict[int, str] = {}
    done = 0
    out_images: dict[int, np.ndarray] | None = None if sink is not None else {}
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futures = {ex.submit(run_one, image_id): image_id for image_id in ids}
        for future in futures:
            image_id = futures[future]
            try:
                outcome = future.result()
            except Exception as e:  # per-image failures are budgeted, not fatal
                failures[image_id] = f"{type(e).__name__}: {e}"
            else:
                outcomes[image_id] = outcome
                if sink is not None:
                    sink(outcome.image, outcome.raster)
                    outcome.raster = None
                else:
                    out_images[image_id] = outcome.raster
            done += 1
            if progress is not None:
                progress(done, total)

    if len(failures) > _FAILURE_BUDGET * total:
        sample = "; ".join(f"{i}: {failures[i]}" for i in sorted(failures)[:5])
        raise PipelineError(
            f"{len(failures)} of {total} images failed (budget {_FAILURE_BUDGET:.0%}): {sample}"
        )

    new_images: dict[int, ImageRecord] = {}
    new_instances: dict[int, InstanceRecord] = {}
    scale_log: list[dict] = []
    swapped = 0
    eligible = 0
    dropped = 0
    next_id = max(source.instances, default=0) + 1
    for image_id in ids:
        if image_id in failures:
            continue
        outcome = outcomes[image_id]
        new_images[outcome.image.id] = outcome.image
        for ann in outcome.annotations:
            new_instances[ann.id] = ann
        for entry in outcome.scale_log:
            scale_log.append(entry.to_dict(image_id))
            if not entry.kept:
                dropped += 1
        if outcome.provenance != PROVENANCE_UNCHANGED:
            eligible += 1
            if outcome.provenance == PROVENANCE_SWAPPED:
                swapped += 1
                if cfg.method.keeps_donor_annotations:
                    extra_anns, next_id = _remap_donor_annotations(
                        source.images[outcome.donor_id],
                        source.instances_of(outcome.donor_id),
                        outcome.image,
                        next_id,
                    )
                    for ann in extra_anns:
                        new_instances[ann.id] = ann

    index = DatasetIndex(
        images=new_images,
        instances=new_instances,
        role=ROLE_TARGET,
        categories=source.categories,
    )

    before = compare_sizes(source_sizes, target_sizes, cfg.bins, cfg.layout)
    if new_instances:
        after = compare_sizes(collect_sizes(index), target_sizes, cfg.bins, cfg.layout)
    else:
        after = None
    report = TransformReport(
        method=cfg.method.value,
        config=cfg.to_dict(),
        before=before,
        after=after,
        swap_fraction=swapped / eligible if eligible else 0.0,
        dropped_instances=dropped,
        errors=[{"image_id": i, "error": failures[i]} for i in sorted(failures)],
        scale_log=scale_log,
    )
    return TransformResult(index=index, report=report, images=out_images)
