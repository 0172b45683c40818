"""Annotation data model and COCO-style JSON ingestion/emission.

Boxes are stored real-valued in the usual [x, y, w, h] convention; rounding
happens only when an index is written back to disk.  Segmentations are kept
in their source form (polygon list or RLE) and rasterized on demand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from PIL import Image

from . import _kernels
from .errors import EmptyMaskError, IntegrityError, ParseError

ROLE_SOURCE = "source"
ROLE_TARGET = "target"

# Precision used when boxes/polygons are written back to JSON; 3 decimals
# keeps the load(write(x)) round-trip within 1e-3 px.
_BBOX_DECIMALS = 3


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus width/height, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise IntegrityError(f"bbox has non-finite coordinates: {self}")
        if self.w <= 0 or self.h <= 0:
            raise IntegrityError(f"bbox has non-positive extent: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def scaled(self, factor: float) -> "BBox":
        return BBox(self.x * factor, self.y * factor, self.w * factor, self.h * factor)


@dataclass(frozen=True)
class InstanceRecord:
    """One annotated object: box, optional segmentation, category."""

    id: int
    image_id: int
    bbox: BBox
    category_id: int
    segmentation: list | dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def has_mask(self) -> bool:
        if isinstance(self.segmentation, dict):
            return True
        return bool(self.segmentation)


@dataclass(frozen=True)
class ImageRecord:
    id: int
    file_name: str
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise IntegrityError(f"image {self.id} has degenerate dimensions {self.width}x{self.height}")


@dataclass
class DatasetIndex:
    """Validated collection of images and instances plus pass-through categories."""

    images: dict[int, ImageRecord]
    instances: dict[int, InstanceRecord]
    role: str
    categories: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.role not in (ROLE_SOURCE, ROLE_TARGET):
            raise IntegrityError(f"unknown dataset role {self.role!r}")
        dangling = [i.id for i in self.instances.values() if i.image_id not in self.images]
        if dangling:
            raise IntegrityError(f"annotations reference missing images: {sorted(dangling)}")
        if self.role == ROLE_SOURCE:
            missing = [i.id for i in self.instances.values() if not i.has_mask]
            if missing:
                raise IntegrityError(f"source-role annotations lack segmentation: {sorted(missing)}")

    def instances_of(self, image_id: int) -> list[InstanceRecord]:
        return sorted(
            (i for i in self.instances.values() if i.image_id == image_id),
            key=lambda i: i.id,
        )

    @property
    def has_masks(self) -> bool:
        return bool(self.instances) and all(i.has_mask for i in self.instances.values())


def object_size(b: BBox) -> float:
    """Size of a box: the square root of its area, in pixels."""
    return math.sqrt(b.w * b.h)


def load_index(path, role: str, drop_ignored: bool = False) -> DatasetIndex:
    """Load a COCO-style JSON file into a validated DatasetIndex.

    role="source" additionally requires a segmentation on every annotation.
    drop_ignored removes annotations flagged iscrowd/ignore instead of
    passing them through.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at byte offset {e.pos}: {e.msg}") from e

    images: dict[int, ImageRecord] = {}
    for entry in data.get("images", []):
        rec = ImageRecord(
            id=entry["id"],
            file_name=entry["file_name"],
            width=int(entry["width"]),
            height=int(entry["height"]),
        )
        if rec.id in images:
            raise IntegrityError(f"{path}: duplicate image id {rec.id}")
        images[rec.id] = rec

    instances: dict[int, InstanceRecord] = {}
    # "area" is derived from the bbox and recomputed at write time, so a
    # stored value would go stale after a transform; drop it here
    known = {"id", "image_id", "bbox", "segmentation", "category_id", "area"}
    for entry in data.get("annotations", []):
        ann_id = entry["id"]
        bbox = entry.get("bbox")
        if bbox is None or len(bbox) != 4:
            raise IntegrityError(f"{path}: annotation {ann_id} has no valid bbox")
        x, y, w, h = (float(v) for v in bbox)
        if w <= 0 or h <= 0:
            raise IntegrityError(f"{path}: annotation {ann_id} has zero-area bbox {bbox}")
        img = images.get(entry["image_id"])
        if img is not None:
            # clip into image bounds; a box entirely outside degenerates here
            x0, y0 = max(x, 0.0), max(y, 0.0)
            x1, y1 = min(x + w, float(img.width)), min(y + h, float(img.height))
            if x1 - x0 <= 0 or y1 - y0 <= 0:
                raise IntegrityError(f"{path}: annotation {ann_id} bbox lies outside its image")
            x, y, w, h = x0, y0, x1 - x0, y1 - y0
        extra = {k: v for k, v in entry.items() if k not in known}
        if drop_ignored and (extra.get("iscrowd") or extra.get("ignore")):
            continue
        rec = InstanceRecord(
            id=ann_id,
            image_id=entry["image_id"],
            bbox=BBox(x, y, w, h),
            category_id=entry.get("category_id", 1),
            segmentation=entry.get("segmentation") or None,
            extra=extra,
        )
        if rec.id in instances:
            raise IntegrityError(f"{path}: duplicate annotation id {rec.id}")
        instances[rec.id] = rec

    return DatasetIndex(
        images=images,
        instances=instances,
        role=role,
        categories=data.get("categories", []),
    )


def _round_coords(values: Iterable[float], decimals: int) -> list[float]:
    return [round(float(v), decimals) for v in values]


def index_to_json_dict(index: DatasetIndex) -> dict:
    """Serialize an index to a COCO-style dict with deterministic ordering."""
    images = [
        {"id": r.id, "file_name": r.file_name, "width": r.width, "height": r.height}
        for r in sorted(index.images.values(), key=lambda r: r.id)
    ]
    annotations = []
    for inst in sorted(index.instances.values(), key=lambda i: (i.image_id, i.id)):
        entry = {
            "id": inst.id,
            "image_id": inst.image_id,
            "bbox": _round_coords((inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h), _BBOX_DECIMALS),
            "area": round(inst.bbox.w * inst.bbox.h, _BBOX_DECIMALS),
            "category_id": inst.category_id,
        }
        if isinstance(inst.segmentation, dict):
            entry["segmentation"] = inst.segmentation
        elif inst.segmentation:
            entry["segmentation"] = [_round_coords(p, 2) for p in inst.segmentation]
        for k in sorted(inst.extra):
            entry[k] = inst.extra[k]
        annotations.append(entry)
    return {"images": images, "annotations": annotations, "categories": index.categories}


def write_index(index: DatasetIndex, images: Mapping[int, np.ndarray], out_dir) -> Path:
    """Write annotations.json plus one image file per record under out_dir.

    Every image record must have a raster in `images`; files are written as
    PNG/JPEG according to the record's file_name suffix.  Returns the path of
    the annotation file.
    """
    out_dir = Path(out_dir)
    missing = [r.id for r in index.images.values() if r.id not in images]
    if missing:
        raise IntegrityError(f"missing rasters for image ids {sorted(missing)}")

    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    for rec in sorted(index.images.values(), key=lambda r: r.id):
        save_image(images[rec.id], img_dir / rec.file_name)

    ann_path = out_dir / "annotations.json"
    ann_path.write_text(json.dumps(index_to_json_dict(index)), encoding="utf-8")
    return ann_path


def load_image(path) -> np.ndarray:
    """Decode an image file to an (H, W, 3) uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(raster: np.ndarray, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(raster)).save(path)


def _decode_rle_counts(counts: str) -> list[int]:
    # COCO compressed RLE: 6-bit chunks (offset 48) with a continuation bit,
    # counts[i] for i > 1 stored as a delta against counts[i-2]
    out: list[int] = []
    i = 0
    while i < len(counts):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(counts[i]) - 48
            i += 1
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(out) > 2:
            x += out[-2]
        out.append(x)
    return out


def decode_rle(rle: dict) -> np.ndarray:
    """Decode a COCO RLE dict (compressed or plain counts) to a uint8 mask."""
    h, w = rle["size"]
    counts = rle["counts"]
    if isinstance(counts, str):
        counts = _decode_rle_counts(counts)
    flat = np.zeros(h * w, dtype=np.uint8)
    pos = 0
    value = 0
    for run in counts:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    if pos != h * w:
        raise IntegrityError(f"RLE runs cover {pos} pixels, mask has {h * w}")
    return flat.reshape((w, h)).T.copy()  # counts run down columns


def encode_rle(mask: np.ndarray) -> dict:
    """Encode a binary mask as a plain-counts COCO RLE dict."""
    h, w = mask.shape
    flat = (np.asarray(mask) != 0).astype(np.uint8).T.reshape(-1)
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat.size and flat[0] == 1:
        counts = [0] + counts
    return {"size": [int(h), int(w)], "counts": [int(c) for c in counts]}


def rasterize_mask(inst: InstanceRecord, dims: tuple[int, int]) -> np.ndarray:
    """Rasterize an instance's segmentation to a binary (H, W) uint8 mask.

    dims is (width, height).  Polygon interiors are filled where the pixel
    center falls inside (even-odd rule); RLE segmentations are decoded
    directly.  Raises EmptyMaskError when nothing is covered.
    """
    width, height = dims
    seg = inst.segmentation
    if seg is None:
        raise EmptyMaskError(f"instance {inst.id} has no segmentation")

    if isinstance(seg, dict):
        mask = decode_rle(seg)
        if mask.shape != (height, width):
            raise IntegrityError(
                f"instance {inst.id}: RLE size {mask.shape} does not match image {height}x{width}"
            )
        if not mask.any():
            raise EmptyMaskError(f"instance {inst.id} decoded to an empty mask")
        return mask

    polys = []
    for flat in seg:
        pts = np.asarray(flat, dtype=np.float64).reshape(-1, 2)
        if np.unique(pts, axis=0).shape[0] < 3:
            continue  # degenerate polygon, skip
        polys.append(pts)
    if not polys:
        raise EmptyMaskError(f"instance {inst.id} has only degenerate polygons")
    mask = _kernels.fill_polygons(polys, height, width)
    if not mask.any():
        raise EmptyMaskError(f"instance {inst.id} covers no pixel centers")
    return mask
