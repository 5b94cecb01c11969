"""Image normalization pipeline: square crop, resize, split, box transform.

The pipeline mirrors the dataset preparation used for training: crop each
photo to 1:1, resize to the training resolution (640 px), keep RGB channels,
and carry the bounding-box annotations through the same affine map. Bilinear
resampling is the declared kernel and is recorded in the processing log so
evaluation runs stay reproducible.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from PIL import Image, ImageOps

from . import docio
from .annotations import (
    DatasetManifest,
    GroundTruthItem,
    ImageRecord,
    dominant_class,
)
from .geometry import BoundingBox

MIN_KEPT_BOX_AREA = 1.0  # px^2 in post-crop source coordinates

CropRect = tuple[int, int, int, int]


@dataclass(frozen=True)
class PreprocessConfig:
    target_size: int = 640
    crop_mode: str = "center"  # "center" | "custom"
    split_ratio: float = 0.2
    split_seed: int = 0
    workers: int = 4

    def __post_init__(self) -> None:
        if self.target_size <= 0:
            raise ValueError(f"target_size must be positive, got {self.target_size}")
        if self.crop_mode not in ("center", "custom"):
            raise ValueError(f"crop_mode must be 'center' or 'custom', got {self.crop_mode!r}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def center_crop_rect(width: int, height: int) -> CropRect:
    """Largest centered square: floor((long - short) / 2) off the leading edge."""
    side = min(width, height)
    left = (width - side) // 2
    top = (height - side) // 2
    return (left, top, left + side, top + side)


def crop_to_square(image: Image.Image, rect: CropRect | None = None) -> tuple[Image.Image, CropRect]:
    """Contiguous square sub-rectangle, no resampling.

    With rect=None the centered square is taken; a custom rect must be square
    and lie fully inside the image.
    """
    width, height = image.size
    if rect is None:
        rect = center_crop_rect(width, height)
    left, top, right, bottom = rect
    if right - left != bottom - top:
        raise ValueError(f"crop rect must be square, got {rect}")
    if left < 0 or top < 0 or right > width or bottom > height or right <= left:
        raise ValueError(f"crop rect {rect} outside {width}x{height} image")
    return image.crop(rect), rect


def resize_square(image: Image.Image, target: int) -> Image.Image:
    """Bilinear resize to target x target; same-size input is returned as-is."""
    if target <= 0:
        raise ValueError(f"target size must be positive, got {target}")
    if image.size == (target, target):
        return image.copy()
    return image.resize((target, target), Image.Resampling.BILINEAR)


def transform_box(
    box: BoundingBox, rect: CropRect, target: int
) -> BoundingBox | None:
    """Carry a box through crop + uniform resize; None when it is dropped.

    The box is intersected with the crop window first; remnants smaller than
    1 px^2 are dropped rather than kept as slivers.
    """
    left, top, right, bottom = rect
    clipped = box.clipped_to(left, top, right, bottom)
    if clipped is None or clipped.area < MIN_KEPT_BOX_AREA:
        return None
    scale = target / (right - left)
    moved = clipped.translated(-left, -top).scaled(scale)
    return moved.clipped_to(0.0, 0.0, float(target), float(target))


def split_dataset(
    manifest: DatasetManifest, ratio: float, seed: int
) -> DatasetManifest:
    """Deterministic per-class stratified train/validation assignment.

    Images are stratified by their dominant annotation class; every class
    needs at least 2 images so neither split loses it entirely. Unannotated
    images form their own stratum without that minimum.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"validation ratio must be in (0, 1), got {ratio}")
    strata: dict[int | None, list[str]] = {}
    for record in manifest.images:
        key = dominant_class(manifest.annotations_for(record.image_id))
        strata.setdefault(key, []).append(record.image_id)

    for key, members in strata.items():
        if key is not None and len(members) < 2:
            raise ValueError(
                f"class {manifest.registry.name_of(key)!r} has {len(members)} image(s); "
                "need at least 2 to stratify"
            )

    rng = random.Random(seed)
    assignment: dict[str, str] = {}
    order = sorted(strata, key=lambda k: (k is None, k if k is not None else 0))
    for key in order:
        members = sorted(strata[key])
        n_val = round(ratio * len(members))
        if key is not None:
            n_val = max(1, min(len(members) - 1, n_val))
        else:
            n_val = max(0, min(len(members), n_val))
        validation = set(rng.sample(members, n_val))
        for image_id in members:
            assignment[image_id] = "validation" if image_id in validation else "train"
    return manifest.with_splits(assignment)


@dataclass(frozen=True)
class ImageLogRecord:
    image_id: str
    source_path: str
    crop_rect: CropRect
    scale: float
    output_path: str
    dropped_annotations: int


@dataclass(frozen=True)
class ImageError:
    image_id: str
    source_path: str
    message: str


@dataclass(frozen=True)
class PipelineResult:
    manifest: DatasetManifest
    log: tuple[ImageLogRecord, ...]
    errors: tuple[ImageError, ...]

    @property
    def status(self) -> int:
        return 1 if self.errors else 0


def _process_one(
    record: ImageRecord,
    annotations: Sequence[GroundTruthItem],
    config: PreprocessConfig,
    rect: CropRect | None,
    output_dir: Path,
) -> tuple[ImageRecord, list[GroundTruthItem], ImageLogRecord] | ImageError:
    try:
        with Image.open(record.path) as raw:
            image = ImageOps.exif_transpose(raw).convert("RGB")
    except (OSError, ValueError) as exc:
        return ImageError(record.image_id, record.path, f"cannot decode: {exc}")
    try:
        cropped, used_rect = crop_to_square(image, rect)
    except ValueError as exc:
        return ImageError(record.image_id, record.path, str(exc))
    processed = resize_square(cropped, config.target_size)
    output_path = output_dir / f"{record.image_id}.png"
    processed.save(output_path, format="PNG")

    kept: list[GroundTruthItem] = []
    dropped = 0
    for item in annotations:
        new_box = transform_box(item.box, used_rect, config.target_size)
        if new_box is None:
            dropped += 1
            continue
        kept.append(replace(item, box=new_box))

    side = used_rect[2] - used_rect[0]
    new_record = ImageRecord(
        image_id=record.image_id,
        path=str(output_path),
        width=config.target_size,
        height=config.target_size,
        split=record.split,
    )
    log = ImageLogRecord(
        image_id=record.image_id,
        source_path=record.path,
        crop_rect=used_rect,
        scale=config.target_size / side,
        output_path=str(output_path),
        dropped_annotations=dropped,
    )
    return new_record, kept, log


def run_pipeline(
    manifest: DatasetManifest,
    config: PreprocessConfig,
    output_dir: str | Path,
    crop_rects: Mapping[str, CropRect] | None = None,
) -> PipelineResult:
    """Crop, resize, and re-annotate every manifest image into output_dir.

    Per-image work runs in parallel; results are assembled in manifest order
    regardless of completion order. Unreadable images are recorded as errors
    and the pipeline continues.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    crop_rects = dict(crop_rects or {})

    def job(record: ImageRecord):
        rect = None
        if config.crop_mode == "custom":
            rect = crop_rects.get(record.image_id)
        return _process_one(
            record, manifest.annotations_for(record.image_id), config, rect, output_dir
        )

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        outcomes = list(pool.map(job, manifest.images))

    new_images: list[ImageRecord] = []
    new_annotations: list[GroundTruthItem] = []
    logs: list[ImageLogRecord] = []
    errors: list[ImageError] = []
    for outcome in outcomes:
        if isinstance(outcome, ImageError):
            errors.append(outcome)
            continue
        record, items, log = outcome
        new_images.append(record)
        new_annotations.extend(items)
        logs.append(log)

    new_manifest = DatasetManifest(
        images=tuple(new_images),
        registry=manifest.registry,
        annotations=tuple(new_annotations),
    )
    return PipelineResult(manifest=new_manifest, log=tuple(logs), errors=tuple(errors))


def pipeline_log_document(result: PipelineResult, config: PreprocessConfig) -> dict:
    return {
        "schema": docio.PREPROCESS_LOG_SCHEMA,
        "config": {
            "target_size": config.target_size,
            "crop_mode": config.crop_mode,
            "resample": "bilinear",
        },
        "records": [
            {
                "image_id": r.image_id,
                "source_path": r.source_path,
                "crop_rect": list(r.crop_rect),
                "scale": r.scale,
                "output_path": r.output_path,
                "dropped_annotations": r.dropped_annotations,
            }
            for r in result.log
        ],
        "errors": [
            {"image_id": e.image_id, "source_path": e.source_path, "message": e.message}
            for e in result.errors
        ],
    }


def read_crop_sidecar(path: str | Path) -> dict[str, CropRect]:
    doc = docio.load_document(path, docio.CROPS_SCHEMA)
    crops = {}
    for image_id, rect in doc.get("crops", {}).items():
        crops[str(image_id)] = tuple(int(v) for v in rect)  # type: ignore[assignment]
    return crops
