"""Canonical dataset model: class registry, annotations, manifests.

The in-memory convention is 0-based pixel corners; format parsers convert at
the boundary so geometry never sees mixed conventions. Manifests are
immutable after construction.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .errors import UnknownClassError
from .geometry import BoundingBox, Convention

SPLITS = ("train", "validation")
_BOUNDS_TOLERANCE = 1e-6


def normalize_class_name(name: str) -> str:
    return re.sub(r"[\s\-]+", "_", name.strip().casefold())


@dataclass(frozen=True)
class ClassEntry:
    class_id: int
    name: str
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "aliases", tuple(self.aliases))


@dataclass(frozen=True)
class ClassRegistry:
    """Ordered class table with case-insensitive alias resolution."""

    classes: tuple[ClassEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise ValueError("registry needs at least one class")
        for expected, entry in enumerate(self.classes):
            if entry.class_id != expected:
                raise ValueError(
                    f"class ids must be dense from 0; position {expected} has id {entry.class_id}"
                )
        lookup: dict[str, int] = {}
        for entry in self.classes:
            for name in (entry.name, *entry.aliases):
                key = normalize_class_name(name)
                if key in lookup and lookup[key] != entry.class_id:
                    raise ValueError(
                        f"name {name!r} resolves to both class {lookup[key]} and {entry.class_id}"
                    )
                lookup[key] = entry.class_id
        object.__setattr__(self, "_lookup", lookup)

    def __len__(self) -> int:
        return len(self.classes)

    def ids(self) -> tuple[int, ...]:
        return tuple(entry.class_id for entry in self.classes)

    def __contains__(self, class_id: int) -> bool:
        return 0 <= class_id < len(self.classes)

    def entry(self, class_id: int) -> ClassEntry:
        if class_id not in self:
            raise UnknownClassError(f"unknown class id {class_id}; registry has ids 0..{len(self) - 1}")
        return self.classes[class_id]

    def name_of(self, class_id: int) -> str:
        return self.entry(class_id).name

    def resolve(self, name: str) -> int:
        key = normalize_class_name(name)
        lookup: dict[str, int] = getattr(self, "_lookup")
        if key not in lookup:
            raise UnknownClassError(f"unknown class name {name!r}")
        return lookup[key]


def default_registry() -> ClassRegistry:
    """The three-class cocoa pod registry."""
    return ClassRegistry(
        classes=(
            ClassEntry(0, "black_pod", aliases=("fitoftora", "phytophthora", "black pod")),
            ClassEntry(1, "monilia", aliases=("moniliasis",)),
            ClassEntry(2, "healthy", aliases=("healthy pod",)),
        )
    )


@dataclass(frozen=True)
class GroundTruthItem:
    image_id: str
    class_id: int
    box: BoundingBox


@dataclass(frozen=True)
class DetectionItem:
    image_id: str
    class_id: int
    box: BoundingBox
    score: float

    def __post_init__(self) -> None:
        if not (isinstance(self.score, (int, float)) and math.isfinite(self.score)):
            raise ValueError(f"score must be a finite number, got {self.score!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    path: str
    width: int
    height: int
    split: str = "train"

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class DatasetManifest:
    images: tuple[ImageRecord, ...]
    registry: ClassRegistry
    annotations: tuple[GroundTruthItem, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "annotations", tuple(self.annotations))

    def image_map(self) -> dict[str, ImageRecord]:
        return {record.image_id: record for record in self.images}

    def annotations_for(self, image_id: str) -> tuple[GroundTruthItem, ...]:
        return tuple(a for a in self.annotations if a.image_id == image_id)

    def split_images(self, split: str | None) -> tuple[ImageRecord, ...]:
        if split is None:
            return self.images
        return tuple(record for record in self.images if record.split == split)

    def with_splits(self, assignment: Mapping[str, str]) -> "DatasetManifest":
        images = tuple(
            replace(record, split=assignment.get(record.image_id, record.split))
            for record in self.images
        )
        return replace(self, images=images)


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    message: str


def _box_in_bounds(box: BoundingBox, record: ImageRecord) -> bool:
    tol_x = _BOUNDS_TOLERANCE * record.width
    tol_y = _BOUNDS_TOLERANCE * record.height
    return (
        box.x_min >= -tol_x
        and box.y_min >= -tol_y
        and box.x_max <= record.width + tol_x
        and box.y_max <= record.height + tol_y
    )


def validate_manifest(manifest: DatasetManifest) -> list[Violation]:
    """Mechanized integrity check; an empty report means the manifest is valid.

    Violations are data, not exceptions: callers decide how strict to be.
    """
    violations: list[Violation] = []
    seen: set[str] = set()
    for record in manifest.images:
        if record.image_id in seen:
            violations.append(
                Violation("duplicate-image", record.image_id, "image id appears more than once")
            )
        seen.add(record.image_id)

    image_map = manifest.image_map()
    for index, item in enumerate(manifest.annotations):
        subject = f"annotations[{index}]"
        if item.image_id not in image_map:
            violations.append(
                Violation(
                    "dangling-annotation",
                    subject,
                    f"annotation references absent image {item.image_id!r}",
                )
            )
            continue
        if item.class_id not in manifest.registry:
            violations.append(
                Violation("unknown-class", subject, f"class id {item.class_id} not in registry")
            )
        record = image_map[item.image_id]
        box = item.box
        if box.convention is Convention.NORMALIZED:
            box = BoundingBox(
                box.x_min * record.width,
                box.y_min * record.height,
                box.x_max * record.width,
                box.y_max * record.height,
            )
        if not _box_in_bounds(box, record):
            violations.append(
                Violation(
                    "out-of-bounds-box",
                    subject,
                    f"box {box.corners()} exceeds image bounds "
                    f"{record.width}x{record.height} of {item.image_id!r}",
                )
            )

    for split in SPLITS:
        if manifest.images and not manifest.split_images(split):
            violations.append(Violation("empty-split", split, f"no images assigned to {split!r}"))

    return violations


def manifest_stats(manifest: DatasetManifest, batch_size: int | None = None) -> dict:
    """Class and split counts, plus steps-per-epoch for a given batch size.

    Steps per epoch is ceiling division over the training split, so a partial
    final batch still counts as a step.
    """
    by_split = {split: len(manifest.split_images(split)) for split in SPLITS}
    annotations_by_class = {
        manifest.registry.name_of(entry.class_id): 0 for entry in manifest.registry.classes
    }
    for item in manifest.annotations:
        if item.class_id in manifest.registry:
            annotations_by_class[manifest.registry.name_of(item.class_id)] += 1
    stats = {
        "images": len(manifest.images),
        "by_split": by_split,
        "annotations_by_class": annotations_by_class,
    }
    if batch_size is not None:
        if batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {batch_size}")
        stats["batch_size"] = batch_size
        stats["steps_per_epoch"] = math.ceil(by_split["train"] / batch_size)
    return stats


def dominant_class(
    annotations: Iterable[GroundTruthItem],
) -> int | None:
    """Most frequent class among annotations; ties resolve to the lowest id."""
    counts: dict[int, int] = {}
    for item in annotations:
        counts[item.class_id] = counts.get(item.class_id, 0) + 1
    if not counts:
        return None
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]
