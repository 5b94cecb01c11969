import random

import pytest
from hypothesis import HealthCheck, settings

from pod_sentry.annotations import (
    DatasetManifest,
    DetectionItem,
    GroundTruthItem,
    ImageRecord,
    default_registry,
)
from pod_sentry.geometry import BoundingBox

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def random_box(rng: random.Random, extent: float = 640.0, min_side: float = 4.0) -> BoundingBox:
    x0 = rng.uniform(0.0, extent - min_side)
    y0 = rng.uniform(0.0, extent - min_side)
    x1 = rng.uniform(x0 + min_side, extent)
    y1 = rng.uniform(y0 + min_side, extent)
    return BoundingBox(x0, y0, x1, y1)


def jittered_box(rng: random.Random, box: BoundingBox, extent: float = 640.0) -> BoundingBox:
    """A perturbed copy likely to overlap the original substantially."""
    spread = 0.25 * min(box.width, box.height)
    x0 = min(max(box.x_min + rng.uniform(-spread, spread), 0.0), extent - 1.0)
    y0 = min(max(box.y_min + rng.uniform(-spread, spread), 0.0), extent - 1.0)
    x1 = max(min(box.x_max + rng.uniform(-spread, spread), extent), x0 + 1.0)
    y1 = max(min(box.y_max + rng.uniform(-spread, spread), extent), y0 + 1.0)
    return BoundingBox(x0, y0, x1, y1)


def random_corpus(
    rng: random.Random,
    max_images: int = 20,
    max_boxes: int = 10,
    extent: float = 640.0,
) -> tuple[DatasetManifest, list[DetectionItem]]:
    """A small random dataset plus detections correlated with its truth.

    Detections mix jittered copies of ground truths (sometimes with the
    wrong class) and pure false positives, so PR curves cover both branches.
    All images sit in the validation split.
    """
    registry = default_registry()
    class_ids = sorted(registry.ids())
    images = []
    annotations = []
    detections = []
    n_images = rng.randint(1, max_images)
    for i in range(n_images):
        image_id = f"img{i:03d}"
        images.append(
            ImageRecord(
                image_id=image_id,
                path=f"{image_id}.png",
                width=int(extent),
                height=int(extent),
                split="validation",
            )
        )
        for _ in range(rng.randint(0, max_boxes)):
            class_id = rng.choice(class_ids)
            box = random_box(rng, extent)
            annotations.append(
                GroundTruthItem(image_id=image_id, class_id=class_id, box=box)
            )
            if rng.random() < 0.75:
                det_class = class_id if rng.random() < 0.85 else rng.choice(class_ids)
                detections.append(
                    DetectionItem(
                        image_id=image_id,
                        class_id=det_class,
                        box=jittered_box(rng, box, extent),
                        score=rng.random(),
                    )
                )
        for _ in range(rng.randint(0, 3)):
            detections.append(
                DetectionItem(
                    image_id=image_id,
                    class_id=rng.choice(class_ids),
                    box=random_box(rng, extent),
                    score=rng.random(),
                )
            )
    manifest = DatasetManifest(
        images=tuple(images),
        registry=registry,
        annotations=tuple(annotations),
    )
    return manifest, detections


@pytest.fixture
def registry():
    return default_registry()
