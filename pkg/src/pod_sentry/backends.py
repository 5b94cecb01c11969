"""Detection sources behind one interface: stored files, a mock, or HTTP.

A backend yields DetectionItems for an image. The file backend replays a
detections document, the mock fabricates deterministic pod-shaped boxes for
demos, and the external backend forwards to a model server speaking the
detection interchange format. Every path validates its output through
DetectionItem, so malformed scores or boxes fail loudly instead of leaking.
"""

from __future__ import annotations

import hashlib
import io
import random
from dataclasses import dataclass, field
from typing import Mapping

import requests
from PIL import Image

from .annotations import ClassRegistry, DetectionItem
from .errors import BackendError, BackendTransportError, SchemaError
from .formats import detections_from_document, read_detections_file
from .geometry import BoundingBox

BACKEND_KINDS = ("file", "mock", "external")

_REQUIRED_PARAMETERS = {
    "file": ("path",),
    "mock": ("seed",),
    "external": ("url",),
}

# Mock box shape: pods photographed upright are taller than wide.
MOCK_ASPECT_RANGE = (1.3, 1.9)  # height / width
MOCK_WIDTH_RANGE = (0.15, 0.35)  # fraction of image width
MOCK_PODS_RANGE = (1, 3)
MOCK_SCORES_PER_POD = (1, 3)


@dataclass(frozen=True)
class BackendDescriptor:
    kind: str
    parameters: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}; expected one of {BACKEND_KINDS}")
        missing = [p for p in _REQUIRED_PARAMETERS[self.kind] if p not in self.parameters]
        if missing:
            raise ValueError(f"{self.kind} backend missing parameter(s): {', '.join(missing)}")
        object.__setattr__(self, "parameters", dict(self.parameters))

    def to_doc(self) -> dict:
        return {"kind": self.kind, "parameters": dict(self.parameters)}

    @classmethod
    def from_doc(cls, doc: Mapping) -> "BackendDescriptor":
        try:
            return cls(kind=str(doc["kind"]), parameters=dict(doc.get("parameters", {})))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"bad backend descriptor: {exc}") from exc


def _check_class_ids(items: list[DetectionItem], registry: ClassRegistry, origin: str) -> list[DetectionItem]:
    for item in items:
        if item.class_id not in registry:
            raise SchemaError(f"{origin} produced unknown class id {item.class_id}")
    return items


class FileBackend:
    """Replays detections recorded in a detections document, keyed by image_id."""

    def __init__(self, path: str, registry: ClassRegistry) -> None:
        self._path = path
        self._index: dict[str, list[DetectionItem]] = {}
        for item in _check_class_ids(read_detections_file(path), registry, f"detections file {path}"):
            self._index.setdefault(item.image_id, []).append(item)

    def detect(self, image_id: str, image: Image.Image | None = None) -> list[DetectionItem]:
        if image_id not in self._index:
            raise BackendError(f"no stored detections for image {image_id!r} in {self._path}")
        return list(self._index[image_id])


class MockBackend:
    """Fabricates detections from a hash of (seed, image_id); no model involved.

    Boxes follow pod-like proportions (height 1.3x to 1.9x the width) so demo
    overlays look plausible. Same seed and image id always produce the same
    list, independent of call order.
    """

    def __init__(self, seed: int, registry: ClassRegistry) -> None:
        self._seed = int(seed)
        self._registry = registry

    def detect(self, image_id: str, image: Image.Image | None = None) -> list[DetectionItem]:
        width, height = image.size if image is not None else (640, 640)
        digest = hashlib.sha256(f"{self._seed}:{image_id}".encode()).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        detections: list[DetectionItem] = []
        for _ in range(rng.randint(*MOCK_PODS_RANGE)):
            box_w = rng.uniform(*MOCK_WIDTH_RANGE) * width
            box_h = min(box_w * rng.uniform(*MOCK_ASPECT_RANGE), height * 0.9)
            x_min = rng.uniform(0.0, width - box_w)
            y_min = rng.uniform(0.0, height - box_h)
            box = BoundingBox(x_min, y_min, x_min + box_w, y_min + box_h)
            class_ids = rng.sample(sorted(self._registry.ids()), rng.randint(*MOCK_SCORES_PER_POD))
            top = rng.uniform(0.5, 0.95)
            for rank, class_id in enumerate(class_ids):
                score = top if rank == 0 else top * rng.uniform(0.02, 0.2)
                detections.append(
                    DetectionItem(image_id=image_id, class_id=class_id, box=box, score=score)
                )
        return detections


class ExternalBackend:
    """POSTs the image to a model server and parses its interchange response."""

    def __init__(self, url: str, registry: ClassRegistry, timeout: float = 30.0) -> None:
        self._url = url
        self._registry = registry
        self._timeout = timeout

    def detect(self, image_id: str, image: Image.Image | None = None) -> list[DetectionItem]:
        if image is None:
            raise BackendError("external backend requires the image payload")
        buffer = io.BytesIO()
        image.save(buffer, format="PNG")
        try:
            response = requests.post(
                self._url,
                params={"image_id": image_id},
                data=buffer.getvalue(),
                headers={"Content-Type": "image/png"},
                timeout=self._timeout,
            )
            response.raise_for_status()
            payload = response.json()
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise BackendTransportError(f"model endpoint unreachable: {exc}") from exc
        except requests.HTTPError as exc:
            raise BackendTransportError(f"model endpoint error: {exc}") from exc
        except ValueError as exc:
            raise SchemaError(f"model endpoint returned non-JSON body: {exc}") from exc
        items = detections_from_document(payload, source=self._url)
        return _check_class_ids(items, self._registry, "model endpoint")


def create_backend(descriptor: BackendDescriptor, registry: ClassRegistry):
    if descriptor.kind == "file":
        return FileBackend(descriptor.parameters["path"], registry)
    if descriptor.kind == "mock":
        try:
            seed = int(descriptor.parameters["seed"])
        except ValueError as exc:
            raise ValueError(f"mock backend seed must be an integer: {exc}") from exc
        return MockBackend(seed, registry)
    return ExternalBackend(descriptor.parameters["url"], registry)


def detect(
    image_id: str,
    image: Image.Image | None,
    descriptor: BackendDescriptor,
    registry: ClassRegistry,
) -> list[DetectionItem]:
    """One-shot convenience: build the backend and run it for a single image."""
    return create_backend(descriptor, registry).detect(image_id, image)
