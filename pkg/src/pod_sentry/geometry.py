"""Axis-aligned bounding boxes and overlap geometry.

Pure math over immutable values: no I/O, no state, safe to call from any
number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConventionMismatchError


class Convention(str, Enum):
    """Coordinate space a box is expressed in."""

    PIXEL = "pixel"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle in corner form.

    Inverted corners are rejected rather than swapped; parsers normalize
    before constructing. Zero-area (degenerate) boxes are legal and have
    IoU 0 against anything, themselves included.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    convention: Convention = Convention.PIXEL

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(float(v)) for v in coords):
            raise ValueError(f"box coordinates must be finite: {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(
                "inverted box: expected x_min <= x_max and y_min <= y_max, "
                f"got ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )
        object.__setattr__(self, "convention", Convention(self.convention))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def translated(self, dx: float, dy: float) -> "BoundingBox":
        return replace(
            self,
            x_min=self.x_min + dx,
            y_min=self.y_min + dy,
            x_max=self.x_max + dx,
            y_max=self.y_max + dy,
        )

    def scaled(self, factor: float) -> "BoundingBox":
        """Uniform scale about the origin. Factor must be positive."""
        if factor <= 0:
            raise ValueError(f"scale factor must be positive, got {factor}")
        return replace(
            self,
            x_min=self.x_min * factor,
            y_min=self.y_min * factor,
            x_max=self.x_max * factor,
            y_max=self.y_max * factor,
        )

    def clipped_to(
        self, x_min: float, y_min: float, x_max: float, y_max: float
    ) -> "BoundingBox | None":
        """Intersection with a window, or None when there is no overlap.

        A box touching the window edge clips to a zero-area box, which is
        still a valid value.
        """
        cx_min = max(self.x_min, x_min)
        cy_min = max(self.y_min, y_min)
        cx_max = min(self.x_max, x_max)
        cy_max = min(self.y_max, y_max)
        if cx_min > cx_max or cy_min > cy_max:
            return None
        return replace(self, x_min=cx_min, y_min=cy_min, x_max=cx_max, y_max=cy_max)

    def with_convention(self, convention: Convention) -> "BoundingBox":
        return replace(self, convention=convention)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes sharing a coordinate convention.

    Returns 0.0 when the union has zero area (two degenerate boxes), keeping
    the metric total over all valid inputs.
    """
    if a.convention is not b.convention:
        raise ConventionMismatchError(
            f"cannot combine {a.convention.value!r} and {b.convention.value!r} boxes; "
            "convert to one convention first"
        )
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union
