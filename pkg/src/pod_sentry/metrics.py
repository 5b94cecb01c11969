"""Scalar detection metrics: confusion counts, interpolated AP, mAP aggregation.

Undefined values (zero denominators) are explicit ``None`` sentinels, never
coerced to 0; coercion silently distorts class means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import UndefinedMetricError

DEFAULT_IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
DEFAULT_INTERPOLATION_POINTS = 101
_THRESHOLD_EPS = 1e-9


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def accuracy(counts: ConfusionCounts) -> float:
    """Share of correct predictions, (tp + tn) / total. Undefined for total 0."""
    if counts.total == 0:
        raise UndefinedMetricError("accuracy is undefined for zero total predictions")
    return (counts.tp + counts.tn) / counts.total


def precision_recall(counts: ConfusionCounts) -> tuple[float | None, float | None]:
    """(precision, recall); a component is None when its denominator is 0."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp > 0 else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn > 0 else None
    return precision, recall


@dataclass(frozen=True)
class PrCurvePoint:
    """One point of a precision-recall sweep, taken at a score threshold."""

    recall: float
    precision: float
    score_threshold: float

    def __post_init__(self) -> None:
        for name in ("recall", "precision", "score_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v!r}")


@dataclass(frozen=True)
class ApResult:
    """Average precision for one class at one IoU threshold.

    ``ap`` is None when the class has no ground truth at all, so the metric
    is undefined and must be excluded from class means.
    """

    class_id: int
    iou_threshold: float
    ap: float | None
    curve: tuple[PrCurvePoint, ...] = ()

    def __post_init__(self) -> None:
        if not 0.05 <= self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in [0.05, 1.0], got {self.iou_threshold}")
        if self.ap is not None and not 0.0 <= self.ap <= 1.0:
            raise ValueError(f"ap must be in [0, 1], got {self.ap}")
        object.__setattr__(self, "curve", tuple(self.curve))


@dataclass(frozen=True)
class MapResult:
    """Class-mean APs across a threshold ladder.

    ``map_50_95`` is the arithmetic mean over exactly the configured
    thresholds of the per-threshold class means; None when every class is
    undefined.
    """

    per_class: Mapping[int, tuple[ApResult, ...]]
    map_at_50: float | None
    map_50_95: float | None
    thresholds: tuple[float, ...]


def interpolation_levels(interpolation_points: int) -> np.ndarray:
    """Equally spaced recall levels 0, 1/(P-1), ..., 1.

    Computed as i / (P - 1) so an independent oracle using the same formula
    lands on bit-identical doubles.
    """
    if interpolation_points < 2:
        raise ValueError(f"need at least 2 interpolation points, got {interpolation_points}")
    return np.arange(interpolation_points, dtype=np.float64) / float(interpolation_points - 1)


def average_precision(
    curve: Sequence[PrCurvePoint],
    interpolation_points: int = DEFAULT_INTERPOLATION_POINTS,
) -> float:
    """Interpolated AP: mean of max-precision-at-recall>=r over equally spaced r.

    The interpolated precision at level r is the running maximum of precision
    over all curve points with recall >= r (0 when no point qualifies).
    """
    levels = interpolation_levels(interpolation_points)
    points = list(curve)
    if not points:
        raise ValueError("cannot compute AP of an empty precision-recall curve")
    recalls = np.array([p.recall for p in points], dtype=np.float64)
    precisions = np.array([p.precision for p in points], dtype=np.float64)
    order = np.argsort(recalls, kind="stable")
    recalls = recalls[order]
    precisions = precisions[order]
    # envelope[i] = max precision among points with recall >= recalls[i]
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    idx = np.searchsorted(recalls, levels, side="left")
    interpolated = np.where(idx < len(points), envelope[np.minimum(idx, len(points) - 1)], 0.0)
    return float(np.mean(interpolated))


def mean_ap(
    per_class: Mapping[int, Sequence[ApResult]],
    thresholds: Sequence[float],
    *,
    require_map50: bool = True,
) -> MapResult:
    """Aggregate per-class AP tables into class means and the threshold mean.

    Every class must supply one ApResult per threshold, in threshold order.
    Classes with undefined AP are excluded from class means; they never count
    as zero.
    """
    thresholds = tuple(float(t) for t in thresholds)
    if not thresholds:
        raise ValueError("thresholds must be non-empty")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError(f"thresholds must be strictly increasing, got {thresholds}")
    if not per_class:
        raise ValueError("need at least one class")
    table: dict[int, tuple[ApResult, ...]] = {}
    for class_id, results in per_class.items():
        results = tuple(results)
        if len(results) != len(thresholds):
            raise ValueError(
                f"class {class_id}: expected {len(thresholds)} AP entries, got {len(results)}"
            )
        for result, t in zip(results, thresholds):
            if abs(result.iou_threshold - t) > _THRESHOLD_EPS:
                raise ValueError(
                    f"class {class_id}: AP entry at threshold {result.iou_threshold} "
                    f"does not line up with configured threshold {t}"
                )
        table[class_id] = results

    per_threshold_means: list[float | None] = []
    for j in range(len(thresholds)):
        defined = [table[c][j].ap for c in table if table[c][j].ap is not None]
        per_threshold_means.append(sum(defined) / len(defined) if defined else None)

    idx_50 = next(
        (j for j, t in enumerate(thresholds) if abs(t - 0.5) <= _THRESHOLD_EPS), None
    )
    if idx_50 is None and require_map50:
        raise UndefinedMetricError(
            "mAP@0.5 requested but threshold 0.5 is not among the configured thresholds"
        )
    map_at_50 = per_threshold_means[idx_50] if idx_50 is not None else None

    if all(v is not None for v in per_threshold_means):
        map_50_95 = sum(per_threshold_means) / len(per_threshold_means)  # type: ignore[arg-type]
    else:
        map_50_95 = None

    return MapResult(
        per_class=table,
        map_at_50=map_at_50,
        map_50_95=map_50_95,
        thresholds=thresholds,
    )
