"""Detection-vs-ground-truth matching and dataset-level evaluation.

Matching is greedy in descending score with deterministic tie-breaks, so the
result is independent of input order. TN is fixed at 0 for detection
confusion counts; image-level accuracy belongs to the diagnosis module where
true negatives are meaningful.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import docio
from .annotations import DatasetManifest, DetectionItem, GroundTruthItem
from .errors import EvaluationInputError
from .geometry import BoundingBox, Convention, iou
from .metrics import (
    DEFAULT_INTERPOLATION_POINTS,
    DEFAULT_IOU_THRESHOLDS,
    ApResult,
    ConfusionCounts,
    MapResult,
    PrCurvePoint,
    average_precision,
    mean_ap,
)


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    interpolation_points: int = DEFAULT_INTERPOLATION_POINTS
    score_floor: float = 0.0
    split: str | None = "validation"

    def __post_init__(self) -> None:
        thresholds = tuple(float(t) for t in self.iou_thresholds)
        object.__setattr__(self, "iou_thresholds", thresholds)
        if not thresholds:
            raise ValueError("iou_thresholds must be non-empty")
        if any(not 0.0 < t <= 1.0 for t in thresholds):
            raise ValueError(f"iou thresholds must be in (0, 1], got {thresholds}")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"iou thresholds must be strictly increasing, got {thresholds}")
        if self.interpolation_points < 2:
            raise ValueError("interpolation_points must be >= 2")


def _det_order(det: DetectionItem):
    box = det.box
    return (-det.score, box.x_min, box.y_min, box.x_max, box.y_max)


def _gt_order(gt: GroundTruthItem):
    return gt.box.corners()


def match_detections(
    gts: Sequence[GroundTruthItem],
    dets: Sequence[DetectionItem],
    iou_threshold: float,
) -> list[tuple[DetectionItem, GroundTruthItem | None]]:
    """Greedy matching for a single image and class.

    Detections are processed in descending score (ties by ascending box
    x_min, then y_min); each takes the unmatched ground truth of highest
    IoU >= threshold, and each ground truth matches at most once. Returns
    (detection, matched ground truth or None) pairs in processing order.
    """
    unmatched = list(gts)
    matches: list[tuple[DetectionItem, GroundTruthItem | None]] = []
    for det in sorted(dets, key=_det_order):
        best: GroundTruthItem | None = None
        best_iou = 0.0
        for gt in unmatched:
            overlap = iou(det.box, gt.box)
            if overlap < iou_threshold:
                continue
            if (
                best is None
                or overlap > best_iou
                or (overlap == best_iou and _gt_order(gt) < _gt_order(best))
            ):
                best = gt
                best_iou = overlap
        if best is not None:
            unmatched.remove(best)
        matches.append((det, best))
    return matches


def pr_curve(
    gts: Sequence[GroundTruthItem],
    dets: Sequence[DetectionItem],
    class_id: int,
    iou_threshold: float,
    *,
    score_floor: float = 0.0,
) -> list[PrCurvePoint] | None:
    """Dataset-wide precision-recall sweep for one class.

    Sweeps the score threshold down through the distinct detection scores;
    recall never decreases along the sweep. Returns None when the class has
    no ground truth (AP undefined), and an empty list when there are no
    detections (AP 0 by convention).
    """
    class_gts = [gt for gt in gts if gt.class_id == class_id]
    if not class_gts:
        return None
    class_dets = sorted(
        (d for d in dets if d.class_id == class_id and d.score >= score_floor),
        key=_det_order,
    )
    total_gt = len(class_gts)
    unmatched: dict[str, list[GroundTruthItem]] = defaultdict(list)
    for gt in class_gts:
        unmatched[gt.image_id].append(gt)

    points: list[PrCurvePoint] = []
    tp = fp = 0
    for index, det in enumerate(class_dets):
        pool = unmatched.get(det.image_id, [])
        best: GroundTruthItem | None = None
        best_iou = 0.0
        for gt in pool:
            overlap = iou(det.box, gt.box)
            if overlap < iou_threshold:
                continue
            if (
                best is None
                or overlap > best_iou
                or (overlap == best_iou and _gt_order(gt) < _gt_order(best))
            ):
                best = gt
                best_iou = overlap
        if best is not None:
            pool.remove(best)
            tp += 1
        else:
            fp += 1
        is_last_of_score = (
            index + 1 == len(class_dets) or class_dets[index + 1].score != det.score
        )
        if is_last_of_score:
            points.append(
                PrCurvePoint(
                    recall=tp / total_gt,
                    precision=tp / (tp + fp),
                    score_threshold=det.score,
                )
            )
    return points


def confusion_at(
    gts: Sequence[GroundTruthItem],
    dets: Sequence[DetectionItem],
    class_id: int,
    iou_threshold: float,
    *,
    score_floor: float = 0.0,
) -> ConfusionCounts:
    """Per-class confusion counts over a whole dataset; TN is 0 by convention."""
    class_gts = [gt for gt in gts if gt.class_id == class_id]
    class_dets = [d for d in dets if d.class_id == class_id and d.score >= score_floor]
    by_image: dict[str, list[GroundTruthItem]] = defaultdict(list)
    for gt in class_gts:
        by_image[gt.image_id].append(gt)
    dets_by_image: dict[str, list[DetectionItem]] = defaultdict(list)
    for det in class_dets:
        dets_by_image[det.image_id].append(det)
    tp = fp = 0
    for image_id, image_dets in dets_by_image.items():
        for _, matched in match_detections(by_image.get(image_id, []), image_dets, iou_threshold):
            if matched is not None:
                tp += 1
            else:
                fp += 1
    return ConfusionCounts(tp=tp, tn=0, fp=fp, fn=len(class_gts) - tp)


@dataclass(frozen=True)
class EvaluationReport:
    per_class: Mapping[int, tuple[ApResult, ...]]
    map_result: MapResult
    counts_at_50: Mapping[int, ConfusionCounts]
    sizes: Mapping[str, object]
    config: EvalConfig


def _resolve_convention(det: DetectionItem, width: int, height: int) -> DetectionItem:
    box = det.box
    if box.convention is Convention.PIXEL:
        return det
    pixel_box = BoundingBox(
        box.x_min * width, box.y_min * height, box.x_max * width, box.y_max * height
    )
    return DetectionItem(
        image_id=det.image_id, class_id=det.class_id, box=pixel_box, score=det.score
    )


def evaluate(
    manifest: DatasetManifest,
    detections: Sequence[DetectionItem],
    config: EvalConfig = EvalConfig(),
) -> EvaluationReport:
    """Per-class AP at each threshold, mAP@0.5, mAP over the ladder, counts.

    Detections must reference manifest images; those on images outside the
    configured split are excluded and tallied in the sizes section. Every
    registry class appears in the result, with an undefined AP sentinel when
    it has no ground truth.
    """
    image_map = manifest.image_map()
    split_records = {r.image_id: r for r in manifest.split_images(config.split)}

    used: list[DetectionItem] = []
    ignored = 0
    for det in detections:
        if det.image_id not in image_map:
            raise EvaluationInputError(
                f"detection references unknown image {det.image_id!r}"
            )
        if det.class_id not in manifest.registry:
            raise EvaluationInputError(
                f"detection on image {det.image_id!r} has unknown class id {det.class_id}"
            )
        record = image_map[det.image_id]
        if det.image_id not in split_records:
            ignored += 1
            continue
        used.append(_resolve_convention(det, record.width, record.height))

    gts = [gt for gt in manifest.annotations if gt.image_id in split_records]

    per_class: dict[int, tuple[ApResult, ...]] = {}
    for class_id in manifest.registry.ids():
        results = []
        for threshold in config.iou_thresholds:
            curve = pr_curve(
                gts, used, class_id, threshold, score_floor=config.score_floor
            )
            if curve is None:
                ap = None
                curve_points: tuple[PrCurvePoint, ...] = ()
            elif not curve:
                ap = 0.0
                curve_points = ()
            else:
                ap = average_precision(curve, config.interpolation_points)
                curve_points = tuple(curve)
            results.append(
                ApResult(
                    class_id=class_id,
                    iou_threshold=threshold,
                    ap=ap,
                    curve=curve_points,
                )
            )
        per_class[class_id] = tuple(results)

    has_50 = any(abs(t - 0.5) <= 1e-9 for t in config.iou_thresholds)
    map_result = mean_ap(per_class, config.iou_thresholds, require_map50=has_50)

    counts = {
        class_id: confusion_at(gts, used, class_id, 0.5, score_floor=config.score_floor)
        for class_id in manifest.registry.ids()
    }

    gt_by_class = {
        manifest.registry.name_of(class_id): sum(1 for g in gts if g.class_id == class_id)
        for class_id in manifest.registry.ids()
    }
    sizes = {
        "images": len(split_records),
        "ground_truths": gt_by_class,
        "detections_used": len(used),
        "detections_ignored": ignored,
    }
    return EvaluationReport(
        per_class=per_class,
        map_result=map_result,
        counts_at_50=counts,
        sizes=sizes,
        config=config,
    )


def report_to_document(report: EvaluationReport, manifest: DatasetManifest) -> dict:
    registry = manifest.registry
    per_class = []
    for class_id, results in report.per_class.items():
        per_class.append(
            {
                "class_id": class_id,
                "name": registry.name_of(class_id),
                "ap_by_threshold": {
                    f"{r.iou_threshold:.2f}": r.ap for r in results
                },
            }
        )
    return {
        "schema": docio.EVAL_SCHEMA,
        "per_class": per_class,
        "map_50": report.map_result.map_at_50,
        "map_50_95": report.map_result.map_50_95,
        "counts": {
            registry.name_of(class_id): {
                "tp": c.tp,
                "tn": c.tn,
                "fp": c.fp,
                "fn": c.fn,
            }
            for class_id, c in report.counts_at_50.items()
        },
        "sizes": dict(report.sizes),
        "config": {
            "iou_thresholds": list(report.config.iou_thresholds),
            "interpolation_points": report.config.interpolation_points,
            "score_floor": report.config.score_floor,
            "split": report.config.split,
        },
    }
