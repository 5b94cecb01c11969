#!/usr/bin/env python3
"""End-to-end walkthrough on a synthetic pod dataset.

Generates a small labeled image set, validates and splits it, normalizes
everything through the preprocessing pipeline, scores a simulated detector
against the validation split, diagnoses one image, and finishes with a
training-log trend report. Every artifact lands under --out for inspection.

Usage: python3 scripts/demo_pipeline.py --out demo_run
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from PIL import Image, ImageDraw

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from pod_sentry import (  # noqa: E402
    BoundingBox,
    DatasetManifest,
    DetectionItem,
    DiagnosisConfig,
    EvalConfig,
    GroundTruthItem,
    ImageRecord,
    PreprocessConfig,
    check_trends,
    default_knowledge_base,
    default_registry,
    diagnose,
    evaluate,
    manifest_stats,
    run_pipeline,
    split_dataset,
    validate_manifest,
)
from pod_sentry.diagnosis import diagnosis_to_document  # noqa: E402
from pod_sentry.docio import dump_document  # noqa: E402
from pod_sentry.evaluation import report_to_document  # noqa: E402
from pod_sentry.formats import write_detections_file, write_manifest_file  # noqa: E402
from pod_sentry.trainlog import emit_training_report, synthesize_log  # noqa: E402

POD_COLORS = {0: (60, 30, 20), 1: (200, 190, 170), 2: (210, 160, 40)}


def synthesize_dataset(out: Path, n_images: int, rng: random.Random) -> DatasetManifest:
    """Images with 1..3 elliptic pods on leafy backgrounds, one box per pod."""
    raw = out / "raw"
    raw.mkdir(parents=True, exist_ok=True)
    registry = default_registry()
    images, annotations = [], []
    for index in range(n_images):
        width = rng.choice((480, 512, 400))
        height = rng.choice((360, 384, 480))
        image = Image.new("RGB", (width, height), (34, 85 + rng.randrange(40), 30))
        draw = ImageDraw.Draw(image)
        image_id = f"demo{index:03d}"
        for _ in range(rng.randint(1, 3)):
            class_id = rng.randrange(3)
            w = rng.randint(60, min(160, width - 20))
            h = rng.randint(60, min(160, height - 20))
            x0 = rng.randint(4, width - w - 4)
            y0 = rng.randint(4, height - h - 4)
            draw.ellipse((x0, y0, x0 + w, y0 + h), fill=POD_COLORS[class_id])
            annotations.append(
                GroundTruthItem(image_id, class_id, BoundingBox(x0, y0, x0 + w, y0 + h))
            )
        path = raw / f"{image_id}.png"
        image.save(path)
        images.append(ImageRecord(image_id, str(path), width, height, "train"))
    return DatasetManifest(tuple(images), registry, tuple(annotations))


def simulate_detector(
    manifest: DatasetManifest, rng: random.Random, noise: float
) -> list[DetectionItem]:
    """Jittered ground truths plus occasional misses, label swaps, and ghosts."""
    detections = []
    for record in manifest.split_images("validation"):
        for gt in manifest.annotations_for(record.image_id):
            if rng.random() < 0.15:
                continue  # missed pod
            spread = noise * min(gt.box.width, gt.box.height)
            corners = [
                gt.box.x_min + rng.uniform(-spread, spread),
                gt.box.y_min + rng.uniform(-spread, spread),
                gt.box.x_max + rng.uniform(-spread, spread),
                gt.box.y_max + rng.uniform(-spread, spread),
            ]
            box = BoundingBox(
                min(corners[0], corners[2]),
                min(corners[1], corners[3]),
                max(corners[0], corners[2]) + 1.0,
                max(corners[1], corners[3]) + 1.0,
            ).clipped_to(0, 0, record.width, record.height)
            if box is None:
                continue
            class_id = gt.class_id if rng.random() < 0.9 else rng.randrange(3)
            detections.append(
                DetectionItem(record.image_id, class_id, box, round(rng.uniform(0.4, 0.98), 4))
            )
        if rng.random() < 0.3:
            x0, y0 = rng.uniform(0, record.width - 40), rng.uniform(0, record.height - 40)
            detections.append(
                DetectionItem(
                    record.image_id,
                    rng.randrange(3),
                    BoundingBox(x0, y0, x0 + 36, y0 + 30),
                    round(rng.uniform(0.05, 0.45), 4),
                )
            )
    return detections


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("demo_run"))
    parser.add_argument("--images", type=int, default=24)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--noise", type=float, default=0.08,
                        help="box jitter as a fraction of pod size")
    args = parser.parse_args()
    rng = random.Random(args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    print("== dataset ==")
    manifest = synthesize_dataset(out, args.images, rng)
    manifest = split_dataset(manifest, 0.25, seed=args.seed)
    violations = validate_manifest(manifest)
    print(f"synthesized {args.images} images, {len(manifest.annotations)} pods, "
          f"{len(violations)} violation(s)")
    stats = manifest_stats(manifest, batch_size=8)
    print(f"splits: {stats['by_split']}, per-class: {stats['annotations_by_class']}, "
          f"{stats['steps_per_epoch']} steps/epoch at batch 8")
    write_manifest_file(out / "manifest.json", manifest)

    print("\n== preprocessing ==")
    result = run_pipeline(manifest, PreprocessConfig(target_size=320), out / "processed")
    dropped = sum(entry.dropped_annotations for entry in result.log)
    print(f"normalized {len(result.log)} images to 320x320, "
          f"{len(result.errors)} error(s), {dropped} sliver box(es) dropped")
    processed = result.manifest
    write_manifest_file(out / "processed" / "manifest.json", processed)

    print("\n== evaluation of a simulated detector ==")
    detections = simulate_detector(processed, rng, args.noise)
    write_detections_file(out / "detections.json", detections)
    report = evaluate(processed, detections, EvalConfig(split="validation"))
    registry = processed.registry
    for class_id in sorted(registry.ids()):
        (at_50,) = [r.ap for r in report.per_class[class_id] if r.iou_threshold == 0.5]
        shown = "undefined" if at_50 is None else f"{at_50:.4f}"
        print(f"  ap@0.50 {registry.name_of(class_id):<10} {shown}")
    map_50 = report.map_result.map_at_50
    map_50_95 = report.map_result.map_50_95
    print(f"  map@0.50      {'undefined' if map_50 is None else f'{map_50:.4f}'}")
    print(f"  map@0.50:0.95 {'undefined' if map_50_95 is None else f'{map_50_95:.4f}'}")
    dump_document(out / "eval_report.json", report_to_document(report, processed))

    print("\n== diagnosis of one validation image ==")
    target = next(iter(processed.split_images("validation")))
    per_image = [d for d in detections if d.image_id == target.image_id]
    diagnosis = diagnose(
        per_image,
        registry,
        default_knowledge_base(registry),
        DiagnosisConfig(),
        image_id=target.image_id,
    )
    print(f"image {target.image_id}: {len(diagnosis.pods)} pod(s)")
    for pod in diagnosis.pods:
        ranked = ", ".join(
            f"{registry.name_of(cid)} {prob:.2f}"
            for cid, prob in sorted(pod.probabilities.items(), key=lambda kv: -kv[1])
        )
        print(f"  {pod.box.corners()}: {ranked}")
    dump_document(out / "diagnosis.json", diagnosis_to_document(diagnosis, registry))

    print("\n== training-log trends ==")
    records = synthesize_log(100)
    for verdict in check_trends(records):
        print(f"  {verdict.series}: {verdict.status}")
    doc, text = emit_training_report(records)
    dump_document(out / "trend_report.json", doc)
    (out / "trend_report.txt").write_text(text, encoding="utf-8")

    print(f"\nartifacts under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
