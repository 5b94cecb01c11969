"""Command-line entry point.

Subcommands delegate to the library modules; this file only parses arguments,
wires file I/O, and maps failures onto the exit-status contract:

    0  success
    1  data violations found (invalid manifest, failed trends, bad content)
    2  usage or configuration error
    3  I/O error (missing or unreadable files)
"""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

from PIL import Image, ImageOps, UnidentifiedImageError

from . import docio
from .annotations import default_registry, manifest_stats, validate_manifest
from .backends import create_backend
from .diagnosis import default_knowledge_base, diagnose, diagnosis_to_document, load_knowledge_base
from .errors import PodSentryError
from .evaluation import EvalConfig, evaluate, report_to_document
from .formats import (
    emit_voc_xml,
    emit_yolo_labels,
    parse_voc_xml,
    read_detections_file,
    read_manifest_file,
    write_manifest_file,
)
from .preprocess import (
    PreprocessConfig,
    crop_to_square,
    pipeline_log_document,
    read_crop_sidecar,
    resize_square,
    run_pipeline,
    split_dataset,
)
from .service import CaseStore, image_id_for, load_service_config, run_service
from .trainlog import emit_training_report, parse_training_log

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pod-sentry",
        description="Cocoa pod disease detection toolkit: dataset checks, "
        "evaluation, diagnosis, and the HTTP service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    dataset = sub.add_parser("dataset", help="manifest inspection and conversion")
    dataset_sub = dataset.add_subparsers(dest="subcommand", required=True)

    p = dataset_sub.add_parser("validate", help="check a manifest for violations")
    p.add_argument("--manifest", required=True)
    p.set_defaults(handler=_cmd_dataset_validate)

    p = dataset_sub.add_parser(
        "convert",
        help="export a manifest to YOLO or VOC layout, or import VOC XMLs",
    )
    p.add_argument("--manifest", help="manifest to export (with --format)")
    p.add_argument("--format", choices=("yolo", "voc"), help="export layout")
    p.add_argument("--voc", help="directory of VOC XML files to import")
    p.add_argument("--out", required=True, help="output directory (export) or manifest path (import)")
    p.set_defaults(handler=_cmd_dataset_convert)

    p = dataset_sub.add_parser("split", help="assign train/validation splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratio", type=float, default=0.2, help="validation fraction (default 0.2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_dataset_split)

    p = dataset_sub.add_parser("stats", help="class counts and steps per epoch")
    p.add_argument("--manifest", required=True)
    p.add_argument("--batch", type=int, help="batch size for steps-per-epoch")
    p.set_defaults(handler=_cmd_dataset_stats)

    preprocess = sub.add_parser("preprocess", help="image normalization pipeline")
    preprocess_sub = preprocess.add_subparsers(dest="subcommand", required=True)
    p = preprocess_sub.add_parser("run", help="crop, resize, and re-annotate a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--target-size", type=int, default=640)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--crops", help="sidecar document with custom crop rects")
    p.set_defaults(handler=_cmd_preprocess_run)

    evalp = sub.add_parser("eval", help="detector evaluation")
    eval_sub = evalp.add_subparsers(dest="subcommand", required=True)
    p = eval_sub.add_parser("run", help="score detections against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True, help="report document path")
    p.add_argument("--split", default="validation", choices=("train", "validation"))
    p.add_argument("--config", help="service config; publishes the report to its store")
    p.set_defaults(handler=_cmd_eval_run)

    diag = sub.add_parser("diagnose", help="single-image diagnosis")
    diag_sub = diag.add_subparsers(dest="subcommand", required=True)
    p = diag_sub.add_parser("image", help="diagnose one photo offline")
    p.add_argument("image", help="path to the photo")
    p.add_argument("--config", required=True, help="service config with backend descriptors")
    p.add_argument("--backend", help="named backend from the config (default: its default)")
    p.add_argument("--out", help="write the diagnosis document here instead of stdout")
    p.set_defaults(handler=_cmd_diagnose_image)

    trainlog = sub.add_parser("trainlog", help="training-log trend checks")
    trainlog_sub = trainlog.add_subparsers(dest="subcommand", required=True)
    p = trainlog_sub.add_parser("report", help="parse a log and judge its trends")
    p.add_argument("log", help="comma-separated training log")
    p.add_argument("--out", help="write the series document here")
    p.set_defaults(handler=_cmd_trainlog_report)

    p = sub.add_parser("serve", help="run the HTTP diagnosis service")
    p.add_argument("--config", required=True)
    p.set_defaults(handler=_cmd_serve)

    return parser


def _cmd_dataset_validate(args: argparse.Namespace) -> int:
    manifest = read_manifest_file(args.manifest)
    violations = validate_manifest(manifest)
    for v in violations:
        print(f"{v.kind} {v.subject}: {v.message}")
    if violations:
        print(f"{len(violations)} violation(s) found")
        return EXIT_VIOLATIONS
    print("manifest OK")
    return EXIT_OK


def _cmd_dataset_convert(args: argparse.Namespace) -> int:
    if args.voc is not None:
        if args.manifest or args.format:
            raise ValueError("--voc import does not take --manifest/--format")
        return _import_voc(Path(args.voc), Path(args.out))
    if not args.manifest or not args.format:
        raise ValueError("export needs --manifest and --format (or use --voc to import)")
    manifest = read_manifest_file(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "yolo":
        names = [manifest.registry.name_of(i) for i in sorted(manifest.registry.ids())]
        (out_dir / "classes.txt").write_text("\n".join(names) + "\n", encoding="utf-8")
        for record in manifest.images:
            items = manifest.annotations_for(record.image_id)
            text = emit_yolo_labels(items, (record.width, record.height))
            (out_dir / f"{record.image_id}.txt").write_text(text, encoding="utf-8")
    else:
        for record in manifest.images:
            items = manifest.annotations_for(record.image_id)
            xml = emit_voc_xml(record, items, manifest.registry)
            (out_dir / f"{record.image_id}.xml").write_text(xml, encoding="utf-8")
    print(f"wrote {len(manifest.images)} {args.format} file(s) to {out_dir}")
    return EXIT_OK


def _import_voc(voc_dir: Path, out_path: Path) -> int:
    from .annotations import DatasetManifest

    registry = default_registry()
    images = []
    annotations = []
    for xml_path in sorted(voc_dir.glob("*.xml")):
        record, items = parse_voc_xml(
            xml_path.read_text(encoding="utf-8"), registry, source=str(xml_path)
        )
        images.append(record)
        annotations.extend(items)
    manifest = DatasetManifest(
        images=tuple(images), registry=registry, annotations=tuple(annotations)
    )
    write_manifest_file(out_path, manifest)
    print(f"imported {len(images)} image(s), {len(annotations)} annotation(s) -> {out_path}")
    return EXIT_OK


def _cmd_dataset_split(args: argparse.Namespace) -> int:
    manifest = read_manifest_file(args.manifest)
    split = split_dataset(manifest, args.ratio, args.seed)
    write_manifest_file(args.out, split)
    counts = {name: len(split.split_images(name)) for name in ("train", "validation")}
    print(f"train {counts['train']}, validation {counts['validation']} -> {args.out}")
    return EXIT_OK


def _cmd_dataset_stats(args: argparse.Namespace) -> int:
    manifest = read_manifest_file(args.manifest)
    stats = manifest_stats(manifest, batch_size=args.batch)
    print(f"images: {stats['images']}")
    for split_name, count in sorted(stats["by_split"].items()):
        print(f"  {split_name}: {count}")
    print("annotations by class:")
    for name, count in sorted(stats["annotations_by_class"].items()):
        print(f"  {name}: {count}")
    if "steps_per_epoch" in stats:
        print(f"{stats['steps_per_epoch']} steps/epoch at batch {args.batch}")
    return EXIT_OK


def _cmd_preprocess_run(args: argparse.Namespace) -> int:
    manifest = read_manifest_file(args.manifest)
    crops = read_crop_sidecar(args.crops) if args.crops else None
    config = PreprocessConfig(
        target_size=args.target_size,
        crop_mode="custom" if crops else "center",
        workers=args.workers,
    )
    result = run_pipeline(manifest, config, args.out, crops)
    out_dir = Path(args.out)
    write_manifest_file(out_dir / "manifest.json", result.manifest)
    docio.dump_document(out_dir / "preprocess_log.json", pipeline_log_document(result, config))
    for err in result.errors:
        print(f"error {err.image_id} ({err.source_path}): {err.message}", file=sys.stderr)
    print(
        f"processed {len(result.log)} image(s), {len(result.errors)} error(s) -> {out_dir}"
    )
    return EXIT_VIOLATIONS if result.errors else EXIT_OK


def _cmd_eval_run(args: argparse.Namespace) -> int:
    manifest = read_manifest_file(args.manifest)
    detections = read_detections_file(args.detections)
    config = EvalConfig(split=args.split)
    report = evaluate(manifest, detections, config)
    doc = report_to_document(report, manifest)
    docio.dump_document(args.out, doc)
    if args.config:
        service_config = load_service_config(args.config)
        store = CaseStore(service_config.store)
        published = store.publish_eval(doc)
        print(f"published -> {published}")

    def show(value: float | None) -> str:
        return "undefined" if value is None else f"{value:.4f}"

    print(f"map@0.50 {show(report.map_result.map_at_50)}")
    print(f"map@0.50:0.95 {show(report.map_result.map_50_95)}")
    return EXIT_OK


def _cmd_diagnose_image(args: argparse.Namespace) -> int:
    config = load_service_config(args.config)
    backend_name = args.backend or config.default_backend
    if backend_name not in config.backends:
        raise ValueError(
            f"backend {backend_name!r} not in config; choices: {', '.join(sorted(config.backends))}"
        )
    registry = default_registry()
    knowledge = (
        load_knowledge_base(config.knowledge_base_path, registry)
        if config.knowledge_base_path is not None
        else default_knowledge_base(registry)
    )
    payload = Path(args.image).read_bytes()
    try:
        with Image.open(io.BytesIO(payload)) as raw:
            decoded = ImageOps.exif_transpose(raw).convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        print(f"cannot decode {args.image}: {exc}", file=sys.stderr)
        return EXIT_VIOLATIONS
    cropped, _ = crop_to_square(decoded)
    processed = resize_square(cropped, config.target_size)
    image_id = image_id_for(payload)
    backend = create_backend(config.backends[backend_name], registry)
    detections = backend.detect(image_id, processed)
    result = diagnose(detections, registry, knowledge, config.diagnosis, image_id=image_id)
    doc = diagnosis_to_document(result, registry)
    if args.out:
        docio.dump_document(args.out, doc)
        print(f"wrote {args.out}")
    else:
        print(docio.canonical_dumps(doc))
    return EXIT_OK


def _cmd_trainlog_report(args: argparse.Namespace) -> int:
    text = Path(args.log).read_text(encoding="utf-8")
    records = parse_training_log(text, source=args.log)
    doc, summary = emit_training_report(records)
    if args.out:
        docio.dump_document(args.out, doc)
    print(summary)
    failed = [v for v in doc["verdicts"] if v["status"] == "fail"]
    return EXIT_VIOLATIONS if failed else EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    run_service(load_service_config(args.config))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PodSentryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATIONS
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:  # console_scripts target
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
