"""Annotation and detection interchange formats.

Parsers are reentrant pure functions. All formats convert to the canonical
0-based pixel-corner convention at the boundary; unknown classes are hard
errors because silent skips corrupt recall denominators.
"""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Iterable, Sequence

from . import docio
from .annotations import (
    ClassEntry,
    ClassRegistry,
    DatasetManifest,
    DetectionItem,
    GroundTruthItem,
    ImageRecord,
)
from .errors import ParseError, SchemaError, UnknownClassError
from .geometry import BoundingBox, Convention

_YOLO_TOLERANCE = 1e-6


# --- YOLO label files -------------------------------------------------------
# One object per line: "class_id cx cy w h", all four coordinates normalized.


def parse_yolo_labels(
    label_text: str,
    image_size: tuple[int, int],
    registry: ClassRegistry,
    image_id: str,
    *,
    source: str | None = None,
) -> list[GroundTruthItem]:
    width, height = image_size
    items: list[GroundTruthItem] = []
    for line_no, raw in enumerate(label_text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ParseError(
                f"expected 5 whitespace-separated fields, got {len(fields)}",
                location=f"line {line_no}",
                source=source,
            )
        try:
            class_id = int(fields[0])
            cx, cy, w, h = (float(v) for v in fields[1:])
        except ValueError as exc:
            raise ParseError(
                f"unparsable number: {exc}", location=f"line {line_no}", source=source
            ) from exc
        if class_id not in registry:
            raise UnknownClassError(
                f"line {line_no}: unknown class id {class_id}; "
                f"registry has ids 0..{len(registry) - 1}"
            )
        if w < 0 or h < 0:
            raise ParseError(
                f"negative box size {w}x{h}", location=f"line {line_no}", source=source
            )
        corners = (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
        if min(corners) < -_YOLO_TOLERANCE or max(corners) > 1 + _YOLO_TOLERANCE:
            raise ParseError(
                f"box {corners} exceeds the normalized [0, 1] range",
                location=f"line {line_no}",
                source=source,
            )
        x_min, y_min, x_max, y_max = (min(max(v, 0.0), 1.0) for v in corners)
        items.append(
            GroundTruthItem(
                image_id=image_id,
                class_id=class_id,
                box=BoundingBox(
                    x_min * width, y_min * height, x_max * width, y_max * height
                ),
            )
        )
    return items


def emit_yolo_labels(
    items: Sequence[GroundTruthItem], image_size: tuple[int, int]
) -> str:
    """Inverse of parse_yolo_labels; 6-decimal fixed point, one object per line."""
    width, height = image_size
    lines = []
    for item in items:
        box = item.box
        if (
            box.x_min < -_YOLO_TOLERANCE * width
            or box.y_min < -_YOLO_TOLERANCE * height
            or box.x_max > width * (1 + _YOLO_TOLERANCE)
            or box.y_max > height * (1 + _YOLO_TOLERANCE)
        ):
            raise ValueError(
                f"box {box.corners()} does not fit inside a {width}x{height} image"
            )
        cx = (box.x_min + box.x_max) / 2 / width
        cy = (box.y_min + box.y_max) / 2 / height
        w = box.width / width
        h = box.height / height
        lines.append(f"{item.class_id} {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}")
    return "\n".join(lines) + ("\n" if lines else "")


# --- Pascal VOC XML ---------------------------------------------------------
# Subset: annotation/size/{width,height} and object/{name,bndbox}. Corners are
# 1-based inclusive pixels; conversion subtracts 1 from the mins only.


def _required_text(parent: ET.Element, path: str, *, source: str | None) -> str:
    node = parent.find(path)
    if node is None or node.text is None:
        raise ParseError(f"missing required element", location=path, source=source)
    return node.text.strip()


def parse_voc_xml(
    xml_text: str,
    registry: ClassRegistry,
    *,
    image_id: str | None = None,
    source: str | None = None,
) -> tuple[ImageRecord, list[GroundTruthItem]]:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise ParseError(f"invalid XML: {exc}", source=source) from exc

    def _number(path: str, parent: ET.Element = root) -> float:
        text = _required_text(parent, path, source=source)
        try:
            return float(text)
        except ValueError as exc:
            raise ParseError(
                f"unparsable number {text!r}", location=path, source=source
            ) from exc

    width = int(_number("size/width"))
    height = int(_number("size/height"))
    filename_node = root.find("filename")
    filename = filename_node.text.strip() if filename_node is not None and filename_node.text else ""
    if image_id is None:
        if not filename:
            raise ParseError(
                "missing required element", location="filename", source=source
            )
        image_id = Path(filename).stem

    items: list[GroundTruthItem] = []
    for index, obj in enumerate(root.iter("object")):
        where = f"object[{index}]"
        name = _required_text(obj, "name", source=source)
        try:
            class_id = registry.resolve(name)
        except UnknownClassError as exc:
            raise UnknownClassError(f"{where}: {exc}") from exc
        bndbox = obj.find("bndbox")
        if bndbox is None:
            raise ParseError("missing required element", location=f"{where}/bndbox", source=source)
        xmin = _number("xmin", bndbox)
        ymin = _number("ymin", bndbox)
        xmax = _number("xmax", bndbox)
        ymax = _number("ymax", bndbox)
        if xmin > xmax or ymin > ymax:
            raise ParseError(
                f"malformed box: corners ({xmin}, {ymin}, {xmax}, {ymax}) are inverted",
                location=f"{where}/bndbox",
                source=source,
            )
        items.append(
            GroundTruthItem(
                image_id=image_id,
                class_id=class_id,
                box=BoundingBox(xmin - 1, ymin - 1, xmax, ymax),
            )
        )
    record = ImageRecord(
        image_id=image_id, path=filename or f"{image_id}.jpg", width=width, height=height
    )
    return record, items


def _voc_number(value: float) -> str:
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return text if text else "0"


def emit_voc_xml(
    record: ImageRecord,
    items: Sequence[GroundTruthItem],
    registry: ClassRegistry,
) -> str:
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = record.path
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(record.width)
    ET.SubElement(size, "height").text = str(record.height)
    ET.SubElement(size, "depth").text = "3"
    for item in items:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = registry.name_of(item.class_id)
        bndbox = ET.SubElement(obj, "bndbox")
        ET.SubElement(bndbox, "xmin").text = _voc_number(item.box.x_min + 1)
        ET.SubElement(bndbox, "ymin").text = _voc_number(item.box.y_min + 1)
        ET.SubElement(bndbox, "xmax").text = _voc_number(item.box.x_max)
        ET.SubElement(bndbox, "ymax").text = _voc_number(item.box.y_max)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


# --- Detection interchange documents ----------------------------------------


def box_to_doc(box: BoundingBox) -> dict:
    return {
        "x_min": box.x_min,
        "y_min": box.y_min,
        "x_max": box.x_max,
        "y_max": box.y_max,
    }


def box_from_doc(doc: dict, convention: str, *, where: str, source: str | None = None) -> BoundingBox:
    if not isinstance(doc, dict):
        raise SchemaError("box must be an object", location=where, source=source)
    try:
        corners = tuple(float(doc[k]) for k in ("x_min", "y_min", "x_max", "y_max"))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed box: {exc!r}", location=where, source=source) from exc
    try:
        return BoundingBox(*corners, convention=Convention(convention))
    except ValueError as exc:
        raise SchemaError(str(exc), location=where, source=source) from exc


def detections_to_document(detections: Sequence[DetectionItem]) -> dict:
    ordered = sorted(detections, key=lambda d: (d.image_id, -d.score))
    return {
        "schema": docio.DETECTIONS_SCHEMA,
        "detections": [
            {
                "image_id": det.image_id,
                "class_id": det.class_id,
                "score": det.score,
                "box": box_to_doc(det.box),
                "convention": det.box.convention.value,
            }
            for det in ordered
        ],
    }


def detections_from_document(doc: dict, *, source: str | None = None) -> list[DetectionItem]:
    docio.check_schema(doc, docio.DETECTIONS_SCHEMA, source=source)
    raw = doc.get("detections")
    if not isinstance(raw, list):
        raise SchemaError("'detections' must be an array", source=source)
    items: list[DetectionItem] = []
    for index, entry in enumerate(raw):
        where = f"detections[{index}]"
        if not isinstance(entry, dict):
            raise SchemaError("record must be an object", location=where, source=source)
        missing = [k for k in ("image_id", "class_id", "score", "box", "convention") if k not in entry]
        if missing:
            raise SchemaError(f"missing fields {missing}", location=where, source=source)
        box = box_from_doc(entry["box"], entry["convention"], where=where, source=source)
        try:
            items.append(
                DetectionItem(
                    image_id=str(entry["image_id"]),
                    class_id=int(entry["class_id"]),
                    box=box,
                    score=float(entry["score"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc), location=where, source=source) from exc
    return items


def write_detections_file(path: str | os.PathLike, detections: Sequence[DetectionItem]) -> None:
    docio.dump_document(path, detections_to_document(detections))


def read_detections_file(path: str | os.PathLike) -> list[DetectionItem]:
    doc = docio.load_document(path, docio.DETECTIONS_SCHEMA)
    return detections_from_document(doc, source=str(path))


# --- Manifest documents ------------------------------------------------------


def manifest_to_document(manifest: DatasetManifest) -> dict:
    return {
        "schema": docio.MANIFEST_SCHEMA,
        "classes": [
            {"id": entry.class_id, "name": entry.name, "aliases": list(entry.aliases)}
            for entry in manifest.registry.classes
        ],
        "images": [
            {
                "id": record.image_id,
                "path": record.path,
                "width": record.width,
                "height": record.height,
                "split": record.split,
            }
            for record in manifest.images
        ],
        "annotations": [
            {
                "image_id": item.image_id,
                "class_id": item.class_id,
                "box": box_to_doc(item.box),
                "convention": item.box.convention.value,
            }
            for item in manifest.annotations
        ],
    }


def manifest_from_document(doc: dict, *, source: str | None = None) -> DatasetManifest:
    docio.check_schema(doc, docio.MANIFEST_SCHEMA, source=source)
    try:
        registry = ClassRegistry(
            classes=tuple(
                ClassEntry(
                    class_id=int(entry["id"]),
                    name=str(entry["name"]),
                    aliases=tuple(str(a) for a in entry.get("aliases", ())),
                )
                for entry in doc["classes"]
            )
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed classes table: {exc!r}", source=source) from exc

    images = []
    for index, entry in enumerate(doc.get("images", [])):
        where = f"images[{index}]"
        try:
            images.append(
                ImageRecord(
                    image_id=str(entry["id"]),
                    path=str(entry["path"]),
                    width=int(entry["width"]),
                    height=int(entry["height"]),
                    split=str(entry.get("split", "train")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(str(exc), location=where, source=source) from exc

    annotations = []
    for index, entry in enumerate(doc.get("annotations", [])):
        where = f"annotations[{index}]"
        try:
            box = box_from_doc(
                entry["box"], entry.get("convention", "pixel"), where=where, source=source
            )
            annotations.append(
                GroundTruthItem(
                    image_id=str(entry["image_id"]),
                    class_id=int(entry["class_id"]),
                    box=box,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(str(exc), location=where, source=source) from exc

    return DatasetManifest(images=tuple(images), registry=registry, annotations=tuple(annotations))


def write_manifest_file(path: str | os.PathLike, manifest: DatasetManifest) -> None:
    docio.dump_document(path, manifest_to_document(manifest))


def read_manifest_file(path: str | os.PathLike) -> DatasetManifest:
    doc = docio.load_document(path, docio.MANIFEST_SCHEMA)
    return manifest_from_document(doc, source=str(path))
