"""Schema-tagged JSON document helpers.

Every on-disk and on-wire document carries a ``schema`` field like
``pod-sentry/manifest@1``. Serialization is canonical (sorted keys) so that
identical content always produces identical bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

from .errors import SchemaError

MANIFEST_SCHEMA = "pod-sentry/manifest@1"
DETECTIONS_SCHEMA = "pod-sentry/detections@1"
EVAL_SCHEMA = "pod-sentry/eval@1"
DIAGNOSIS_SCHEMA = "pod-sentry/diagnosis@1"
KB_SCHEMA = "pod-sentry/kb@1"
TRAINLOG_SCHEMA = "pod-sentry/trainlog@1"
PREPROCESS_LOG_SCHEMA = "pod-sentry/preprocess-log@1"
CROPS_SCHEMA = "pod-sentry/crops@1"
CASE_SCHEMA = "pod-sentry/case@1"
FEEDBACK_SCHEMA = "pod-sentry/feedback@1"
CONFIG_SCHEMA = "pod-sentry/config@1"


def canonical_dumps(doc: Any, *, compact: bool = False) -> str:
    if compact:
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def canonical_bytes(doc: Any) -> bytes:
    return canonical_dumps(doc, compact=True).encode("utf-8")


def check_schema(doc: Any, expected: str, *, source: str | None = None) -> dict:
    if not isinstance(doc, dict):
        raise SchemaError(f"expected a JSON object, got {type(doc).__name__}", source=source)
    got = doc.get("schema")
    if got != expected:
        raise SchemaError(f"expected schema {expected!r}, got {got!r}", source=source)
    return doc


def load_document(path: str | os.PathLike, expected_schema: str) -> dict:
    # OSError propagates untouched so callers can distinguish I/O failures
    # from malformed content.
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", source=str(path)) from exc
    return check_schema(doc, expected_schema, source=str(path))


def dump_document(path: str | os.PathLike, doc: Any) -> None:
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(canonical_dumps(doc))
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
