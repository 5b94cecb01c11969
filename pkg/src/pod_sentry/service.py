"""HTTP diagnosis service: upload a photo, get back a diagnosis document.

The flow mirrors batch diagnosis: decode, square-crop, resize, run the
configured detection backend, cluster and diagnose, persist the case, and
answer with the diagnosis document plus a case id. Cases are content
addressed (digest of the original bytes plus the semantic config), so
re-uploading the same photo returns the stored result instead of a new case.

Persistence is a plain directory tree, one folder per case, with an
append-only feedback log per case. No database; everything is inspectable
with a file browser.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from PIL import Image, ImageOps, UnidentifiedImageError

from . import docio
from .annotations import ClassRegistry, default_registry
from .backends import BackendDescriptor, create_backend
from .diagnosis import (
    DiagnosisConfig,
    default_knowledge_base,
    diagnose,
    diagnosis_to_document,
    load_knowledge_base,
)
from .errors import BackendError, BackendTransportError, SchemaError
from .preprocess import crop_to_square, resize_square

FEEDBACK_VERDICTS = ("not_the_result", "not_the_disease")

ID_HEX_LENGTH = 16

ENV_STORE = "POD_SENTRY_STORE"
ENV_LISTEN = "POD_SENTRY_LISTEN"

DEFAULT_LISTEN = "127.0.0.1:8713"


def image_id_for(image_bytes: bytes) -> str:
    """Content address of the uploaded bytes; keys backend fixtures."""
    return hashlib.sha256(image_bytes).hexdigest()[:ID_HEX_LENGTH]


def config_digest(
    target_size: int, diagnosis_config: DiagnosisConfig, descriptor: BackendDescriptor
) -> str:
    """Digest of the knobs that change diagnosis output.

    Store location, listen address, and UI paths are deliberately excluded:
    moving the store must not re-key existing cases.
    """
    semantic = {
        "target_size": target_size,
        "nms_iou_threshold": diagnosis_config.nms_iou_threshold,
        "score_floor": diagnosis_config.score_floor,
        "backend": descriptor.to_doc(),
    }
    return hashlib.sha256(docio.canonical_bytes(semantic)).hexdigest()


def case_id_for(image_bytes: bytes, digest: str) -> str:
    return hashlib.sha256(image_bytes + b"\x00" + digest.encode()).hexdigest()[:ID_HEX_LENGTH]


@dataclass(frozen=True)
class ServiceConfig:
    store: Path
    listen: str = DEFAULT_LISTEN
    backends: Mapping[str, BackendDescriptor] = field(default_factory=dict)
    default_backend: str = "default"
    diagnosis: DiagnosisConfig = field(default_factory=DiagnosisConfig)
    target_size: int = 640
    knowledge_base_path: Path | None = None
    ui_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.target_size <= 0:
            raise ValueError("target_size must be positive")
        if not self.backends:
            raise ValueError("at least one backend must be configured")
        if self.default_backend not in self.backends:
            raise ValueError(f"default backend {self.default_backend!r} not configured")
        object.__setattr__(self, "backends", dict(self.backends))


def load_service_config(path: str | Path) -> ServiceConfig:
    """Read the service config document, applying environment overrides.

    POD_SENTRY_STORE and POD_SENTRY_LISTEN take precedence over the file.
    Relative paths resolve against the config file's directory.
    """
    path = Path(path)
    doc = docio.load_document(path, docio.CONFIG_SCHEMA)
    base = path.parent

    def resolve(p: str | None) -> Path | None:
        if p is None:
            return None
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    backends_doc = doc.get("backends")
    if backends_doc is None:
        if "backend" not in doc:
            raise SchemaError("config must define 'backend' or 'backends'", source=str(path))
        backends_doc = {"default": doc["backend"]}
    backends = {}
    for name, desc in backends_doc.items():
        descriptor = BackendDescriptor.from_doc(desc)
        if descriptor.kind == "file":
            resolved = resolve(descriptor.parameters["path"])
            descriptor = BackendDescriptor("file", {"path": str(resolved)})
        backends[str(name)] = descriptor
    diag_doc = doc.get("diagnosis", {})
    diagnosis = DiagnosisConfig(
        nms_iou_threshold=float(diag_doc.get("nms_iou_threshold", 0.5)),
        score_floor=float(diag_doc.get("score_floor", 0.25)),
    )
    store = os.environ.get(ENV_STORE) or doc.get("store")
    if store is None:
        raise SchemaError("config must define a store path", source=str(path))
    listen = os.environ.get(ENV_LISTEN) or doc.get("listen", DEFAULT_LISTEN)
    return ServiceConfig(
        store=resolve(str(store)),  # type: ignore[arg-type]
        listen=str(listen),
        backends=backends,
        default_backend=str(doc.get("default_backend", "default")),
        diagnosis=diagnosis,
        target_size=int(doc.get("target_size", 640)),
        knowledge_base_path=resolve(doc.get("knowledge_base")),
        ui_dir=resolve(doc.get("ui_dir")),
    )


class CaseStore:
    """Directory-tree persistence with per-case write serialization.

    Layout: <root>/cases/<case_id>/{processed.png, case.json, feedback.jsonl}
    plus <root>/eval/latest.json for the published evaluation report. The
    processed image is written before the case record, so a visible case
    always has its image.
    """

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        (self.root / "cases").mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, case_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(case_id, threading.Lock())

    def case_dir(self, case_id: str) -> Path:
        return self.root / "cases" / case_id

    def has_case(self, case_id: str) -> bool:
        return (self.case_dir(case_id) / "case.json").is_file()

    def save_case(self, case_id: str, processed_png: bytes, case_doc: dict) -> None:
        with self._lock(case_id):
            if self.has_case(case_id):
                return
            directory = self.case_dir(case_id)
            directory.mkdir(parents=True, exist_ok=True)
            image_path = directory / "processed.png"
            tmp = image_path.with_suffix(".png.tmp")
            tmp.write_bytes(processed_png)
            os.replace(tmp, image_path)
            docio.dump_document(directory / "case.json", case_doc)

    def load_case(self, case_id: str) -> dict | None:
        if not self.has_case(case_id):
            return None
        return docio.load_document(self.case_dir(case_id) / "case.json", docio.CASE_SCHEMA)

    def load_image(self, case_id: str) -> bytes | None:
        path = self.case_dir(case_id) / "processed.png"
        return path.read_bytes() if path.is_file() else None

    def feedback_for(self, case_id: str) -> list[dict]:
        path = self.case_dir(case_id) / "feedback.jsonl"
        if not path.is_file():
            return []
        records = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(json.loads(line))
        return records

    def append_feedback(self, case_id: str, record: dict) -> tuple[dict, bool]:
        """Append unless an identical (verdict, pod_index, free_text) exists.

        Returns the stored record and whether it was newly written.
        """
        key = (record["verdict"], record.get("pod_index"), record.get("free_text"))
        with self._lock(case_id):
            for existing in self.feedback_for(case_id):
                if (existing["verdict"], existing.get("pod_index"), existing.get("free_text")) == key:
                    return existing, False
            path = self.case_dir(case_id) / "feedback.jsonl"
            with path.open("a", encoding="utf-8") as handle:
                handle.write(docio.canonical_dumps(record, compact=True) + "\n")
            return record, True

    def latest_eval_bytes(self) -> bytes | None:
        path = self.root / "eval" / "latest.json"
        return path.read_bytes() if path.is_file() else None

    def publish_eval(self, report_doc: dict) -> Path:
        path = self.root / "eval" / "latest.json"
        docio.dump_document(path, report_doc)
        return path


def _canonical_response(doc: dict, status_code: int = 200) -> Response:
    return Response(
        content=docio.canonical_bytes(doc),
        media_type="application/json",
        status_code=status_code,
    )


def _error_response(status_code: int, code: str, message: str, *, retriable: bool | None = None) -> Response:
    body: dict = {"error": {"code": code, "message": message}}
    if retriable is not None:
        body["error"]["retriable"] = retriable
    return _canonical_response(body, status_code)


def feedback_record_id(case_id: str, verdict: str, pod_index: int | None, free_text: str | None) -> str:
    raw = docio.canonical_bytes(
        {"case": case_id, "verdict": verdict, "pod_index": pod_index, "free_text": free_text}
    )
    return hashlib.sha256(raw).hexdigest()[:ID_HEX_LENGTH]


def create_app(config: ServiceConfig, registry: ClassRegistry | None = None) -> FastAPI:
    registry = registry or default_registry()
    if config.knowledge_base_path is not None:
        knowledge = load_knowledge_base(config.knowledge_base_path, registry)
    else:
        knowledge = default_knowledge_base(registry)
    store = CaseStore(config.store)
    backend_cache: dict[str, object] = {}
    backend_guard = threading.Lock()

    def backend_for(name: str):
        with backend_guard:
            if name not in backend_cache:
                backend_cache[name] = create_backend(config.backends[name], registry)
            return backend_cache[name]

    app = FastAPI(title="pod-sentry", version="1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.config = config

    @app.get("/v1/health")
    def health() -> Response:
        return _canonical_response({"status": "ok"})

    @app.post("/v1/diagnose")
    async def diagnose_image(request: Request, backend: str | None = None) -> Response:
        body = await request.body()
        if not body:
            return _error_response(422, "empty_payload", "request body is empty")
        backend_name = backend or config.default_backend
        if backend_name not in config.backends:
            return _error_response(
                422, "unknown_backend",
                f"backend {backend_name!r} is not configured; "
                f"choices: {', '.join(sorted(config.backends))}",
            )
        try:
            with Image.open(io.BytesIO(body)) as raw:
                decoded = ImageOps.exif_transpose(raw).convert("RGB")
        except (UnidentifiedImageError, OSError, ValueError):
            return _error_response(422, "undecodable_image", "payload is not a decodable image")

        cropped, _ = crop_to_square(decoded)
        processed = resize_square(cropped, config.target_size)

        descriptor = config.backends[backend_name]
        image_id = image_id_for(body)
        digest = config_digest(config.target_size, config.diagnosis, descriptor)
        case_id = case_id_for(body, digest)

        existing = store.load_case(case_id)
        if existing is not None:
            return _canonical_response({"case_id": case_id, "diagnosis": existing["diagnosis"]})

        try:
            detections = backend_for(backend_name).detect(image_id, processed)
        except BackendTransportError as exc:
            return _error_response(502, "backend_unreachable", str(exc), retriable=True)
        except SchemaError as exc:
            return _error_response(502, "backend_invalid_output", str(exc), retriable=False)
        except BackendError as exc:
            return _error_response(502, "backend_failed", str(exc), retriable=False)

        result = diagnose(detections, registry, knowledge, config.diagnosis, image_id=image_id)
        diagnosis_doc = diagnosis_to_document(result, registry)

        png_buffer = io.BytesIO()
        processed.save(png_buffer, format="PNG")
        case_doc = {
            "schema": docio.CASE_SCHEMA,
            "case_id": case_id,
            "image_id": image_id,
            "processed_image": "processed.png",
            "backend": descriptor.to_doc(),
            "config_digest": digest,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "diagnosis": diagnosis_doc,
        }
        store.save_case(case_id, png_buffer.getvalue(), case_doc)
        return _canonical_response({"case_id": case_id, "diagnosis": diagnosis_doc})

    @app.get("/v1/cases/{case_id}")
    def get_case(case_id: str) -> Response:
        case_doc = store.load_case(case_id)
        if case_doc is None:
            return _error_response(404, "unknown_case", f"no case {case_id!r}")
        case_doc = dict(case_doc)
        case_doc["feedback"] = store.feedback_for(case_id)
        return _canonical_response(case_doc)

    @app.get("/v1/cases/{case_id}/image")
    def get_case_image(case_id: str) -> Response:
        image = store.load_image(case_id)
        if image is None:
            return _error_response(404, "unknown_case", f"no case {case_id!r}")
        return Response(content=image, media_type="image/png")

    @app.post("/v1/cases/{case_id}/feedback")
    async def post_feedback(case_id: str, request: Request) -> Response:
        case_doc = store.load_case(case_id)
        if case_doc is None:
            return _error_response(404, "unknown_case", f"no case {case_id!r}")
        try:
            payload = json.loads(await request.body())
        except ValueError:
            return _error_response(422, "bad_json", "feedback body is not valid JSON")
        if not isinstance(payload, dict):
            return _error_response(422, "bad_feedback", "feedback body must be an object")
        verdict = payload.get("verdict")
        if verdict not in FEEDBACK_VERDICTS:
            return _error_response(
                422, "bad_verdict",
                f"verdict must be one of {', '.join(FEEDBACK_VERDICTS)}",
            )
        pod_index = payload.get("pod_index")
        if pod_index is not None:
            pod_count = len(case_doc["diagnosis"].get("pods", []))
            if not isinstance(pod_index, int) or isinstance(pod_index, bool) \
                    or not 0 <= pod_index < pod_count:
                return _error_response(
                    422, "bad_pod_index",
                    f"pod_index must be an integer in [0, {pod_count}), got {pod_index!r}",
                )
        free_text = payload.get("free_text")
        if free_text is not None and not isinstance(free_text, str):
            return _error_response(422, "bad_free_text", "free_text must be a string")

        record = {
            "schema": docio.FEEDBACK_SCHEMA,
            "id": feedback_record_id(case_id, verdict, pod_index, free_text),
            "image_id": case_doc["image_id"],
            "verdict": verdict,
            "pod_index": pod_index,
            "free_text": free_text,
            "submitted_at": datetime.now(timezone.utc).isoformat(),
        }
        stored, created = store.append_feedback(case_id, record)
        return _canonical_response(stored, 201 if created else 200)

    @app.get("/v1/eval/latest")
    def latest_eval() -> Response:
        payload = store.latest_eval_bytes()
        if payload is None:
            return _error_response(404, "no_eval_report", "no evaluation report published yet")
        return Response(content=payload, media_type="application/json")

    if config.ui_dir is not None and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(config.ui_dir), html=True), name="ui")

    return app


def run_service(config: ServiceConfig) -> None:  # pragma: no cover - exercised manually
    import uvicorn

    host, _, port = config.listen.partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port or 8713))


__all__ = [
    "CaseStore",
    "ServiceConfig",
    "FEEDBACK_VERDICTS",
    "case_id_for",
    "config_digest",
    "create_app",
    "feedback_record_id",
    "image_id_for",
    "load_service_config",
    "run_service",
]
