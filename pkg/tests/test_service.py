"""HTTP service: content-addressed cases, deterministic responses, feedback."""

import io
import json
import re

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from pod_sentry import (
    BackendDescriptor,
    BoundingBox,
    DetectionItem,
    DiagnosisConfig,
    SchemaError,
    ServiceConfig,
    create_app,
    load_service_config,
)
from pod_sentry.docio import CONFIG_SCHEMA, canonical_dumps, dump_document
from pod_sentry.formats import write_detections_file
from pod_sentry.service import (
    CaseStore,
    case_id_for,
    config_digest,
    image_id_for,
)

HEX_ID = re.compile(r"^[0-9a-f]{16}$")


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    monkeypatch.delenv("POD_SENTRY_STORE", raising=False)
    monkeypatch.delenv("POD_SENTRY_LISTEN", raising=False)


def _golden_bytes() -> bytes:
    image = Image.new("RGB", (96, 80))
    pixels = image.load()
    for y in range(80):
        for x in range(96):
            pixels[x, y] = ((x * 7) % 256, (y * 5) % 256, (x + y) % 256)
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


GOLDEN = _golden_bytes()
GOLDEN_IMAGE_ID = image_id_for(GOLDEN)


def _healthy_detections(image_id):
    box = BoundingBox(8, 8, 40, 56)
    return [
        DetectionItem(image_id, 2, box, 0.96),
        DetectionItem(image_id, 0, box, 0.02),
        DetectionItem(image_id, 1, box, 0.02),
    ]


@pytest.fixture
def service(tmp_path):
    detections_path = tmp_path / "stored_detections.json"
    write_detections_file(detections_path, _healthy_detections(GOLDEN_IMAGE_ID))
    config = ServiceConfig(
        store=tmp_path / "store",
        backends={
            "default": BackendDescriptor("file", {"path": str(detections_path)}),
            "mock": BackendDescriptor("mock", {"seed": "7"}),
            "offline": BackendDescriptor(
                "external", {"url": "http://127.0.0.1:9/detect"}
            ),
        },
        diagnosis=DiagnosisConfig(nms_iou_threshold=0.5, score_floor=0.0),
        target_size=64,
    )
    client = TestClient(create_app(config))
    return client, config


class TestHealth:
    def test_ok(self, service):
        client, _ = service
        response = client.get("/v1/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}


class TestDiagnose:
    def test_golden_image_healthy_diagnosis(self, service):
        client, _ = service
        response = client.post("/v1/diagnose", content=GOLDEN)
        assert response.status_code == 200
        body = response.json()
        assert HEX_ID.match(body["case_id"])
        diagnosis = body["diagnosis"]
        assert diagnosis["image_id"] == GOLDEN_IMAGE_ID
        assert len(diagnosis["pods"]) == 1
        pod = diagnosis["pods"][0]
        assert pod["top"] == "healthy"
        assert pod["probs"] == {"black_pod": 0.02, "monilia": 0.02, "healthy": 0.96}
        assert sum(pod["probs"].values()) == 1.0
        assert [ref["class"] for ref in diagnosis["kb_refs"]] == ["healthy"]

    def test_repeat_upload_is_byte_identical(self, service):
        client, _ = service
        first = client.post("/v1/diagnose", content=GOLDEN)
        second = client.post("/v1/diagnose", content=GOLDEN)
        assert first.content == second.content

    def test_restart_replays_stored_case(self, service):
        client, config = service
        first = client.post("/v1/diagnose", content=GOLDEN)
        fresh = TestClient(create_app(config))
        second = fresh.post("/v1/diagnose", content=GOLDEN)
        assert first.content == second.content

    def test_case_id_depends_on_config(self, service):
        _, config = service
        default = config.backends["default"]
        digest_a = config_digest(640, DiagnosisConfig(score_floor=0.25), default)
        digest_b = config_digest(640, DiagnosisConfig(score_floor=0.30), default)
        assert digest_a != digest_b
        assert case_id_for(GOLDEN, digest_a) != case_id_for(GOLDEN, digest_b)
        assert HEX_ID.match(case_id_for(GOLDEN, digest_a))

    def test_empty_payload_rejected(self, service):
        client, _ = service
        response = client.post("/v1/diagnose", content=b"")
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "empty_payload"

    def test_undecodable_image_rejected(self, service):
        client, _ = service
        response = client.post("/v1/diagnose", content=b"definitely not an image")
        assert response.status_code == 422
        error = response.json()["error"]
        assert error["code"] == "undecodable_image"
        assert "image" in error["message"]

    def test_unknown_backend_rejected(self, service):
        client, _ = service
        response = client.post("/v1/diagnose?backend=cloud", content=GOLDEN)
        assert response.status_code == 422
        error = response.json()["error"]
        assert error["code"] == "unknown_backend"
        assert "default" in error["message"] and "mock" in error["message"]

    def test_backend_selector(self, service):
        client, _ = service
        response = client.post("/v1/diagnose?backend=mock", content=GOLDEN)
        assert response.status_code == 200
        body = response.json()
        assert body["diagnosis"]["pods"]
        default_case = client.post("/v1/diagnose", content=GOLDEN).json()["case_id"]
        assert body["case_id"] != default_case

    def test_stored_detections_missing_is_backend_failure(self, service):
        client, _ = service
        other = Image.new("RGB", (32, 32), (1, 2, 3))
        buffer = io.BytesIO()
        other.save(buffer, format="PNG")
        response = client.post("/v1/diagnose", content=buffer.getvalue())
        assert response.status_code == 502
        error = response.json()["error"]
        assert error["code"] == "backend_failed"
        assert error["retriable"] is False

    def test_unreachable_backend_is_retriable(self, service):
        client, _ = service
        response = client.post("/v1/diagnose?backend=offline", content=GOLDEN)
        assert response.status_code == 502
        error = response.json()["error"]
        assert error["code"] == "backend_unreachable"
        assert error["retriable"] is True


class TestCases:
    def _case_id(self, client):
        return client.post("/v1/diagnose", content=GOLDEN).json()["case_id"]

    def test_get_case_document(self, service):
        client, _ = service
        posted = client.post("/v1/diagnose", content=GOLDEN).json()
        response = client.get(f"/v1/cases/{posted['case_id']}")
        assert response.status_code == 200
        case = response.json()
        assert case["schema"] == "pod-sentry/case@1"
        assert case["case_id"] == posted["case_id"]
        assert case["image_id"] == GOLDEN_IMAGE_ID
        assert case["diagnosis"] == posted["diagnosis"]
        assert case["backend"]["kind"] == "file"
        assert case["feedback"] == []
        assert case["processed_image"] == "processed.png"

    def test_unknown_case_404(self, service):
        client, _ = service
        response = client.get("/v1/cases/deadbeefdeadbeef")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_case"

    def test_processed_image_served(self, service):
        client, config = service
        case_id = self._case_id(client)
        response = client.get(f"/v1/cases/{case_id}/image")
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        assert response.content.startswith(b"\x89PNG")
        with Image.open(io.BytesIO(response.content)) as image:
            assert image.size == (config.target_size, config.target_size)
        stored = (config.store / "cases" / case_id / "processed.png").read_bytes()
        assert response.content == stored

    def test_store_layout(self, service):
        client, config = service
        case_id = self._case_id(client)
        case_dir = config.store / "cases" / case_id
        assert (case_dir / "case.json").is_file()
        assert (case_dir / "processed.png").is_file()
        assert not (case_dir / "feedback.jsonl").exists()


class TestFeedback:
    def _case_id(self, client):
        return client.post("/v1/diagnose", content=GOLDEN).json()["case_id"]

    def test_round_trip(self, service):
        client, _ = service
        case_id = self._case_id(client)
        payload = {"verdict": "not_the_disease", "pod_index": 0, "free_text": "looks like monilia"}
        response = client.post(f"/v1/cases/{case_id}/feedback", json=payload)
        assert response.status_code == 201
        record = response.json()
        assert record["schema"] == "pod-sentry/feedback@1"
        assert HEX_ID.match(record["id"])
        assert record["verdict"] == "not_the_disease"
        assert record["pod_index"] == 0
        assert record["free_text"] == "looks like monilia"
        assert record["image_id"] == GOLDEN_IMAGE_ID

        case = client.get(f"/v1/cases/{case_id}").json()
        assert case["feedback"] == [record]

    def test_duplicate_submission_returns_existing(self, service):
        client, _ = service
        case_id = self._case_id(client)
        payload = {"verdict": "not_the_result"}
        first = client.post(f"/v1/cases/{case_id}/feedback", json=payload)
        second = client.post(f"/v1/cases/{case_id}/feedback", json=payload)
        assert first.status_code == 201
        assert second.status_code == 200
        assert second.json()["id"] == first.json()["id"]
        case = client.get(f"/v1/cases/{case_id}").json()
        assert len(case["feedback"]) == 1

    def test_distinct_verdicts_both_stored(self, service):
        client, _ = service
        case_id = self._case_id(client)
        a = client.post(f"/v1/cases/{case_id}/feedback", json={"verdict": "not_the_result"})
        b = client.post(f"/v1/cases/{case_id}/feedback", json={"verdict": "not_the_disease"})
        assert a.status_code == b.status_code == 201
        assert a.json()["id"] != b.json()["id"]
        assert len(client.get(f"/v1/cases/{case_id}").json()["feedback"]) == 2

    def test_unknown_case_404(self, service):
        client, _ = service
        response = client.post(
            "/v1/cases/0000000000000000/feedback", json={"verdict": "not_the_result"}
        )
        assert response.status_code == 404

    def test_bad_json_rejected(self, service):
        client, _ = service
        case_id = self._case_id(client)
        response = client.post(
            f"/v1/cases/{case_id}/feedback", content=b"{not json",
        )
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "bad_json"

    def test_non_object_rejected(self, service):
        client, _ = service
        case_id = self._case_id(client)
        response = client.post(f"/v1/cases/{case_id}/feedback", json=["verdict"])
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "bad_feedback"

    def test_bad_verdict_rejected(self, service):
        client, _ = service
        case_id = self._case_id(client)
        response = client.post(f"/v1/cases/{case_id}/feedback", json={"verdict": "wrong"})
        assert response.status_code == 422
        error = response.json()["error"]
        assert error["code"] == "bad_verdict"
        assert "not_the_result" in error["message"]

    @pytest.mark.parametrize("pod_index", [-1, 1, 2.5, True, "0"])
    def test_bad_pod_index_rejected(self, service, pod_index):
        client, _ = service
        case_id = self._case_id(client)
        response = client.post(
            f"/v1/cases/{case_id}/feedback",
            json={"verdict": "not_the_result", "pod_index": pod_index},
        )
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "bad_pod_index"

    def test_pod_index_optional(self, service):
        client, _ = service
        case_id = self._case_id(client)
        response = client.post(f"/v1/cases/{case_id}/feedback", json={"verdict": "not_the_result"})
        assert response.status_code == 201
        assert response.json()["pod_index"] is None

    def test_bad_free_text_rejected(self, service):
        client, _ = service
        case_id = self._case_id(client)
        response = client.post(
            f"/v1/cases/{case_id}/feedback",
            json={"verdict": "not_the_result", "free_text": 42},
        )
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "bad_free_text"


class TestEvalEndpoint:
    def test_404_before_publish(self, service):
        client, _ = service
        assert client.get("/v1/eval/latest").status_code == 404

    def test_published_bytes_served_verbatim(self, service):
        client, config = service
        report = {"schema": "pod-sentry/eval@1", "map_50": 0.5, "map_50_95": 0.25}
        CaseStore(config.store).publish_eval(report)
        response = client.get("/v1/eval/latest")
        assert response.status_code == 200
        assert response.content == canonical_dumps(report).encode()


class TestServiceConfigLoading:
    def _write_config(self, tmp_path, doc):
        path = tmp_path / "service.json"
        dump_document(path, {"schema": CONFIG_SCHEMA, **doc})
        return path

    def test_single_backend_shorthand(self, tmp_path):
        path = self._write_config(
            tmp_path,
            {
                "store": "store",
                "backend": {"kind": "mock", "parameters": {"seed": "1"}},
                "diagnosis": {"score_floor": 0.1},
                "target_size": 320,
            },
        )
        config = load_service_config(path)
        assert config.store == tmp_path / "store"
        assert config.default_backend == "default"
        assert set(config.backends) == {"default"}
        assert config.diagnosis.score_floor == 0.1
        assert config.target_size == 320
        assert config.listen == "127.0.0.1:8713"

    def test_named_backends_with_default(self, tmp_path):
        path = self._write_config(
            tmp_path,
            {
                "store": "store",
                "backends": {
                    "replay": {"kind": "file", "parameters": {"path": "dets.json"}},
                    "demo": {"kind": "mock", "parameters": {"seed": "2"}},
                },
                "default_backend": "demo",
            },
        )
        config = load_service_config(path)
        assert set(config.backends) == {"replay", "demo"}
        assert config.default_backend == "demo"

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        nested = tmp_path / "deploy"
        nested.mkdir()
        kb = nested / "kb.json"
        kb.write_text("{}")
        path = nested / "service.json"
        dump_document(
            path,
            {
                "schema": CONFIG_SCHEMA,
                "store": "data/store",
                "backend": {"kind": "file", "parameters": {"path": "dets.json"}},
                "knowledge_base": "kb.json",
            },
        )
        config = load_service_config(path)
        assert config.store == nested / "data" / "store"
        assert config.knowledge_base_path == kb
        assert config.backends["default"].parameters["path"] == str(nested / "dets.json")

    def test_env_overrides(self, tmp_path, monkeypatch):
        path = self._write_config(
            tmp_path,
            {
                "store": "store",
                "listen": "0.0.0.0:9000",
                "backend": {"kind": "mock", "parameters": {"seed": "1"}},
            },
        )
        monkeypatch.setenv("POD_SENTRY_STORE", str(tmp_path / "elsewhere"))
        monkeypatch.setenv("POD_SENTRY_LISTEN", "127.0.0.1:7010")
        config = load_service_config(path)
        assert config.store == tmp_path / "elsewhere"
        assert config.listen == "127.0.0.1:7010"

    def test_missing_store_rejected(self, tmp_path, monkeypatch):
        monkeypatch.delenv("POD_SENTRY_STORE", raising=False)
        path = self._write_config(
            tmp_path, {"backend": {"kind": "mock", "parameters": {"seed": "1"}}}
        )
        with pytest.raises(SchemaError, match="store"):
            load_service_config(path)

    def test_missing_backend_rejected(self, tmp_path):
        path = self._write_config(tmp_path, {"store": "store"})
        with pytest.raises(SchemaError, match="backend"):
            load_service_config(path)

    def test_default_backend_must_exist(self, tmp_path):
        path = self._write_config(
            tmp_path,
            {
                "store": "store",
                "backends": {"demo": {"kind": "mock", "parameters": {"seed": "1"}}},
                "default_backend": "missing",
            },
        )
        with pytest.raises(ValueError, match="missing"):
            load_service_config(path)


class TestServiceConfigValidation:
    def test_requires_backends(self, tmp_path):
        with pytest.raises(ValueError, match="backend"):
            ServiceConfig(store=tmp_path)

    def test_default_name_checked(self, tmp_path):
        with pytest.raises(ValueError, match="not configured"):
            ServiceConfig(
                store=tmp_path,
                backends={"a": BackendDescriptor("mock", {"seed": "1"})},
                default_backend="b",
            )
