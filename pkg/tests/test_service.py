"""HTTP API integration tests with the mock provider."""

from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

from nl2rego.service import create_app

from conftest import NURSE_TEXT


@pytest.fixture
def client(tmp_path):
    app = create_app(state_dir=tmp_path / "state")
    with TestClient(app) as c:
        yield c


class TestRunEndpoints:
    def test_create_run_returns_full_record(self, client):
        response = client.post("/api/runs", json={"text": NURSE_TEXT, "schema_name": "healthcare"})
        assert response.status_code == 201
        record = response.json()
        assert record["verdict"] == "Completed"
        assert len(record["stage_entries"]) == 9
        assert record["stage_entries"][0]["stage"] == "detect"

    def test_get_run_by_id(self, client):
        created = client.post("/api/runs", json={"text": NURSE_TEXT, "schema_name": "healthcare"}).json()
        fetched = client.get(f"/api/runs/{created['run_id']}")
        assert fetched.status_code == 200
        assert fetched.json() == created

    def test_unknown_run_is_404(self, client):
        assert client.get("/api/runs/doesnotexist").status_code == 404

    def test_list_runs_paged(self, client):
        for _ in range(3):
            client.post("/api/runs", json={"text": NURSE_TEXT, "schema_name": "healthcare"})
        page = client.get("/api/runs", params={"page": 1, "page_size": 2}).json()
        assert page["total"] == 3
        assert len(page["runs"]) == 2

    def test_blank_text_is_400(self, client):
        assert client.post("/api/runs", json={"text": "   "}).status_code == 400

    def test_config_override_per_run(self, client):
        response = client.post(
            "/api/runs",
            json={"text": NURSE_TEXT, "schema_name": "healthcare", "config": {"rego_validation_enabled": False}},
        )
        record = response.json()
        assert record["stage_entries"][6]["output_snapshot"]["skipped"] is True


class TestRerunEndpoint:
    def test_edit_subject_and_rerun(self, client):
        record = client.post("/api/runs", json={"text": NURSE_TEXT, "schema_name": "healthcare"}).json()
        tuples = record["stage_entries"][2]["output_snapshot"]["tuples"]
        edited = [dict(t, subject="doctors") for t in tuples]
        response = client.post(
            f"/api/runs/{record['run_id']}/rerun",
            json={"stage": "extract", "edited_payload": {"tuples": edited}, "schema_name": "healthcare"},
        )
        assert response.status_code == 201
        new_record = response.json()
        assert new_record["parent_run_id"] == record["run_id"]
        source = new_record["stage_entries"][4]["output_snapshot"]["artifact"]["source"]
        assert 'input.subject == "doctors"' in source

    def test_bad_payload_is_409(self, client):
        record = client.post("/api/runs", json={"text": NURSE_TEXT, "schema_name": "healthcare"}).json()
        response = client.post(
            f"/api/runs/{record['run_id']}/rerun",
            json={"stage": "extract", "edited_payload": {"tuples": [{"bogus": True}]}},
        )
        assert response.status_code == 409

    def test_unknown_run_is_404(self, client):
        response = client.post("/api/runs/nope/rerun", json={"stage": "extract", "edited_payload": None})
        assert response.status_code == 404


class TestBatchEndpoints:
    def _wait_done(self, client, batch_id, timeout=60.0):
        deadline = time.time() + timeout
        while time.time() < deadline:
            payload = client.get(f"/api/batch/{batch_id}").json()
            if payload["status"] in ("done", "failed"):
                return payload
            time.sleep(0.2)
        raise AssertionError("batch did not finish in time")

    def test_batch_lifecycle(self, client):
        lines = [
            "Nurses are allowed to read prescriptions.",
            "Doctors must not delete audit logs.",
        ]
        response = client.post("/api/batch", json={"lines": lines, "schema_name": "healthcare"})
        assert response.status_code == 202
        batch_id = response.json()["batch_id"]
        payload = self._wait_done(client, batch_id)
        assert payload["status"] == "done"
        assert payload["report"]["compile_rate"]["numerator"] == 2
        assert payload["report"]["compile_rate"]["denominator"] == 2
        assert len(payload["runs"]) == 2

        archive = client.get(f"/api/batch/{batch_id}/artifacts")
        assert archive.status_code == 200
        assert archive.headers["content-type"] == "application/zip"
        assert len(archive.content) > 100

    def test_unknown_batch_404(self, client):
        assert client.get("/api/batch/nope").status_code == 404

    def test_empty_batch_400(self, client):
        assert client.post("/api/batch", json={"lines": ["  "]}).status_code == 400


class TestToolUnavailableSurface:
    def test_missing_opa_is_503(self, client, monkeypatch):
        monkeypatch.delenv("NL2REGO_OPA", raising=False)
        response = client.post(
            "/api/runs",
            json={
                "text": NURSE_TEXT,
                "schema_name": "healthcare",
                "config": {"opa_path": "/nonexistent/opa"},
            },
        )
        assert response.status_code == 503
        assert "ToolUnavailable" in response.json()["detail"]


class TestConfigEndpoints:
    def test_get_and_put_config(self, client):
        config = client.get("/api/config").json()
        assert config["provider"] == "mock"
        updated = client.put("/api/config", json={"test_mode": "llm"}).json()
        assert updated["test_mode"] == "llm"
        assert client.get("/api/config").json()["test_mode"] == "llm"

    def test_invalid_config_rejected(self, client):
        assert client.put("/api/config", json={"max_lint_iterations": 0}).status_code == 400


class TestSchemaEndpoints:
    def test_list_bundled(self, client):
        schemas = client.get("/api/schemas").json()
        assert "healthcare" in schemas
        assert "nurse" in schemas["healthcare"]["subjects"]

    def test_put_valid_schema(self, client):
        body = {"subjects": ["robot"], "actions": ["beep"], "resources": ["console"]}
        response = client.put("/api/schemas/lab", json=body)
        assert response.status_code == 200
        assert "lab" in client.get("/api/schemas").json()

    def test_put_malformed_schema_is_400_with_detail(self, client):
        response = client.put("/api/schemas/broken", json={"subjects": ["a"]})
        assert response.status_code == 400
        assert "missing required keys" in response.json()["detail"]


class TestPromptEndpoints:
    def test_get_templates(self, client):
        templates = client.get("/api/prompts").json()
        assert set(templates) >= {"system", "detect", "segment", "extract", "synthesize", "repair", "testgen"}

    def test_put_template_used_verbatim_by_next_run(self, client):
        template = "CUSTOM DETECT PROMPT\nINPUT:\n{{input}}\nEND INPUT\n"
        response = client.put("/api/prompts/detect", json={"template": template})
        assert response.status_code == 200
        record = client.post("/api/runs", json={"text": NURSE_TEXT, "schema_name": "healthcare"}).json()
        transcript = record["stage_entries"][0]["transcripts"][0]
        assert transcript["user_text"].startswith("CUSTOM DETECT PROMPT")

    def test_delete_restores_default(self, client):
        client.put("/api/prompts/detect", json={"template": "X\nINPUT:\n{{input}}\nEND INPUT\n"})
        client.delete("/api/prompts/detect")
        template = client.get("/api/prompts").json()["detect"]
        assert "access control policy" in template

    def test_unknown_stage_404(self, client):
        assert client.put("/api/prompts/nope", json={"template": "x"}).status_code == 404
