#!/usr/bin/env python3
"""Record API fixtures for the console's contract tests.

Boots the real service in-process (mock provider) and captures responses
verbatim into tests/fixtures/. Rerun after changing the service wire format:

    python3 tools/record_fixtures.py
"""

import json
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from nl2rego.orchestrator import bundled_corpus_lines
from nl2rego.service import create_app

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

NURSE = "Nurses are allowed to read prescriptions, but they are not allowed to change them"


def dump(name: str, payload) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / f"{name}.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"recorded {name}.json")


def main() -> None:
    with tempfile.TemporaryDirectory() as state_dir:
        app = create_app(state_dir=state_dir)
        with TestClient(app) as client:
            dump("schemas", client.get("/api/schemas").json())
            dump("config", client.get("/api/config").json())
            dump("prompts", client.get("/api/prompts").json())

            run = client.post("/api/runs", json={"text": NURSE, "schema_name": "healthcare"}).json()
            dump("nurse_run", run)

            tuples = run["stage_entries"][2]["output_snapshot"]["tuples"]
            edited = [dict(t, subject="doctors") for t in tuples]
            rerun = client.post(
                f"/api/runs/{run['run_id']}/rerun",
                json={"stage": "extract", "edited_payload": {"tuples": edited}, "schema_name": "healthcare"},
            ).json()
            dump("rerun_doctors", rerun)

            halted = client.post(
                "/api/runs", json={"text": "Surgeons are allowed to read prescriptions", "schema_name": "healthcare"}
            ).json()
            dump("schema_invalid_run", halted)

            batch_id = client.post(
                "/api/batch", json={"lines": bundled_corpus_lines(), "schema_name": "healthcare"}
            ).json()["batch_id"]
            deadline = time.time() + 300
            while time.time() < deadline:
                state = client.get(f"/api/batch/{batch_id}").json()
                if state["status"] in ("done", "failed"):
                    break
                time.sleep(0.5)
            assert state["status"] == "done", state
            dump("batch_mini_corpus", state)


if __name__ == "__main__":
    main()
