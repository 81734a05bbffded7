"""HTTP API backing the web console.

A pure façade over the orchestrator: every behavior here is reachable via
the CLI with identical results. Run and batch state lives on disk under the
state directory, so the service is restart-safe. Single runs are
synchronous; batches run in a background thread and are polled.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
import zipfile
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import report as report_mod
from . import schemaval
from .errors import (
    EmptyInput,
    Nl2RegoError,
    PayloadTypeMismatch,
    SchemaMalformed,
    SchemaUnreadable,
    ToolUnavailable,
)
from .model import PipelineConfig, Schema
from .orchestrator import (
    RunStore,
    aggregate_metrics,
    bundled_schemas,
    rerun_from_stage,
    run_batch,
    run_single,
)
from .prompts import TEMPLATE_STAGES, PromptLibrary


class RunRequest(BaseModel):
    text: str
    schema_name: str | None = None
    config: dict[str, Any] | None = None


class RerunRequest(BaseModel):
    stage: str
    edited_payload: Any = None
    schema_name: str | None = None
    config: dict[str, Any] | None = None


class BatchRequest(BaseModel):
    lines: list[str]
    schema_name: str | None = None
    config: dict[str, Any] | None = None


class PromptUpdate(BaseModel):
    template: str


class ServiceState:
    """Disk-backed state: config, schemas, prompts, runs, and batches."""

    def __init__(self, state_dir: str | Path, base_config: PipelineConfig | None = None):
        self.root = Path(state_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.store = RunStore(self.root / "runs")
        self.batch_dir = self.root / "batches"
        self.batch_dir.mkdir(exist_ok=True)
        self.out_dir = self.root / "out"
        self.schema_dir = self.root / "schemas"
        self.schema_dir.mkdir(exist_ok=True)
        self.prompt_dir = self.root / "prompts"
        self.config_path = self.root / "config.json"
        self._lock = threading.Lock()
        if self.config_path.is_file():
            self.config = PipelineConfig.from_file(str(self.config_path))
        else:
            self.config = base_config or PipelineConfig()
            self._persist_config()
        # prompt overrides live in the state dir regardless of base config
        self.config = self.config.with_overrides({"prompt_dir": str(self.prompt_dir)})
        self.library = PromptLibrary(self.prompt_dir)

    def _persist_config(self) -> None:
        self.config_path.write_text(json.dumps(self.config.to_dict(), indent=2) + "\n", encoding="utf-8")

    def update_config(self, overrides: dict[str, Any]) -> PipelineConfig:
        with self._lock:
            self.config = self.config.with_overrides(overrides)
            self._persist_config()
        return self.config

    def effective_config(self, overrides: dict[str, Any] | None) -> PipelineConfig:
        if not overrides:
            return self.config
        return self.config.with_overrides(overrides)

    def schemas(self) -> dict[str, Schema]:
        loaded = dict(bundled_schemas())
        for path in sorted(self.schema_dir.glob("*.json")):
            schema = schemaval.load_schema(str(path))
            loaded[schema.name] = schema
        return loaded

    def resolve_schema(self, name: str | None) -> Schema | None:
        if not name:
            return None
        schemas = self.schemas()
        if name not in schemas:
            raise HTTPException(status_code=404, detail=f"unknown schema {name!r}")
        return schemas[name]

    def batch_state_path(self, batch_id: str) -> Path:
        return self.batch_dir / f"{batch_id}.json"

    def read_batch(self, batch_id: str) -> dict[str, Any] | None:
        path = self.batch_state_path(batch_id)
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def write_batch(self, batch_id: str, payload: dict[str, Any]) -> None:
        self.batch_state_path(batch_id).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def create_app(state_dir: str | Path = "nl2rego-state", base_config: PipelineConfig | None = None,
               frontend_dist: str | Path | None = None) -> FastAPI:
    state = ServiceState(state_dir, base_config)
    app = FastAPI(title="nl2rego", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ToolUnavailable)
    async def tool_unavailable_handler(_, exc: ToolUnavailable):
        return JSONResponse(status_code=503, content={"detail": f"ToolUnavailable: {exc}"})

    @app.exception_handler(Nl2RegoError)
    async def domain_error_handler(_, exc: Nl2RegoError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    # --- runs ---

    @app.post("/api/runs", status_code=201)
    def create_run(body: RunRequest):
        if not body.text.strip():
            raise HTTPException(status_code=400, detail="text must be non-empty")
        config = state.effective_config(body.config)
        schema = state.resolve_schema(body.schema_name)
        try:
            # artifacts live inside the record; only batches write files
            record = run_single(
                body.text, config, schema=schema, store=state.store,
                library=PromptLibrary(state.prompt_dir),
            )
        except EmptyInput as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return record.to_dict()

    @app.get("/api/runs")
    def list_runs(page: int = 1, page_size: int = 20):
        if page < 1 or page_size < 1:
            raise HTTPException(status_code=400, detail="page and page_size must be >= 1")
        ids = state.store.list_ids()
        ids.reverse()  # newest first
        start = (page - 1) * page_size
        selected = ids[start : start + page_size]
        records = state.store.load_many(selected)
        return {
            "total": len(ids),
            "page": page,
            "page_size": page_size,
            "runs": [r.to_dict() for r in records],
        }

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str):
        record = state.store.load(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return record.to_dict()

    @app.post("/api/runs/{run_id}/rerun", status_code=201)
    def rerun(run_id: str, body: RerunRequest):
        record = state.store.load(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        config = state.effective_config(body.config)
        schema = state.resolve_schema(body.schema_name)
        try:
            new_record = rerun_from_stage(
                record, body.stage, body.edited_payload, config,
                schema=schema, store=state.store, out_dir=state.out_dir,
                library=PromptLibrary(state.prompt_dir),
            )
        except PayloadTypeMismatch as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except KeyError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return new_record.to_dict()

    # --- batches ---

    @app.post("/api/batch", status_code=202)
    def create_batch(body: BatchRequest):
        lines = [line for line in body.lines if line.strip()]
        if not lines:
            raise HTTPException(status_code=400, detail="batch needs at least one non-empty line")
        config = state.effective_config(body.config)
        schema = state.resolve_schema(body.schema_name)
        batch_id = uuid.uuid4().hex[:12]
        out_dir = state.batch_dir / batch_id / "out"
        state.write_batch(batch_id, {"status": "running", "total": len(lines), "done": 0})

        def progress(done: int, total: int) -> None:
            state.write_batch(batch_id, {"status": "running", "total": total, "done": done})

        def work() -> None:
            try:
                batch_report = run_batch(
                    lines, config, schema=schema, store=state.store, out_dir=out_dir,
                    library=PromptLibrary(state.prompt_dir), progress=progress,
                )
                report_mod.write_all(batch_report, state.batch_dir / batch_id)
                state.write_batch(
                    batch_id,
                    {
                        "status": "done",
                        "total": len(lines),
                        "done": len(lines),
                        "report": batch_report.to_dict(),
                        "run_ids": batch_report.run_ids,
                        "artifacts_dir": str(out_dir),
                    },
                )
            except Exception as exc:  # recorded, never lost
                state.write_batch(batch_id, {"status": "failed", "error": str(exc)})

        threading.Thread(target=work, daemon=True).start()
        return {"batch_id": batch_id}

    @app.get("/api/batch/{batch_id}")
    def get_batch(batch_id: str):
        payload = state.read_batch(batch_id)
        if payload is None:
            raise HTTPException(status_code=404, detail=f"unknown batch {batch_id!r}")
        if payload.get("run_ids"):
            records = state.store.load_many(payload["run_ids"])
            payload = {**payload, "runs": [r.to_dict() for r in records]}
        return payload

    @app.get("/api/batch/{batch_id}/artifacts")
    def get_batch_artifacts(batch_id: str):
        payload = state.read_batch(batch_id)
        if payload is None:
            raise HTTPException(status_code=404, detail=f"unknown batch {batch_id!r}")
        artifacts_dir = Path(payload.get("artifacts_dir") or (state.batch_dir / batch_id / "out"))
        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
            if artifacts_dir.is_dir():
                for path in sorted(artifacts_dir.glob("*.rego")):
                    archive.write(path, arcname=path.name)
        return Response(
            content=buffer.getvalue(),
            media_type="application/zip",
            headers={"Content-Disposition": f'attachment; filename="{batch_id}-artifacts.zip"'},
        )

    # --- config, schemas, prompts ---

    @app.get("/api/config")
    def get_config():
        return state.config.to_dict()

    @app.put("/api/config")
    def put_config(overrides: dict[str, Any]):
        try:
            config = state.update_config(overrides)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return config.to_dict()

    @app.get("/api/schemas")
    def get_schemas():
        return {name: schema.to_dict() for name, schema in sorted(state.schemas().items())}

    @app.put("/api/schemas/{name}")
    def put_schema(name: str, body: dict[str, Any]):
        body = {**body, "name": name}
        try:
            schema = schemaval.schema_from_dict(body, origin=name)
        except (SchemaMalformed, SchemaUnreadable) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        (state.schema_dir / f"{schema.name}.json").write_text(
            json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        return schema.to_dict()

    @app.get("/api/prompts")
    def get_prompts():
        return state.library.all_templates()

    @app.put("/api/prompts/{stage}")
    def put_prompt(stage: str, body: PromptUpdate):
        if stage not in TEMPLATE_STAGES:
            raise HTTPException(status_code=404, detail=f"unknown prompt stage {stage!r}")
        state.library.set(stage, body.template)
        return {"stage": stage, "template": state.library.get(stage)}

    @app.delete("/api/prompts/{stage}")
    def delete_prompt(stage: str):
        if stage not in TEMPLATE_STAGES:
            raise HTTPException(status_code=404, detail=f"unknown prompt stage {stage!r}")
        state.library.reset(stage)
        return {"stage": stage, "template": state.library.get(stage)}

    # --- metrics over everything persisted ---

    @app.get("/api/metrics")
    def get_metrics():
        ids = state.store.list_ids()
        records = state.store.load_many(ids)
        report = aggregate_metrics(list(enumerate(records)))
        return report.to_dict()

    dist = Path(frontend_dist) if frontend_dist else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if dist.is_dir():
        app.mount("/", StaticFiles(directory=str(dist), html=True), name="console")

    return app


__all__ = ["create_app", "ServiceState"]
