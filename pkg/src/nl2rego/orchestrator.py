"""Pipeline orchestration: single runs, batch runs, edit-and-rerun, metric
aggregation, and run-record persistence.

A run executes the fixed stage order detect → segment → extract → validate
→ generate → lint → compile → testgen → test. Halting stages leave the
record with entries exactly up to the halt point; every record is persisted
before it is returned or an error is propagated.
"""

from __future__ import annotations

import logging
import os
import re
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from . import codegen, extract, preprocess, schemaval, testgen, toolchain
from .errors import (
    ExtractionUnparseable,
    MissingComponent,
    PayloadTypeMismatch,
    SegmentationFailed,
    SynthesisRejected,
    ToolUnavailable,
)
from .model import (
    STAGE_ORDER,
    CodegenBackend,
    Decision,
    DsarcpTuple,
    PipelineConfig,
    PolicyStatement,
    RegoArtifact,
    RunRecord,
    Schema,
    StageEntry,
    TestMode,
    TestSuite,
    Verdict,
    encode_run_record,
    decode_run_record,
)
from .preprocess import DetectionResult
from .prompts import PromptLibrary
from .provider import Provider, get_provider
from .schemaval import ValidationReport


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


class RunStore:
    """Append-only persistence for run records.

    Each record is written as one encoded line to ``<run_id>.record`` and
    appended to ``records.log``; the log is the listing source so the store
    is restart-safe.
    """

    def __init__(self, runs_dir: str | Path):
        self.runs_dir = Path(runs_dir)
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @property
    def log_path(self) -> Path:
        return self.runs_dir / "records.log"

    def save(self, record: RunRecord) -> None:
        line = encode_run_record(record)
        with self._lock:
            (self.runs_dir / f"{record.run_id}.record").write_text(line + "\n", encoding="utf-8")
            with open(self.log_path, "a", encoding="utf-8") as log:
                log.write(line + "\n")

    def load(self, run_id: str) -> RunRecord | None:
        path = self.runs_dir / f"{run_id}.record"
        if not path.is_file():
            return None
        return decode_run_record(path.read_text(encoding="utf-8").strip())

    def list_ids(self) -> list[str]:
        ids: list[str] = []
        if self.log_path.is_file():
            with open(self.log_path, encoding="utf-8") as log:
                for line in log:
                    if line.strip():
                        ids.append(decode_run_record(line).run_id)
        return ids

    def load_many(self, run_ids: list[str]) -> list[RunRecord]:
        records = []
        for run_id in run_ids:
            record = self.load(run_id)
            if record is not None:
                records.append(record)
        return records


def bundled_corpus_lines() -> list[str]:
    """The packaged mini-corpus: one self-contained statement per line."""
    ref = resources.files("nl2rego") / "data" / "corpus" / "mini_corpus.txt"
    return [line for line in ref.read_text(encoding="utf-8").splitlines() if line.strip()]


def bundled_schemas() -> dict[str, Schema]:
    ref = resources.files("nl2rego") / "data" / "schemas"
    schemas: dict[str, Schema] = {}
    for entry in ref.iterdir():
        if entry.name.endswith(".json"):
            import json as _json

            schema = schemaval.schema_from_dict(_json.loads(entry.read_text(encoding="utf-8")), origin=entry.name)
            schemas[schema.name] = schema
    return schemas


@dataclass
class _PipelineState:
    """Mutable carrier of stage outputs while a run executes."""

    text: str
    module_slug: str | None = None
    detection: DetectionResult | None = None
    statements: list[PolicyStatement] = field(default_factory=list)
    tuples: list[DsarcpTuple] = field(default_factory=list)
    validation_reports: list[ValidationReport] = field(default_factory=list)
    artifact: RegoArtifact | None = None
    lint_findings: list[toolchain.LintFinding] = field(default_factory=list)
    suite: TestSuite | None = None
    test_file: str | None = None


class _StageContext:
    def __init__(self, stage: str):
        self.stage = stage
        self.input_snapshot: Any = None
        self.output_snapshot: Any = None
        self.transcripts: list = []
        self.diagnostics: list[str] = []


class _RunBuilder:
    def __init__(self, run_id: str, raw_input: str, store: RunStore | None,
                 parent_run_id: str | None = None, edited_stage: str | None = None):
        self.run_id = run_id
        self.raw_input = raw_input
        self.store = store
        self.started_at = _now_iso()
        self.entries: list[StageEntry] = []
        self.parent_run_id = parent_run_id
        self.edited_stage = edited_stage

    def append(self, ctx: _StageContext, duration_ms: float) -> None:
        self.entries.append(
            StageEntry(
                stage=ctx.stage,
                input_snapshot=ctx.input_snapshot,
                output_snapshot=ctx.output_snapshot,
                transcripts=tuple(t.to_dict() if hasattr(t, "to_dict") else dict(t) for t in ctx.transcripts),
                diagnostics=tuple(ctx.diagnostics),
                duration_ms=duration_ms,
            )
        )

    def copy_entries(self, entries: list[StageEntry]) -> None:
        self.entries.extend(entries)

    def finish(self, verdict: Verdict) -> RunRecord:
        record = RunRecord(
            run_id=self.run_id,
            raw_input=self.raw_input,
            stage_entries=tuple(self.entries),
            verdict=verdict,
            started_at=self.started_at,
            finished_at=_now_iso(),
            parent_run_id=self.parent_run_id,
            edited_stage=self.edited_stage,
        )
        if self.store is not None:
            self.store.save(record)
        return record


@dataclass
class _RunEnv:
    config: PipelineConfig
    provider: Provider
    library: PromptLibrary
    schema: Schema | None
    out_dir: Path | None
    module_slug: str | None


def _write_artifacts(env: _RunEnv, state: _PipelineState) -> list[str]:
    written: list[str] = []
    if env.out_dir is None or state.artifact is None:
        return written
    env.out_dir.mkdir(parents=True, exist_ok=True)
    slug = state.artifact.module_slug
    module_path = env.out_dir / f"{slug}.rego"
    module_path.write_text(state.artifact.source, encoding="utf-8")
    written.append(str(module_path))
    if state.test_file is not None:
        test_path = env.out_dir / f"{slug}_test.rego"
        test_path.write_text(state.test_file, encoding="utf-8")
        written.append(str(test_path))
    return written


# --- stage implementations; each returns a halt verdict or None ---


def _stage_detect(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    ctx.input_snapshot = {"text": state.text}
    state.detection = preprocess.detect(state.text, env.provider, env.config, env.library, ctx.transcripts)
    ctx.output_snapshot = state.detection.to_dict()
    if not state.detection.is_policy:
        ctx.diagnostics.append(f"rejected: {state.detection.rationale}")
        return Verdict.REJECTED_NOT_POLICY
    return None


def _stage_segment(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    ctx.input_snapshot = {"text": state.text}
    try:
        state.statements = preprocess.segment_and_resolve(
            state.text, env.provider, env.config, env.library, ctx.transcripts
        )
    except SegmentationFailed as exc:
        ctx.diagnostics.append(f"segmentation failed: {exc}")
        return Verdict.REJECTED_NOT_POLICY
    ctx.output_snapshot = {"statements": [s.to_dict() for s in state.statements]}
    return None


def _stage_extract(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    ctx.input_snapshot = {"statements": [s.to_dict() for s in state.statements]}
    tuples: list[DsarcpTuple] = []
    for statement in state.statements:
        try:
            tuples.append(
                extract.extract_dsarcp(
                    statement, env.provider, env.config, env.library,
                    schema=env.schema if env.config.schema_validation_enabled else None,
                    transcripts=ctx.transcripts,
                )
            )
        except (MissingComponent, ExtractionUnparseable) as exc:
            ctx.diagnostics.append(f"statement {statement.index}: {exc}")
            ctx.output_snapshot = {"tuples": [t.to_dict() for t in tuples]}
            return Verdict.REJECTED_NOT_POLICY
    state.tuples = tuples
    ctx.output_snapshot = {"tuples": [t.to_dict() for t in tuples]}
    return None


def _stage_validate(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    ctx.input_snapshot = {
        "tuples": [t.to_dict() for t in state.tuples],
        "schema": env.schema.name if env.schema else None,
        "enabled": env.config.schema_validation_enabled,
    }
    if not env.config.schema_validation_enabled or env.schema is None:
        if env.config.schema_validation_enabled and env.schema is None:
            ctx.diagnostics.append("no schema provided; validation skipped")
        state.validation_reports = [
            ValidationReport(verdict="Skipped", tuple=t) for t in state.tuples
        ]
    else:
        state.validation_reports = [
            schemaval.validate(t, env.schema, env.config) for t in state.tuples
        ]
    ctx.output_snapshot = {"reports": [r.to_dict() for r in state.validation_reports]}
    invalid = [r for r in state.validation_reports if r.verdict == "Invalid"]
    if invalid:
        for report in invalid:
            for finding in report.findings:
                ctx.diagnostics.append(
                    f"{finding.component} {finding.value!r} not in schema; nearest: {', '.join(finding.candidates)}"
                )
        return Verdict.HALTED_SCHEMA_INVALID
    return None


def _stage_generate(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    slug = env.module_slug or codegen.default_module_slug(state.tuples)
    state.module_slug = slug
    ctx.input_snapshot = {
        "tuples": [t.to_dict() for t in state.tuples],
        "module_slug": slug,
        "backend": env.config.codegen_backend.value,
    }
    if env.config.codegen_backend is CodegenBackend.LLM_SYNTHESIS:
        try:
            state.artifact = codegen.llm_emit(
                state.tuples, state.statements, env.provider, env.config,
                module_slug=slug, library=env.library, transcripts=ctx.transcripts,
            )
        except SynthesisRejected as exc:
            ctx.diagnostics.append(f"synthesis rejected, falling back to the deterministic template: {exc}")
            state.artifact = codegen.emit_module(state.tuples, slug, state.statements)
    else:
        state.artifact = codegen.emit_module(state.tuples, slug, state.statements)
    ctx.output_snapshot = {"artifact": state.artifact.to_dict()}
    _write_artifacts(env, state)
    return None


def _stage_lint(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    assert state.artifact is not None
    ctx.input_snapshot = {"module_slug": state.artifact.module_slug, "enabled": env.config.rego_validation_enabled}
    if not env.config.rego_validation_enabled:
        ctx.output_snapshot = {"skipped": True, "findings": []}
        ctx.diagnostics.append("skipped: rego validation disabled")
        return None

    findings, report = toolchain.lint_report(state.artifact, env.config)
    repaired = False
    # feedback loop for the synthesis backend; the deterministic template is
    # lint-clean by construction and is itself the terminal fallback
    while findings and state.artifact.backend is CodegenBackend.LLM_SYNTHESIS:
        repaired = True
        state.artifact = codegen.apply_lint_feedback(
            state.artifact, findings, env.provider, env.config, env.library, ctx.transcripts
        )
        if state.artifact.backend is CodegenBackend.DETERMINISTIC_TEMPLATE:
            ctx.diagnostics.append("lint budget exhausted; fell back to the deterministic template")
        findings, report = toolchain.lint_report(state.artifact, env.config)
    if repaired:
        _write_artifacts(env, state)

    state.lint_findings = findings
    ctx.output_snapshot = {
        "skipped": False,
        "findings": [f.to_dict() for f in findings],
        "iterations": state.artifact.lint_iterations_used,
        "report": report.to_dict(),
        "artifact": state.artifact.to_dict() if repaired else None,
    }
    for finding in findings:
        ctx.diagnostics.append(f"{finding.rule}: {finding.message} ({finding.file}:{finding.row})")
    return None


def _stage_compile(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    assert state.artifact is not None
    ctx.input_snapshot = {"module_slug": state.artifact.module_slug, "enabled": env.config.rego_validation_enabled}
    if not env.config.rego_validation_enabled:
        ctx.output_snapshot = {"skipped": True}
        ctx.diagnostics.append("skipped: rego validation disabled")
        return None
    report = toolchain.compile_check(state.artifact, env.config)
    ctx.output_snapshot = {"skipped": False, "report": report.to_dict()}
    if not report.success:
        ctx.diagnostics.extend(report.diagnostics)
        return Verdict.COMPILE_FAILED
    return None


def _stage_testgen(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    assert state.artifact is not None
    slug = state.artifact.module_slug
    ctx.input_snapshot = {"mode": env.config.test_mode.value, "module_slug": slug}
    if env.config.test_mode is TestMode.LLM_BASED:
        state.suite = testgen.llm_tests(
            state.tuples, state.statements, env.provider, env.config,
            module_slug=slug, library=env.library, transcripts=ctx.transcripts,
        )
        if state.suite.fallback_from_llm:
            ctx.diagnostics.append("llm test proposal unusable; fell back to rule-based generation")
    else:
        state.suite = testgen.rule_based_tests(state.tuples, slug)
    state.test_file = testgen.render_test_file(state.suite)
    ctx.output_snapshot = {"suite": state.suite.to_dict(), "test_file": state.test_file}
    _write_artifacts(env, state)
    return None


def _stage_test(env: _RunEnv, state: _PipelineState, ctx: _StageContext) -> Verdict | None:
    assert state.artifact is not None and state.suite is not None and state.test_file is not None
    ctx.input_snapshot = {"cases": len(state.suite.cases), "enabled": env.config.rego_validation_enabled}
    if not env.config.rego_validation_enabled:
        ctx.output_snapshot = {"skipped": True}
        ctx.diagnostics.append("skipped: rego validation disabled")
        return None
    report = toolchain.run_tests(state.artifact, state.test_file, env.config)
    shadowed = testgen.shadowed_positive_names(state.tuples)
    labeled = sorted(
        name for name, verdict in report.verdicts if verdict == "fail" and name in shadowed
    )
    ctx.output_snapshot = {"skipped": False, "report": report.to_dict(), "shadowed": labeled}
    for name in labeled:
        ctx.diagnostics.append(f"{name}: ShadowedByDeny (allow statement exactly shadowed by a deny)")
    for name, verdict in report.verdicts:
        if verdict == "fail" and name not in shadowed:
            ctx.diagnostics.append(f"{name}: failed")
    return None


_STAGE_FUNCS: list[tuple[str, Callable[[_RunEnv, _PipelineState, _StageContext], Verdict | None]]] = [
    ("detect", _stage_detect),
    ("segment", _stage_segment),
    ("extract", _stage_extract),
    ("validate", _stage_validate),
    ("generate", _stage_generate),
    ("lint", _stage_lint),
    ("compile", _stage_compile),
    ("testgen", _stage_testgen),
    ("test", _stage_test),
]


def _execute(builder: _RunBuilder, env: _RunEnv, state: _PipelineState, start_stage: str) -> RunRecord:
    start_index = STAGE_ORDER.index(start_stage)
    for stage_name, stage_fn in _STAGE_FUNCS[start_index:]:
        ctx = _StageContext(stage_name)
        started = time.perf_counter()
        try:
            halt = stage_fn(env, state, ctx)
        except ToolUnavailable as exc:
            ctx.diagnostics.append(f"ToolUnavailable: {exc}")
            builder.append(ctx, (time.perf_counter() - started) * 1000.0)
            record = builder.finish(Verdict.ACCEPTED)
            exc.record = record  # callers can still reach the audit trail
            raise
        builder.append(ctx, (time.perf_counter() - started) * 1000.0)
        if halt is not None:
            return builder.finish(halt)
    return builder.finish(Verdict.COMPLETED)


def run_single(
    text: str,
    config: PipelineConfig,
    schema: Schema | None = None,
    store: RunStore | None = None,
    out_dir: str | Path | None = None,
    module_slug: str | None = None,
    provider: Provider | None = None,
    library: PromptLibrary | None = None,
) -> RunRecord:
    """Execute the full pipeline for one input text.

    The returned record is persisted (when a store is given) before this
    returns; a ToolUnavailable error is raised after persisting the partial
    record, with the record attached to the exception.
    """
    env = _RunEnv(
        config=config,
        provider=provider or get_provider(config),
        library=library or PromptLibrary(config.prompt_dir),
        schema=schema,
        out_dir=Path(out_dir) if out_dir else None,
        module_slug=module_slug,
    )
    builder = _RunBuilder(new_run_id(), text, store)
    return _execute(builder, env, _PipelineState(text=text), "detect")


# --- edit-and-rerun ---

# Stages whose output payloads are editable, with decode/encode codecs.
_EDITABLE_DECODERS: dict[str, Callable[[Any], Any]] = {
    "detect": lambda p: DetectionResult.from_dict(p),
    "segment": lambda p: [PolicyStatement.from_dict(s) for s in (p["statements"] if isinstance(p, dict) else p)],
    "extract": lambda p: [DsarcpTuple.from_dict(t) for t in (p["tuples"] if isinstance(p, dict) else p)],
    "validate": lambda p: [ValidationReport.from_dict(r) for r in (p["reports"] if isinstance(p, dict) else p)],
    "generate": lambda p: _decode_artifact_payload(p),
    "testgen": lambda p: TestSuite.from_dict(p["suite"] if isinstance(p, dict) and "suite" in p else p),
}


def _decode_artifact_payload(payload: Any) -> RegoArtifact:
    if isinstance(payload, dict) and "artifact" in payload:
        payload = payload["artifact"]
    if not isinstance(payload, dict):
        raise ValueError("artifact payload must be an object")
    if "source" in payload and "package_name" in payload and "annotations" in payload:
        return RegoArtifact.from_dict(payload)
    # hand-written Rego: accept bare source, recover annotations from it
    if "source" in payload:
        source = str(payload["source"])
        if not source.endswith("\n"):
            source += "\n"
        tuples = codegen.parse_annotations(source)
        package = payload.get("package_name")
        if not package:
            m = re.search(r"^package\s+(\S+)$", source, re.M)
            if not m:
                raise ValueError("cannot determine package name from source")
            package = m.group(1)
        from .model import Annotation

        annotations = tuple(Annotation(tuple=t, statement_text="") for t in tuples)
        return RegoArtifact(
            package_name=package,
            source=source,
            annotations=annotations,
            backend=CodegenBackend.LLM_SYNTHESIS,
            lint_iterations_used=0,
        )
    raise ValueError("artifact payload needs at least a 'source' field")


def _state_from_record(record: RunRecord, upto_stage: str, overrides: dict[str, Any]) -> _PipelineState:
    """Reconstruct pipeline state from a record's snapshots up to and
    including a stage, applying the edited output override."""
    state = _PipelineState(text=record.raw_input)
    limit = STAGE_ORDER.index(upto_stage)
    for entry in record.stage_entries:
        if STAGE_ORDER.index(entry.stage) > limit:
            break
        output = overrides.get(entry.stage, entry.output_snapshot)
        if entry.stage == "detect" and output:
            state.detection = DetectionResult.from_dict(output if isinstance(output, dict) else output.to_dict())
        elif entry.stage == "segment" and output:
            payload = output["statements"] if isinstance(output, dict) else output
            state.statements = [
                s if isinstance(s, PolicyStatement) else PolicyStatement.from_dict(s) for s in payload
            ]
        elif entry.stage == "extract" and output:
            payload = output["tuples"] if isinstance(output, dict) else output
            state.tuples = [t if isinstance(t, DsarcpTuple) else DsarcpTuple.from_dict(t) for t in payload]
        elif entry.stage == "validate" and output:
            payload = output["reports"] if isinstance(output, dict) else output
            state.validation_reports = [
                r if isinstance(r, ValidationReport) else ValidationReport.from_dict(r) for r in payload
            ]
        elif entry.stage == "generate" and output:
            if isinstance(output, RegoArtifact):
                state.artifact = output
            else:
                state.artifact = _decode_artifact_payload(output)
            state.module_slug = state.artifact.module_slug
        elif entry.stage == "testgen" and output:
            if isinstance(output, TestSuite):
                state.suite = output
            elif isinstance(output, dict) and "suite" in output:
                state.suite = TestSuite.from_dict(output["suite"])
            if state.suite is not None:
                state.test_file = testgen.render_test_file(state.suite)
    return state


def rerun_from_stage(
    record: RunRecord,
    stage: str,
    edited_payload: Any,
    config: PipelineConfig,
    schema: Schema | None = None,
    store: RunStore | None = None,
    out_dir: str | Path | None = None,
    provider: Provider | None = None,
    library: PromptLibrary | None = None,
) -> RunRecord:
    """Re-execute a run downstream of an edited stage output.

    ``stage`` names the stage whose output was edited; entries up to and
    including it are carried over (the edited one re-snapshotted), and
    execution resumes at the following stage. Provenance links the new
    record to the old via parent_run_id.
    """
    if stage not in STAGE_ORDER:
        raise KeyError(f"unknown stage {stage!r}")
    entry = record.entry(stage)
    if entry is None:
        raise KeyError(f"run {record.run_id} has no entry for stage {stage!r}")

    edited_value: Any = None
    if edited_payload is not None:
        decoder = _EDITABLE_DECODERS.get(stage)
        if decoder is None:
            raise PayloadTypeMismatch(f"stage {stage!r} output is not editable")
        try:
            edited_value = decoder(edited_payload)
        except PayloadTypeMismatch:
            raise
        except Exception as exc:
            raise PayloadTypeMismatch(f"payload does not match {stage!r} output type: {exc}") from exc

    env = _RunEnv(
        config=config,
        provider=provider or get_provider(config),
        library=library or PromptLibrary(config.prompt_dir),
        schema=schema,
        out_dir=Path(out_dir) if out_dir else None,
        module_slug=None,
    )
    builder = _RunBuilder(
        new_run_id(), record.raw_input, store, parent_run_id=record.run_id, edited_stage=stage
    )

    overrides: dict[str, Any] = {}
    if edited_value is not None:
        overrides[stage] = edited_value
    state = _state_from_record(record, stage, overrides)
    env.module_slug = state.module_slug

    stage_index = STAGE_ORDER.index(stage)
    for prior in record.stage_entries:
        if STAGE_ORDER.index(prior.stage) > stage_index:
            break
        if prior.stage == stage and edited_value is not None:
            builder.entries.append(
                StageEntry(
                    stage=prior.stage,
                    input_snapshot=prior.input_snapshot,
                    output_snapshot=_encode_stage_output(stage, edited_value),
                    transcripts=prior.transcripts,
                    diagnostics=tuple([*prior.diagnostics, f"output edited in rerun of {record.run_id}"]),
                    duration_ms=prior.duration_ms,
                )
            )
        else:
            builder.entries.append(prior)

    if stage_index + 1 >= len(STAGE_ORDER):
        return builder.finish(record.verdict)
    return _execute(builder, env, state, STAGE_ORDER[stage_index + 1])


def _encode_stage_output(stage: str, value: Any) -> Any:
    if stage == "detect":
        return value.to_dict()
    if stage == "segment":
        return {"statements": [s.to_dict() for s in value]}
    if stage == "extract":
        return {"tuples": [t.to_dict() for t in value]}
    if stage == "validate":
        return {"reports": [r.to_dict() for r in value]}
    if stage == "generate":
        return {"artifact": value.to_dict()}
    if stage == "testgen":
        return {"suite": value.to_dict(), "test_file": testgen.render_test_file(value)}
    return value


# --- batch processing and metrics ---


@dataclass(frozen=True)
class RateValue:
    """A metric as an exact, unreduced fraction. ``value`` is None when the
    denominator is zero (reported as undefined, never as 0)."""

    numerator: int
    denominator: int

    @property
    def value(self) -> float | None:
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator

    def __str__(self) -> str:
        if self.denominator == 0:
            return "undefined"
        return f"{self.numerator}/{self.denominator} ({100.0 * self.value:.1f}%)"

    def to_dict(self) -> dict[str, Any]:
        return {"numerator": self.numerator, "denominator": self.denominator, "value": self.value}


@dataclass(frozen=True)
class BatchRow:
    line_index: int
    run_id: str
    verdict: str
    module_slug: str | None
    statements: int
    tests_total: int
    tests_passed: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "line_index": self.line_index,
            "run_id": self.run_id,
            "verdict": self.verdict,
            "module_slug": self.module_slug,
            "statements": self.statements,
            "tests_total": self.tests_total,
            "tests_passed": self.tests_passed,
        }


@dataclass(frozen=True)
class BatchReport:
    """Aggregated batch metrics with the denominators spelled out:
    compile rate over accepted runs, test pass rates over compiled runs."""

    inputs: int
    statements: int
    detected: int
    accepted: int
    compiled: int
    rejected_not_policy: int
    halted_schema_invalid: int
    compile_failed: int
    tool_unavailable: int
    positive_total: int
    positive_passed: int
    positive_shadowed: int
    negative_total: int
    negative_passed: int
    compile_rate: RateValue
    positive_pass_rate: RateValue
    negative_pass_rate: RateValue
    rows: tuple[BatchRow, ...]

    @property
    def run_ids(self) -> list[str]:
        return [row.run_id for row in self.rows]

    def to_dict(self) -> dict[str, Any]:
        return {
            "inputs": self.inputs,
            "statements": self.statements,
            "detected": self.detected,
            "accepted": self.accepted,
            "compiled": self.compiled,
            "rejected_not_policy": self.rejected_not_policy,
            "halted_schema_invalid": self.halted_schema_invalid,
            "compile_failed": self.compile_failed,
            "tool_unavailable": self.tool_unavailable,
            "positive_total": self.positive_total,
            "positive_passed": self.positive_passed,
            "positive_shadowed": self.positive_shadowed,
            "negative_total": self.negative_total,
            "negative_passed": self.negative_passed,
            "compile_rate": self.compile_rate.to_dict(),
            "positive_pass_rate": self.positive_pass_rate.to_dict(),
            "negative_pass_rate": self.negative_pass_rate.to_dict(),
            "rows": [row.to_dict() for row in self.rows],
        }


def aggregate_metrics(indexed_records: list[tuple[int, RunRecord | None]]) -> BatchReport:
    """Compute batch metrics from persisted records. Pure over its input so
    the report can always be recomputed from the runs directory.

    ``None`` records mark runs aborted by an unavailable toolchain; they are
    excluded from the compile-rate denominator rather than being counted as
    policy defects.
    """
    detected = accepted = compiled = 0
    rejected = halted = compile_failed = tool_unavailable = 0
    statements_total = 0
    pos_total = pos_passed = pos_shadowed = 0
    neg_total = neg_passed = 0
    rows: list[BatchRow] = []

    for line_index, record in indexed_records:
        if record is None:
            tool_unavailable += 1
            rows.append(BatchRow(line_index, "", "ToolUnavailable", None, 0, 0, 0))
            continue
        verdict = record.verdict
        detect_entry = record.entry("detect")
        if detect_entry and isinstance(detect_entry.output_snapshot, dict):
            if detect_entry.output_snapshot.get("is_policy"):
                detected += 1
        segment_entry = record.entry("segment")
        n_statements = 0
        if segment_entry and isinstance(segment_entry.output_snapshot, dict):
            n_statements = len(segment_entry.output_snapshot.get("statements") or [])
        statements_total += n_statements

        slug: str | None = None
        generate_entry = record.entry("generate")
        if generate_entry and isinstance(generate_entry.output_snapshot, dict):
            artifact = generate_entry.output_snapshot.get("artifact") or {}
            package = artifact.get("package_name", "")
            slug = package.rsplit(".", 1)[-1] if package else None

        if verdict is Verdict.REJECTED_NOT_POLICY:
            rejected += 1
        elif verdict is Verdict.HALTED_SCHEMA_INVALID:
            halted += 1
        elif verdict is Verdict.ACCEPTED:
            # reached some stage but was aborted (toolchain unavailable)
            tool_unavailable += 1
            rows.append(BatchRow(line_index, record.run_id, "ToolUnavailable", slug, n_statements, 0, 0))
            continue

        if verdict in (Verdict.COMPILE_FAILED, Verdict.COMPLETED):
            accepted += 1
        if verdict is Verdict.COMPILE_FAILED:
            compile_failed += 1

        tests_total = tests_passed = 0
        if verdict is Verdict.COMPLETED:
            compile_entry = record.entry("compile")
            compile_skipped = (
                not compile_entry
                or not isinstance(compile_entry.output_snapshot, dict)
                or compile_entry.output_snapshot.get("skipped", True)
            )
            if not compile_skipped:
                compiled += 1
                kinds = _case_kinds(record)
                shadowed = _shadowed_names(record)
                test_entry = record.entry("test")
                if test_entry and isinstance(test_entry.output_snapshot, dict) and not test_entry.output_snapshot.get("skipped", True):
                    report = test_entry.output_snapshot.get("report") or {}
                    for name, outcome in report.get("verdicts") or []:
                        tests_total += 1
                        passed = outcome == "pass"
                        if passed:
                            tests_passed += 1
                        if kinds.get(name) == "Positive":
                            if name in shadowed:
                                pos_shadowed += 1
                            else:
                                pos_total += 1
                                if passed:
                                    pos_passed += 1
                        else:
                            neg_total += 1
                            if passed:
                                neg_passed += 1

        rows.append(BatchRow(line_index, record.run_id, verdict.value, slug, n_statements, tests_total, tests_passed))

    return BatchReport(
        inputs=len(indexed_records),
        statements=statements_total,
        detected=detected,
        accepted=accepted,
        compiled=compiled,
        rejected_not_policy=rejected,
        halted_schema_invalid=halted,
        compile_failed=compile_failed,
        tool_unavailable=tool_unavailable,
        positive_total=pos_total,
        positive_passed=pos_passed,
        positive_shadowed=pos_shadowed,
        negative_total=neg_total,
        negative_passed=neg_passed,
        compile_rate=RateValue(compiled, accepted),
        positive_pass_rate=RateValue(pos_passed, pos_total),
        negative_pass_rate=RateValue(neg_passed, neg_total),
        rows=tuple(rows),
    )


def _case_kinds(record: RunRecord) -> dict[str, str]:
    entry = record.entry("testgen")
    kinds: dict[str, str] = {}
    if entry and isinstance(entry.output_snapshot, dict):
        suite = entry.output_snapshot.get("suite") or {}
        for case in suite.get("cases") or []:
            kinds[case.get("name", "")] = case.get("kind", "")
    return kinds


def _shadowed_names(record: RunRecord) -> frozenset[str]:
    entry = record.entry("test")
    if entry and isinstance(entry.output_snapshot, dict):
        return frozenset(entry.output_snapshot.get("shadowed") or ())
    return frozenset()


def run_batch(
    inputs: list[str],
    config: PipelineConfig,
    schema: Schema | None = None,
    store: RunStore | None = None,
    out_dir: str | Path | None = None,
    provider: Provider | None = None,
    library: PromptLibrary | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> BatchReport:
    """Run the pipeline over each input line with bounded parallelism.

    Partial failures are recorded per run; the batch itself always
    completes. Artifacts for completed runs are written (serially, with
    collision-proof names) under ``out_dir``.
    """
    lines = [line for line in inputs if line.strip()]
    if not lines:
        raise ValueError("batch input must contain at least one non-empty line")
    shared_provider = provider or get_provider(config)
    shared_library = library or PromptLibrary(config.prompt_dir)
    workers = config.parallelism or min(8, os.cpu_count() or 1, len(lines))
    results: list[RunRecord | None] = [None] * len(lines)
    done = 0
    done_lock = threading.Lock()

    def work(index: int) -> None:
        nonlocal done
        try:
            results[index] = run_single(
                lines[index], config, schema=schema, store=store,
                provider=shared_provider, library=shared_library,
            )
        except ToolUnavailable as exc:
            results[index] = getattr(exc, "record", None)
        except Exception:
            logging.getLogger(__name__).exception("batch line %d aborted", index)
        with done_lock:
            done += 1
            if progress is not None:
                progress(done, len(lines))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        list(pool.map(work, range(len(lines))))

    report = aggregate_metrics(list(enumerate(results)))

    if out_dir is not None:
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        used: set[str] = set()
        for record in results:
            if record is None:
                continue
            artifact, test_file = _artifact_from_record(record)
            if artifact is None:
                continue
            slug = artifact.module_slug
            base = slug
            counter = 2
            while slug in used:
                slug = f"{base}_{counter}"
                counter += 1
            used.add(slug)
            (target / f"{slug}.rego").write_text(artifact.source, encoding="utf-8")
            if test_file:
                (target / f"{slug}_test.rego").write_text(test_file, encoding="utf-8")

    return report


def _artifact_from_record(record: RunRecord) -> tuple[RegoArtifact | None, str | None]:
    generate_entry = record.entry("generate")
    if not generate_entry or not isinstance(generate_entry.output_snapshot, dict):
        return None, None
    lint_entry = record.entry("lint")
    artifact_payload = None
    if lint_entry and isinstance(lint_entry.output_snapshot, dict) and lint_entry.output_snapshot.get("artifact"):
        artifact_payload = lint_entry.output_snapshot["artifact"]
    else:
        artifact_payload = generate_entry.output_snapshot.get("artifact")
    if not artifact_payload:
        return None, None
    artifact = RegoArtifact.from_dict(artifact_payload)
    test_entry = record.entry("testgen")
    test_file = None
    if test_entry and isinstance(test_entry.output_snapshot, dict):
        test_file = test_entry.output_snapshot.get("test_file")
    return artifact, test_file


__all__ = [
    "RunStore",
    "RateValue",
    "BatchRow",
    "BatchReport",
    "new_run_id",
    "bundled_corpus_lines",
    "bundled_schemas",
    "run_single",
    "rerun_from_stage",
    "run_batch",
    "aggregate_metrics",
]
