"""Shared domain types, slug normalization, and run-record serialization.

All types here are immutable value objects. Constructors reject invariant
violations instead of silently normalizing; normalization is explicit via
:func:`slugify`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import EmptyValue, MalformedRecord

# Fixed stage order for a full pipeline run. A halted run's entries are a
# strict prefix of this sequence.
STAGE_ORDER = (
    "detect",
    "segment",
    "extract",
    "validate",
    "generate",
    "lint",
    "compile",
    "testgen",
    "test",
)

_SLUG_RE = re.compile(r"^[a-z_][a-z0-9_]*$")
_NON_ALNUM_RE = re.compile(r"[^a-z0-9]+")


def slugify(raw: str) -> str:
    """Normalize a value into the canonical slug form shared by schemas,
    emitted code literals, and test names.

    Lowercases, collapses runs of non-alphanumerics to single underscores,
    strips leading/trailing underscores, and prefixes a leading digit with
    an underscore.
    """
    collapsed = _NON_ALNUM_RE.sub("_", raw.lower()).strip("_")
    if not collapsed:
        raise EmptyValue(f"value {raw!r} normalizes to an empty slug")
    if collapsed[0].isdigit():
        collapsed = "_" + collapsed
    return collapsed


def is_canonical_slug(value: str) -> bool:
    return bool(_SLUG_RE.match(value))


class Decision(Enum):
    ALLOW = "Allow"
    DENY = "Deny"


class CodegenBackend(Enum):
    DETERMINISTIC_TEMPLATE = "template"
    LLM_SYNTHESIS = "llm"


class TestMode(Enum):
    RULE_BASED = "rule"
    LLM_BASED = "llm"


class TestKind(Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"


class Verdict(Enum):
    ACCEPTED = "Accepted"
    REJECTED_NOT_POLICY = "RejectedNotPolicy"
    HALTED_SCHEMA_INVALID = "HaltedSchemaInvalid"
    COMPILE_FAILED = "CompileFailed"
    COMPLETED = "Completed"


def _require_slug(name: str, value: str) -> None:
    if not isinstance(value, str) or not is_canonical_slug(value):
        raise ValueError(f"{name} must be a canonical slug, got {value!r}")


@dataclass(frozen=True)
class DsarcpTuple:
    """One extracted policy: decision, subject, action, resource, plus
    optional condition list and purpose."""

    decision: Decision
    subject: str
    action: str
    resource: str
    conditions: tuple[str, ...] = ()
    purpose: str | None = None
    source_statement_index: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.decision, Decision):
            raise ValueError(f"decision must be Allow or Deny, got {self.decision!r}")
        for name in ("subject", "action", "resource"):
            _require_slug(name, getattr(self, name))
        object.__setattr__(self, "conditions", tuple(self.conditions))
        for cond in self.conditions:
            _require_slug("condition", cond)
        if len(set(self.conditions)) != len(self.conditions):
            raise ValueError(f"duplicate conditions: {self.conditions!r}")
        if self.purpose is not None:
            _require_slug("purpose", self.purpose)
        if self.source_statement_index < 0:
            raise ValueError("source_statement_index must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "decision": self.decision.value,
            "subject": self.subject,
            "action": self.action,
            "resource": self.resource,
            "conditions": list(self.conditions),
            "purpose": self.purpose,
            "source_statement_index": self.source_statement_index,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DsarcpTuple":
        return cls(
            decision=Decision(data["decision"]),
            subject=data["subject"],
            action=data["action"],
            resource=data["resource"],
            conditions=tuple(data.get("conditions") or ()),
            purpose=data.get("purpose"),
            source_statement_index=int(data.get("source_statement_index", 0)),
        )


@dataclass(frozen=True)
class PolicyStatement:
    """One normalized statement after co-reference resolution and
    segmentation. ``origin_span`` locates the source clause in the raw input;
    ``text`` may differ from the raw span after pronoun resolution."""

    text: str
    index: int
    origin_span: tuple[int, int]

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("statement text is empty after trimming")
        if self.index < 0:
            raise ValueError("statement index must be non-negative")
        start, end = self.origin_span
        if start < 0 or end < start:
            raise ValueError(f"invalid origin span ({start}, {end})")
        object.__setattr__(self, "origin_span", (int(start), int(end)))

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "index": self.index, "origin_span": list(self.origin_span)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PolicyStatement":
        span = data["origin_span"]
        return cls(text=data["text"], index=int(data["index"]), origin_span=(span[0], span[1]))


@dataclass(frozen=True)
class Schema:
    """Organization vocabulary: valid slugs per policy component.

    ``conditions``/``purposes`` are optional; ``None`` means that component
    is unconstrained.
    """

    name: str
    subjects: frozenset[str]
    actions: frozenset[str]
    resources: frozenset[str]
    conditions: frozenset[str] | None = None
    purposes: frozenset[str] | None = None

    def __post_init__(self) -> None:
        _require_slug("schema name", self.name)
        for attr in ("subjects", "actions", "resources"):
            values = getattr(self, attr)
            object.__setattr__(self, attr, frozenset(values))
            if not values:
                raise ValueError(f"schema {attr} must be non-empty")
        for attr in ("conditions", "purposes"):
            values = getattr(self, attr)
            if values is not None:
                object.__setattr__(self, attr, frozenset(values))
        for group in (self.subjects, self.actions, self.resources,
                      self.conditions or (), self.purposes or ()):
            for value in group:
                _require_slug("schema value", value)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "subjects": sorted(self.subjects),
            "actions": sorted(self.actions),
            "resources": sorted(self.resources),
        }
        if self.conditions is not None:
            data["conditions"] = sorted(self.conditions)
        if self.purposes is not None:
            data["purposes"] = sorted(self.purposes)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Schema":
        return cls(
            name=data["name"],
            subjects=frozenset(data["subjects"]),
            actions=frozenset(data["actions"]),
            resources=frozenset(data["resources"]),
            conditions=frozenset(data["conditions"]) if data.get("conditions") is not None else None,
            purposes=frozenset(data["purposes"]) if data.get("purposes") is not None else None,
        )

    def summary(self) -> str:
        """Short textual listing used to ground extraction prompts."""
        parts = [
            f"subjects: {', '.join(sorted(self.subjects))}",
            f"actions: {', '.join(sorted(self.actions))}",
            f"resources: {', '.join(sorted(self.resources))}",
        ]
        if self.conditions is not None:
            parts.append(f"conditions: {', '.join(sorted(self.conditions))}")
        if self.purposes is not None:
            parts.append(f"purposes: {', '.join(sorted(self.purposes))}")
        return "; ".join(parts)


@dataclass(frozen=True)
class Annotation:
    """Audit binding between one emitted rule and its source statement."""

    tuple: DsarcpTuple
    statement_text: str

    @property
    def statement_index(self) -> int:
        return self.tuple.source_statement_index

    def to_dict(self) -> dict[str, Any]:
        return {"tuple": self.tuple.to_dict(), "statement_text": self.statement_text}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Annotation":
        return cls(tuple=DsarcpTuple.from_dict(data["tuple"]), statement_text=data["statement_text"])


@dataclass(frozen=True)
class RegoArtifact:
    """A generated Rego module plus per-statement audit annotations."""

    package_name: str
    source: str
    annotations: tuple[Annotation, ...]
    backend: CodegenBackend
    lint_iterations_used: int = 0

    def __post_init__(self) -> None:
        if not self.package_name.startswith("policies."):
            raise ValueError(f"package name must live under 'policies.', got {self.package_name!r}")
        _require_slug("module slug", self.module_slug)
        if not self.source.strip():
            raise ValueError("module source is empty")
        if not self.source.endswith("\n") or self.source.endswith("\n\n"):
            raise ValueError("module source must end with exactly one newline")
        object.__setattr__(self, "annotations", tuple(self.annotations))
        indices = [a.statement_index for a in self.annotations]
        if len(set(indices)) != len(indices):
            raise ValueError("annotations must cover each statement exactly once")
        if self.lint_iterations_used < 0:
            raise ValueError("lint_iterations_used must be non-negative")

    @property
    def module_slug(self) -> str:
        return self.package_name.rsplit(".", 1)[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "package_name": self.package_name,
            "source": self.source,
            "annotations": [a.to_dict() for a in self.annotations],
            "backend": self.backend.value,
            "lint_iterations_used": self.lint_iterations_used,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RegoArtifact":
        return cls(
            package_name=data["package_name"],
            source=data["source"],
            annotations=tuple(Annotation.from_dict(a) for a in data.get("annotations", [])),
            backend=CodegenBackend(data["backend"]),
            lint_iterations_used=int(data.get("lint_iterations_used", 0)),
        )


@dataclass(frozen=True)
class TestCase:
    """One generated unit test: an input document and the expected allow
    outcome. Kind follows the expectation: Positive expects allow."""

    name: str
    kind: TestKind
    statement_index: int
    input_document: dict[str, Any]
    expected_allow: bool

    def __post_init__(self) -> None:
        if not re.match(r"^[a-z_][a-z0-9_]*$", self.name):
            raise ValueError(f"test name {self.name!r} is not a valid identifier")
        expected_kind = TestKind.POSITIVE if self.expected_allow else TestKind.NEGATIVE
        if self.kind is not expected_kind:
            raise ValueError(f"kind {self.kind.value} contradicts expected_allow={self.expected_allow}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "statement_index": self.statement_index,
            "input_document": self.input_document,
            "expected_allow": self.expected_allow,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TestCase":
        return cls(
            name=data["name"],
            kind=TestKind(data["kind"]),
            statement_index=int(data["statement_index"]),
            input_document=dict(data["input_document"]),
            expected_allow=bool(data["expected_allow"]),
        )


@dataclass(frozen=True)
class TestSuite:
    """Positive/negative cases bound to one generated module."""

    module_slug: str
    cases: tuple[TestCase, ...]
    mode: TestMode
    fallback_from_llm: bool = False

    def __post_init__(self) -> None:
        _require_slug("module slug", self.module_slug)
        object.__setattr__(self, "cases", tuple(self.cases))
        names = [c.name for c in self.cases]
        if len(set(names)) != len(names):
            raise ValueError("test names must be unique within a suite")

    @property
    def package_name(self) -> str:
        return f"policies.{self.module_slug}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "module_slug": self.module_slug,
            "cases": [c.to_dict() for c in self.cases],
            "mode": self.mode.value,
            "fallback_from_llm": self.fallback_from_llm,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TestSuite":
        return cls(
            module_slug=data["module_slug"],
            cases=tuple(TestCase.from_dict(c) for c in data.get("cases", [])),
            mode=TestMode(data["mode"]),
            fallback_from_llm=bool(data.get("fallback_from_llm", False)),
        )


@dataclass(frozen=True)
class StageEntry:
    """Audit entry for one executed pipeline stage.

    Snapshots and transcripts are stored as plain JSON values so records
    round-trip exactly through the line-oriented log format.
    """

    stage: str
    input_snapshot: Any
    output_snapshot: Any
    transcripts: tuple[dict[str, Any], ...] = ()
    diagnostics: tuple[str, ...] = ()
    duration_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.stage not in STAGE_ORDER:
            raise ValueError(f"unknown stage {self.stage!r}")
        object.__setattr__(self, "transcripts", tuple(self.transcripts))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "input_snapshot": self.input_snapshot,
            "output_snapshot": self.output_snapshot,
            "transcripts": list(self.transcripts),
            "diagnostics": list(self.diagnostics),
            "duration_ms": self.duration_ms,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StageEntry":
        return cls(
            stage=data["stage"],
            input_snapshot=data.get("input_snapshot"),
            output_snapshot=data.get("output_snapshot"),
            transcripts=tuple(data.get("transcripts") or ()),
            diagnostics=tuple(data.get("diagnostics") or ()),
            duration_ms=float(data.get("duration_ms", 0.0)),
        )


@dataclass(frozen=True)
class RunRecord:
    """Append-only audit trail of one pipeline run."""

    run_id: str
    raw_input: str
    stage_entries: tuple[StageEntry, ...]
    verdict: Verdict
    started_at: str
    finished_at: str
    parent_run_id: str | None = None
    edited_stage: str | None = None

    def __post_init__(self) -> None:
        if not self.run_id:
            raise ValueError("run_id must be non-empty")
        object.__setattr__(self, "stage_entries", tuple(self.stage_entries))
        stages = tuple(e.stage for e in self.stage_entries)
        if stages != STAGE_ORDER[: len(stages)]:
            raise ValueError(f"stage entries out of order: {stages}")

    def entry(self, stage: str) -> StageEntry | None:
        for e in self.stage_entries:
            if e.stage == stage:
                return e
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "raw_input": self.raw_input,
            "stage_entries": [e.to_dict() for e in self.stage_entries],
            "verdict": self.verdict.value,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "parent_run_id": self.parent_run_id,
            "edited_stage": self.edited_stage,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunRecord":
        return cls(
            run_id=data["run_id"],
            raw_input=data["raw_input"],
            stage_entries=tuple(StageEntry.from_dict(e) for e in data.get("stage_entries", [])),
            verdict=Verdict(data["verdict"]),
            started_at=data.get("started_at", ""),
            finished_at=data.get("finished_at", ""),
            parent_run_id=data.get("parent_run_id"),
            edited_stage=data.get("edited_stage"),
        )


def encode_run_record(record: RunRecord) -> str:
    """Serialize a record to a single line suitable for an append-only log."""
    return json.dumps(record.to_dict(), ensure_ascii=False, separators=(",", ":"))


def decode_run_record(line: str) -> RunRecord:
    """Inverse of :func:`encode_run_record`; raises MalformedRecord on any
    corruption."""
    try:
        data = json.loads(line)
        if not isinstance(data, dict):
            raise ValueError("record line is not an object")
        return RunRecord.from_dict(data)
    except MalformedRecord:
        raise
    except Exception as exc:
        raise MalformedRecord(f"cannot decode run record: {exc}") from exc


@dataclass(frozen=True)
class PipelineConfig:
    """Run-wide knobs: provider selection, validation toggles, generation
    backends, and bounds."""

    provider: str = "mock"
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "NL2REGO_API_KEY"
    schema_validation_enabled: bool = True
    rego_validation_enabled: bool = True
    test_mode: TestMode = TestMode.RULE_BASED
    codegen_backend: CodegenBackend = CodegenBackend.DETERMINISTIC_TEMPLATE
    max_lint_iterations: int = 3
    plural_fold: bool = True
    prompt_dir: str | None = None
    parallelism: int | None = None
    opa_path: str | None = None
    regal_path: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 2048
    runs_dir: str = "runs"

    def __post_init__(self) -> None:
        if self.provider not in ("mock", "openai-compatible"):
            raise ValueError(f"unknown provider {self.provider!r}")
        if self.max_lint_iterations < 1:
            raise ValueError("max_lint_iterations must be >= 1")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "provider": self.provider,
            "endpoint": self.endpoint,
            "model": self.model,
            "api_key_env": self.api_key_env,
            "schema_validation_enabled": self.schema_validation_enabled,
            "rego_validation_enabled": self.rego_validation_enabled,
            "test_mode": self.test_mode.value,
            "codegen_backend": self.codegen_backend.value,
            "max_lint_iterations": self.max_lint_iterations,
            "plural_fold": self.plural_fold,
            "prompt_dir": self.prompt_dir,
            "parallelism": self.parallelism,
            "opa_path": self.opa_path,
            "regal_path": self.regal_path,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "runs_dir": self.runs_dir,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        known = dict(data)
        if "test_mode" in known and not isinstance(known["test_mode"], TestMode):
            known["test_mode"] = TestMode(known["test_mode"])
        if "codegen_backend" in known and not isinstance(known["codegen_backend"], CodegenBackend):
            known["codegen_backend"] = CodegenBackend(known["codegen_backend"])
        allowed = {f for f in cls.__dataclass_fields__}  # noqa: C416 - explicit set
        unknown = set(known) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**known)

    def with_overrides(self, overrides: dict[str, Any]) -> "PipelineConfig":
        merged = self.to_dict()
        merged.update(overrides)
        return PipelineConfig.from_dict(merged)

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


__all__ = [
    "STAGE_ORDER",
    "slugify",
    "is_canonical_slug",
    "Decision",
    "CodegenBackend",
    "TestMode",
    "TestKind",
    "Verdict",
    "DsarcpTuple",
    "PolicyStatement",
    "Schema",
    "Annotation",
    "RegoArtifact",
    "TestCase",
    "TestSuite",
    "StageEntry",
    "RunRecord",
    "encode_run_record",
    "decode_run_record",
    "PipelineConfig",
]
