"""Schema loading and tuple validation against organization vocabularies.

Validation never mutates or auto-corrects a tuple: failures are reported
with nearest-candidate suggestions so a policy administrator can fix the
statement or extend the schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .errors import EmptyValue, SchemaMalformed, SchemaUnreadable
from .model import DsarcpTuple, PipelineConfig, Schema, slugify

REQUIRED_KEYS = ("name", "subjects", "actions", "resources")
OPTIONAL_KEYS = ("conditions", "purposes")


def load_schema(path: str) -> Schema:
    """Parse and invariant-check a schema file. Values are slugified on
    load, which also deduplicates case/spacing variants."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw_text = fh.read()
    except OSError as exc:
        raise SchemaUnreadable(f"cannot read schema {path}: {exc}") from exc
    try:
        data = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise SchemaMalformed(f"schema {path} is not valid JSON: {exc}") from exc
    return schema_from_dict(data, origin=path)


def schema_from_dict(data: Any, origin: str = "<inline>") -> Schema:
    if not isinstance(data, dict):
        raise SchemaMalformed(f"schema {origin}: top level must be an object")
    missing = [key for key in REQUIRED_KEYS if key not in data]
    if missing:
        raise SchemaMalformed(f"schema {origin}: missing required keys {missing}")

    def slug_set(key: str) -> frozenset[str]:
        values = data[key]
        if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
            raise SchemaMalformed(f"schema {origin}: {key} must be an array of strings")
        try:
            slugged = frozenset(slugify(v) for v in values)
        except EmptyValue as exc:
            raise SchemaMalformed(f"schema {origin}: {key} contains an empty value") from exc
        if key in REQUIRED_KEYS and not slugged:
            raise SchemaMalformed(f"schema {origin}: {key} must be non-empty")
        return slugged

    try:
        return Schema(
            name=slugify(str(data["name"])),
            subjects=slug_set("subjects"),
            actions=slug_set("actions"),
            resources=slug_set("resources"),
            conditions=slug_set("conditions") if data.get("conditions") is not None else None,
            purposes=slug_set("purposes") if data.get("purposes") is not None else None,
        )
    except (ValueError, EmptyValue) as exc:
        raise SchemaMalformed(f"schema {origin}: {exc}") from exc


@dataclass(frozen=True)
class Finding:
    """One failed membership check with up to three nearest candidates."""

    component: str
    value: str
    candidates: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"component": self.component, "value": self.value, "candidates": list(self.candidates)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Finding":
        return cls(data["component"], data["value"], tuple(data.get("candidates") or ()))


@dataclass(frozen=True)
class ValidationReport:
    verdict: str  # Valid | Invalid | Skipped
    tuple: DsarcpTuple
    findings: tuple[Finding, ...] = ()

    def __post_init__(self) -> None:
        if self.verdict not in ("Valid", "Invalid", "Skipped"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if (self.verdict == "Invalid") != bool(self.findings):
            raise ValueError("Invalid verdict must carry findings; others must not")

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "tuple": self.tuple.to_dict(),
            "findings": [f.to_dict() for f in self.findings],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ValidationReport":
        return cls(
            verdict=data["verdict"],
            tuple=DsarcpTuple.from_dict(data["tuple"]),
            findings=tuple(Finding.from_dict(f) for f in data.get("findings") or ()),
        )


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def nearest_candidates(value: str, pool: frozenset[str], limit: int = 3) -> tuple[str, ...]:
    ranked = sorted(pool, key=lambda cand: (levenshtein(value, cand), cand))
    return tuple(ranked[:limit])


def _member(value: str, pool: frozenset[str], plural_fold: bool) -> bool:
    if value in pool:
        return True
    if plural_fold and value.endswith("s") and len(value) > 1 and value[:-1] in pool:
        return True
    return False


def validate(tup: DsarcpTuple, schema: Schema, config: PipelineConfig) -> ValidationReport:
    """Membership-check a tuple against the schema.

    Subject/action/resource are always checked; conditions and purpose only
    when the schema declares those sets (absent sets mean unconstrained).
    """
    if not config.schema_validation_enabled:
        return ValidationReport(verdict="Skipped", tuple=tup)

    fold = config.plural_fold
    findings: list[Finding] = []

    for component, value, pool in (
        ("subject", tup.subject, schema.subjects),
        ("action", tup.action, schema.actions),
        ("resource", tup.resource, schema.resources),
    ):
        if not _member(value, pool, fold):
            findings.append(Finding(component, value, nearest_candidates(value, pool)))

    if schema.conditions is not None:
        for cond in tup.conditions:
            if not _member(cond, schema.conditions, fold):
                findings.append(Finding("condition", cond, nearest_candidates(cond, schema.conditions)))
    if schema.purposes is not None and tup.purpose is not None:
        if not _member(tup.purpose, schema.purposes, fold):
            findings.append(Finding("purpose", tup.purpose, nearest_candidates(tup.purpose, schema.purposes)))

    if findings:
        return ValidationReport(verdict="Invalid", tuple=tup, findings=tuple(findings))
    return ValidationReport(verdict="Valid", tuple=tup)


__all__ = [
    "load_schema",
    "schema_from_dict",
    "Finding",
    "ValidationReport",
    "levenshtein",
    "nearest_candidates",
    "validate",
]
