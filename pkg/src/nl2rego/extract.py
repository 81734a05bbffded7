"""Stage 2: DSARCP component extraction from one statement at a time."""

from __future__ import annotations

import re

from .errors import (
    EmptyValue,
    ExtractionUnparseable,
    MalformedPayload,
    MissingComponent,
    NoStructuredPayload,
    UnknownDecision,
)
from .model import Decision, DsarcpTuple, PipelineConfig, PolicyStatement, Schema, slugify
from .prompts import PromptLibrary
from .provider import PromptRequest, PromptStage, Provider, extract_structured

REQUIRED_COMPONENTS = ("decision", "subject", "action", "resource")

# Fixed synonym table for decision words. Lookup is case-insensitive over
# space/underscore-normalized phrases.
_DECISION_SYNONYMS: dict[str, Decision] = {}
for _word in ("allow", "allowed", "permit", "permitted", "authorize", "authorized", "grant", "granted", "can", "may"):
    _DECISION_SYNONYMS[_word] = Decision.ALLOW
for _word in (
    "deny",
    "denied",
    "not allowed",
    "not permitted",
    "not authorized",
    "prohibit",
    "prohibited",
    "forbid",
    "forbidden",
    "must not",
    "may not",
    "cannot",
    "can not",
    "disallow",
    "disallowed",
    "refuse",
    "refused",
):
    _DECISION_SYNONYMS[_word] = Decision.DENY


def normalize_decision(raw: str) -> Decision:
    """Map a decision word or phrase onto the closed Allow/Deny enum."""
    if not raw or not raw.strip():
        raise UnknownDecision("empty decision value")
    key = re.sub(r"[\s_]+", " ", raw.strip().lower())
    try:
        return _DECISION_SYNONYMS[key]
    except KeyError:
        raise UnknownDecision(f"decision word {raw!r} is not in the synonym table") from None


def _tuple_from_payload(payload: dict, statement_index: int) -> DsarcpTuple:
    """Build a tuple from a raw extraction payload; raises MissingComponent
    listing everything absent or unusable."""
    missing: list[str] = []
    values: dict[str, str] = {}

    for key in REQUIRED_COMPONENTS:
        raw_value = payload.get(key)
        if raw_value is None or not str(raw_value).strip():
            missing.append(key)
            continue
        values[key] = str(raw_value)

    decision: Decision | None = None
    if "decision" in values:
        try:
            decision = normalize_decision(values["decision"])
        except UnknownDecision:
            missing.append("decision")

    slugged: dict[str, str] = {}
    for key in ("subject", "action", "resource"):
        if key not in values:
            continue
        try:
            slugged[key] = slugify(values[key])
        except EmptyValue:
            missing.append(key)

    if missing:
        raise MissingComponent(sorted(set(missing)))
    assert decision is not None

    raw_conditions = payload.get("condition") or payload.get("conditions") or []
    if isinstance(raw_conditions, str):
        raw_conditions = [raw_conditions]
    conditions: list[str] = []
    for item in raw_conditions:
        if item is None or not str(item).strip():
            continue
        slug = slugify(str(item))
        if slug not in conditions:
            conditions.append(slug)

    raw_purpose = payload.get("purpose")
    purpose = slugify(str(raw_purpose)) if raw_purpose is not None and str(raw_purpose).strip() else None

    return DsarcpTuple(
        decision=decision,
        subject=slugged["subject"],
        action=slugged["action"],
        resource=slugged["resource"],
        conditions=tuple(conditions),
        purpose=purpose,
        source_statement_index=statement_index,
    )


def extract_dsarcp(
    statement: PolicyStatement,
    provider: Provider,
    config: PipelineConfig,
    library: PromptLibrary | None = None,
    schema: Schema | None = None,
    transcripts: list | None = None,
) -> DsarcpTuple:
    """Extract the decision/subject/action/resource (+conditions, purpose)
    tuple for one statement, with a single structural-repair retry."""
    library = library or PromptLibrary(config.prompt_dir)
    schema_summary = f"Valid vocabulary for this organization: {schema.summary()}" if schema else ""

    def request_for(stage: PromptStage, **values: str) -> PromptRequest:
        system_text, user_text = library.render(stage.value, **values)
        return PromptRequest(
            stage=stage,
            system_text=system_text,
            user_text=user_text,
            temperature=config.temperature,
            max_output_tokens=config.max_output_tokens,
        )

    response, transcript = provider.complete(
        request_for(PromptStage.EXTRACT, input=statement.text, schema_summary=schema_summary)
    )
    if transcripts is not None:
        transcripts.append(transcript)

    first_error: Exception | None = None
    try:
        return _tuple_from_payload(extract_structured(response), statement.index)
    except (NoStructuredPayload, MalformedPayload, MissingComponent) as exc:
        first_error = exc

    if isinstance(first_error, MissingComponent):
        requirement = (
            f"a JSON object with non-empty keys {', '.join(REQUIRED_COMPONENTS)}"
            f" (missing: {', '.join(first_error.components)}); condition and purpose are optional"
        )
    else:
        requirement = f"a JSON object with non-empty keys {', '.join(REQUIRED_COMPONENTS)}"
    repaired, transcript = provider.complete(
        request_for(
            PromptStage.REPAIR,
            repair_kind="extract",
            requirements=requirement,
            current_code=response,
            lint_findings=str(first_error),
            input=statement.text,
        )
    )
    if transcripts is not None:
        transcripts.append(transcript)
    try:
        return _tuple_from_payload(extract_structured(repaired), statement.index)
    except MissingComponent:
        raise
    except (NoStructuredPayload, MalformedPayload) as exc:
        raise ExtractionUnparseable(
            f"no structured payload recovered for statement {statement.index}: {exc}"
        ) from exc


__all__ = ["REQUIRED_COMPONENTS", "normalize_decision", "extract_dsarcp"]
