"""Stage 4a: Rego module emission with deny-by-default semantics.

The deterministic template is the default backend and is byte-stable:
identical tuples produce identical source. Each encoded statement carries a
two-line audit header (original text plus a machine-readable annotation)
that :func:`parse_annotations` can invert exactly.

Annotation grammar (stable, documented):

    # dsarcp: decision=<Allow|Deny> subject=<slug> action=<slug>
      resource=<slug> condition=<a,b|-> purpose=<slug|-> statement=<index>

on one line, fields in that order. ``-`` marks an absent component.
"""

from __future__ import annotations

import re

from .errors import AnnotationMalformed, NoTuples, SynthesisRejected
from .model import (
    Annotation,
    CodegenBackend,
    Decision,
    DsarcpTuple,
    PipelineConfig,
    PolicyStatement,
    RegoArtifact,
    is_canonical_slug,
)
from .prompts import PromptLibrary
from .provider import PromptRequest, PromptStage, Provider

ANNOTATION_PREFIX = "# dsarcp:"

_ANNOTATION_RE = re.compile(
    r"^# dsarcp: decision=(Allow|Deny) subject=(\S+) action=(\S+)"
    r" resource=(\S+) condition=(\S+) purpose=(\S+) statement=(\d+)$"
)

_MAX_SLUG_LEN = 48


def default_module_slug(tuples: list[DsarcpTuple]) -> str:
    """Derive a stable module slug from the first tuple."""
    if not tuples:
        raise NoTuples("cannot derive a module slug without tuples")
    first = tuples[0]
    slug = f"{first.subject}_{first.action}_{first.resource}"
    if len(slug) > _MAX_SLUG_LEN:
        slug = slug[:_MAX_SLUG_LEN].rstrip("_")
    return slug


def format_annotation_line(tup: DsarcpTuple) -> str:
    condition = ",".join(tup.conditions) if tup.conditions else "-"
    purpose = tup.purpose if tup.purpose is not None else "-"
    return (
        f"{ANNOTATION_PREFIX} decision={tup.decision.value} subject={tup.subject}"
        f" action={tup.action} resource={tup.resource} condition={condition}"
        f" purpose={purpose} statement={tup.source_statement_index}"
    )


def parse_annotation_line(line: str) -> DsarcpTuple:
    m = _ANNOTATION_RE.match(line.strip())
    if not m:
        raise AnnotationMalformed(f"line does not match the annotation grammar: {line.strip()!r}")
    decision, subject, action, resource, condition, purpose, index = m.groups()
    conditions = tuple(condition.split(",")) if condition != "-" else ()
    for slug in (subject, action, resource, *conditions):
        if not is_canonical_slug(slug):
            raise AnnotationMalformed(f"{slug!r} is not a canonical slug in: {line.strip()!r}")
    if purpose != "-" and not is_canonical_slug(purpose):
        raise AnnotationMalformed(f"purpose {purpose!r} is not a canonical slug")
    try:
        return DsarcpTuple(
            decision=Decision(decision),
            subject=subject,
            action=action,
            resource=resource,
            conditions=conditions,
            purpose=None if purpose == "-" else purpose,
            source_statement_index=int(index),
        )
    except ValueError as exc:
        raise AnnotationMalformed(f"annotation violates tuple invariants: {exc}") from exc


def _comment_text(text: str) -> str:
    return " ".join(text.split())


def _rule_body_lines(tup: DsarcpTuple) -> list[str]:
    lines = [
        f'\tinput.subject == "{tup.subject}"',
        f'\tinput.action == "{tup.action}"',
        f'\tinput.resource == "{tup.resource}"',
    ]
    lines.extend(f"\tinput.context.{cond} == true" for cond in tup.conditions)
    if tup.purpose is not None:
        lines.append(f'\tinput.purpose == "{tup.purpose}"')
    return lines


def emit_module(
    tuples: list[DsarcpTuple],
    module_slug: str,
    statements: list[PolicyStatement],
) -> RegoArtifact:
    """Emit the deterministic deny-by-default module for a tuple list.

    Allow tuples become incremental ``permit`` rules and Deny tuples
    incremental ``denied`` rules (grouped by name to stay lint-clean), with
    the final decision ``allow if { permit; not denied }`` so that any
    matching deny defeats any matching allow.
    """
    if not tuples:
        raise NoTuples("emit_module requires at least one tuple")
    if not is_canonical_slug(module_slug):
        raise ValueError(f"{module_slug!r} is not a canonical module slug")
    text_by_index = {s.index: s.text for s in statements}
    for tup in tuples:
        if tup.source_statement_index not in text_by_index:
            raise ValueError(f"no statement with index {tup.source_statement_index}")

    allows = sorted(
        (t for t in tuples if t.decision is Decision.ALLOW), key=lambda t: t.source_statement_index
    )
    denies = sorted(
        (t for t in tuples if t.decision is Decision.DENY), key=lambda t: t.source_statement_index
    )

    lines: list[str] = [f"package policies.{module_slug}", ""]

    def rule_block(name: str, tup: DsarcpTuple) -> list[str]:
        return [
            f"# {_comment_text(text_by_index[tup.source_statement_index])}",
            format_annotation_line(tup),
            f"{name} if {{",
            *_rule_body_lines(tup),
            "}",
            "",
        ]

    for tup in allows:
        lines.extend(rule_block("permit", tup))
    if not allows:
        lines.extend(["default permit := false", ""])
    for tup in denies:
        lines.extend(rule_block("denied", tup))
    if not denies:
        lines.extend(["default denied := false", ""])

    lines.extend(
        [
            "default allow := false",
            "",
            "# METADATA",
            "# entrypoint: true",
            "allow if {",
            "\tpermit",
            "\tnot denied",
            "}",
        ]
    )
    source = "\n".join(lines) + "\n"

    annotations = tuple(
        Annotation(tuple=t, statement_text=text_by_index[t.source_statement_index])
        for t in sorted(tuples, key=lambda t: t.source_statement_index)
    )
    return RegoArtifact(
        package_name=f"policies.{module_slug}",
        source=source,
        annotations=annotations,
        backend=CodegenBackend.DETERMINISTIC_TEMPLATE,
        lint_iterations_used=0,
    )


def annotation_lines(source: str) -> list[str]:
    return [line for line in source.splitlines() if line.strip().startswith(ANNOTATION_PREFIX)]


def parse_annotations(source: str) -> list[DsarcpTuple]:
    """Recover the encoded tuples from a module following the annotation
    grammar. Every permit/denied rule must still carry its annotation
    header; tuples come back in statement order."""
    lines = source.splitlines()
    tuples: list[DsarcpTuple] = []
    for i, line in enumerate(lines):
        if re.match(r"^(permit|denied) if \{", line.strip()):
            if i == 0 or not lines[i - 1].strip().startswith(ANNOTATION_PREFIX):
                raise AnnotationMalformed(f"rule at line {i + 1} lacks its annotation header")
        if line.strip().startswith(ANNOTATION_PREFIX):
            tuples.append(parse_annotation_line(line))
    if not tuples:
        raise AnnotationMalformed("module contains no annotation lines")
    indices = [t.source_statement_index for t in tuples]
    if len(set(indices)) != len(indices):
        raise AnnotationMalformed("duplicate statement indices in annotations")
    return sorted(tuples, key=lambda t: t.source_statement_index)


# --- synthesis prompt plumbing ---


def render_synthesis_input(
    tuples: list[DsarcpTuple], module_slug: str, statements: list[PolicyStatement]
) -> str:
    """Prompt payload listing the module slug, statements, and annotation
    lines. Also the format the mock provider reconstructs tuples from."""
    text_by_index = {s.index: s.text for s in statements}
    lines = [f"module: {module_slug}"]
    for tup in sorted(tuples, key=lambda t: t.source_statement_index):
        idx = tup.source_statement_index
        lines.append(f"statement {idx}: {_comment_text(text_by_index.get(idx, ''))}")
        lines.append(format_annotation_line(tup))
    return "\n".join(lines)


def parse_synthesis_input(block: str) -> tuple[list[DsarcpTuple], str, list[PolicyStatement]] | None:
    """Inverse of :func:`render_synthesis_input`; None when the block does
    not carry a module slug and at least one annotation."""
    slug: str | None = None
    texts: dict[int, str] = {}
    tuples: list[DsarcpTuple] = []
    for line in block.splitlines():
        stripped = line.strip()
        if stripped.startswith("module:"):
            candidate = stripped.split(":", 1)[1].strip()
            if is_canonical_slug(candidate):
                slug = candidate
        elif stripped.startswith("statement "):
            m = re.match(r"^statement (\d+):\s*(.*)$", stripped)
            if m:
                texts[int(m.group(1))] = m.group(2).strip()
        elif stripped.startswith(ANNOTATION_PREFIX):
            try:
                tuples.append(parse_annotation_line(stripped))
            except AnnotationMalformed:
                return None
    if slug is None or not tuples:
        return None
    statements = [
        PolicyStatement(
            text=texts.get(t.source_statement_index) or f"statement {t.source_statement_index}",
            index=t.source_statement_index,
            origin_span=(0, 0),
        )
        for t in tuples
    ]
    return tuples, slug, statements


def strip_code_fences(raw: str) -> str:
    text = raw.strip()
    if not text.startswith("```"):
        return text
    newline = text.find("\n")
    if newline == -1:
        return text
    body = text[newline + 1 :]
    closing = body.rfind("```")
    if closing != -1:
        body = body[:closing]
    return body.strip()


def _normalize_source(raw: str) -> str:
    return strip_code_fences(raw).rstrip("\n") + "\n"


def check_synthesis_guardrails(source: str, tuples: list[DsarcpTuple]) -> list[str]:
    """Mechanical checks applied to synthesized modules before any
    toolchain validation. Returns violation messages (empty when clean)."""
    problems: list[str] = []
    if not re.search(r"^default allow := false$", source, re.M):
        problems.append("module must declare `default allow := false`")
    lines = annotation_lines(source)
    if len(lines) != len(tuples):
        problems.append(f"expected {len(tuples)} annotation lines, found {len(lines)}")
    else:
        try:
            parsed = {parse_annotation_line(line) for line in lines}
        except AnnotationMalformed as exc:
            problems.append(str(exc))
        else:
            if parsed != set(tuples):
                problems.append("annotation lines do not match the extracted tuples")
    return problems


def _prompt(
    library: PromptLibrary, config: PipelineConfig, stage: PromptStage, **values: str
) -> PromptRequest:
    system_text, user_text = library.render(stage.value, **values)
    return PromptRequest(
        stage=stage,
        system_text=system_text,
        user_text=user_text,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )


def llm_emit(
    tuples: list[DsarcpTuple],
    statements: list[PolicyStatement],
    provider: Provider,
    config: PipelineConfig,
    module_slug: str | None = None,
    library: PromptLibrary | None = None,
    transcripts: list | None = None,
) -> RegoArtifact:
    """Provider-backed module synthesis with mechanical guardrails and one
    repair retry."""
    if not tuples:
        raise NoTuples("llm_emit requires at least one tuple")
    slug = module_slug or default_module_slug(tuples)
    library = library or PromptLibrary(config.prompt_dir)
    payload = render_synthesis_input(tuples, slug, statements)

    response, transcript = provider.complete(_prompt(library, config, PromptStage.SYNTHESIZE, input=payload))
    if transcripts is not None:
        transcripts.append(transcript)
    source = _normalize_source(response)
    problems = check_synthesis_guardrails(source, tuples)

    if problems:
        repair = _prompt(
            library,
            config,
            PromptStage.REPAIR,
            repair_kind="synthesize",
            requirements="a complete Rego module with `default allow := false` and one dsarcp annotation line per statement",
            current_code=source,
            lint_findings="\n".join(problems),
            input=payload,
        )
        response, transcript = provider.complete(repair)
        if transcripts is not None:
            transcripts.append(transcript)
        source = _normalize_source(response)
        problems = check_synthesis_guardrails(source, tuples)
        if problems:
            raise SynthesisRejected("; ".join(problems))

    text_by_index = {s.index: s.text for s in statements}
    annotations = tuple(
        Annotation(tuple=t, statement_text=text_by_index.get(t.source_statement_index, ""))
        for t in sorted(tuples, key=lambda t: t.source_statement_index)
    )
    return RegoArtifact(
        package_name=f"policies.{slug}",
        source=source,
        annotations=annotations,
        backend=CodegenBackend.LLM_SYNTHESIS,
        lint_iterations_used=0,
    )


def apply_lint_feedback(
    artifact: RegoArtifact,
    findings: list,
    provider: Provider,
    config: PipelineConfig,
    library: PromptLibrary | None = None,
    transcripts: list | None = None,
) -> RegoArtifact:
    """One repair round against lint findings. Once the iteration budget is
    spent, falls back to the deterministic template (flagged by the backend
    flipping to DeterministicTemplate)."""
    tuples = [a.tuple for a in artifact.annotations]
    statements = [
        PolicyStatement(text=a.statement_text or f"statement {a.statement_index}", index=a.statement_index, origin_span=(0, 0))
        for a in artifact.annotations
    ]
    slug = artifact.module_slug

    if artifact.lint_iterations_used >= config.max_lint_iterations:
        fallback = emit_module(tuples, slug, statements)
        return RegoArtifact(
            package_name=fallback.package_name,
            source=fallback.source,
            annotations=fallback.annotations,
            backend=CodegenBackend.DETERMINISTIC_TEMPLATE,
            lint_iterations_used=artifact.lint_iterations_used,
        )

    library = library or PromptLibrary(config.prompt_dir)
    findings_text = "\n".join(_format_finding(f) for f in findings) or "no findings provided"
    repair = _prompt(
        library,
        config,
        PromptStage.REPAIR,
        repair_kind="lint",
        requirements="the same Rego module with every lint finding resolved, keeping `default allow := false` and all dsarcp annotation lines",
        current_code=artifact.source,
        lint_findings=findings_text,
        input=render_synthesis_input(tuples, slug, statements),
    )
    response, transcript = provider.complete(repair)
    if transcripts is not None:
        transcripts.append(transcript)
    source = _normalize_source(response)
    if check_synthesis_guardrails(source, tuples):
        # unusable repair: burn the iteration, keep the previous source
        source = artifact.source
    return RegoArtifact(
        package_name=artifact.package_name,
        source=source,
        annotations=artifact.annotations,
        backend=artifact.backend,
        lint_iterations_used=artifact.lint_iterations_used + 1,
    )


def _format_finding(finding) -> str:
    if hasattr(finding, "rule"):
        return f"{finding.rule} ({finding.severity}) {finding.message} at {finding.file}:{finding.row}"
    return str(finding)


__all__ = [
    "ANNOTATION_PREFIX",
    "default_module_slug",
    "format_annotation_line",
    "parse_annotation_line",
    "parse_annotations",
    "annotation_lines",
    "emit_module",
    "render_synthesis_input",
    "parse_synthesis_input",
    "strip_code_fences",
    "check_synthesis_guardrails",
    "llm_emit",
    "apply_lint_feedback",
]
