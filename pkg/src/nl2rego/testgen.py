"""Stage 4b: positive/negative unit test generation and rendering.

Rule-based suites are a deterministic function of the tuple list. The
rendered test file only exercises the module's ``allow`` result, never its
internals, so synthesized modules with different internal structure remain
testable.
"""

from __future__ import annotations

import json
from typing import Any

from .errors import (
    MalformedPayload,
    NoStructuredPayload,
    NoTuples,
    ProviderRefusal,
    ProviderUnavailable,
    ReservedSlugCollision,
)
from .model import (
    Decision,
    DsarcpTuple,
    PipelineConfig,
    PolicyStatement,
    TestCase,
    TestKind,
    TestMode,
    TestSuite,
    slugify,
)
from .codegen import default_module_slug, render_synthesis_input
from .prompts import PromptLibrary
from .provider import PromptRequest, PromptStage, Provider, extract_structured

# Subject slug used by negative-by-mutation cases. Deliberately unusual so
# it never collides with a real schema value.
RESERVED_NEGATIVE_SUBJECT = "unauthorized_subject_p2p"


def matching_input(tup: DsarcpTuple) -> dict[str, Any]:
    """Input document that exactly matches a tuple's rule body: all context
    flags true, purpose set when present."""
    doc: dict[str, Any] = {
        "subject": tup.subject,
        "action": tup.action,
        "resource": tup.resource,
    }
    if tup.conditions:
        doc["context"] = {cond: True for cond in tup.conditions}
    if tup.purpose is not None:
        doc["purpose"] = tup.purpose
    return doc


def shadowed_positive_names(tuples: list[DsarcpTuple]) -> frozenset[str]:
    """Positive cases whose Allow tuple is shadowed by a Deny tuple: same
    subject/action/resource, conditions a subset of the allow's, and a
    compatible purpose. Such positives fail by design (deny-overrides), not
    because the module is defective."""
    denies = [t for t in tuples if t.decision is Decision.DENY]
    shadowed = set()
    for tup in tuples:
        if tup.decision is not Decision.ALLOW:
            continue
        for deny in denies:
            if (
                deny.subject == tup.subject
                and deny.action == tup.action
                and deny.resource == tup.resource
                and set(deny.conditions) <= set(tup.conditions)
                and (deny.purpose is None or deny.purpose == tup.purpose)
            ):
                shadowed.add(f"test_statement_{tup.source_statement_index}_positive")
                break
    return frozenset(shadowed)


def rule_based_tests(tuples: list[DsarcpTuple], module_slug: str) -> TestSuite:
    """Deterministic suite: one positive and one mutated-subject negative
    per Allow tuple, one exact-match negative per Deny tuple, plus the
    global empty-input negative."""
    if not tuples:
        raise NoTuples("test generation requires at least one tuple")
    for tup in tuples:
        if tup.subject == RESERVED_NEGATIVE_SUBJECT:
            raise ReservedSlugCollision(
                f"tuple subject collides with reserved slug {RESERVED_NEGATIVE_SUBJECT!r}"
            )

    cases: list[TestCase] = []
    for tup in tuples:
        idx = tup.source_statement_index
        if tup.decision is Decision.ALLOW:
            cases.append(
                TestCase(
                    name=f"test_statement_{idx}_positive",
                    kind=TestKind.POSITIVE,
                    statement_index=idx,
                    input_document=matching_input(tup),
                    expected_allow=True,
                )
            )
            mutated = matching_input(tup)
            mutated["subject"] = RESERVED_NEGATIVE_SUBJECT
            cases.append(
                TestCase(
                    name=f"test_statement_{idx}_neg_subject",
                    kind=TestKind.NEGATIVE,
                    statement_index=idx,
                    input_document=mutated,
                    expected_allow=False,
                )
            )
        else:
            cases.append(
                TestCase(
                    name=f"test_statement_{idx}_neg_denied",
                    kind=TestKind.NEGATIVE,
                    statement_index=idx,
                    input_document=matching_input(tup),
                    expected_allow=False,
                )
            )
    cases.append(
        TestCase(
            name="test_empty_input_denied",
            kind=TestKind.NEGATIVE,
            statement_index=-1,
            input_document={},
            expected_allow=False,
        )
    )
    return TestSuite(module_slug=module_slug, cases=tuple(cases), mode=TestMode.RULE_BASED)


def _coerce_expected(value: Any) -> bool | None:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("true", "yes", "allow", "allowed", "1"):
            return True
        if lowered in ("false", "no", "deny", "denied", "0"):
            return False
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    return None


def _sanitize_name(raw: Any, used: set[str], fallback: str) -> str:
    try:
        name = slugify(str(raw)) if raw is not None and str(raw).strip() else fallback
    except Exception:
        name = fallback
    if not name.startswith("test_"):
        name = f"test_{name}"
    base = name
    counter = 2
    while name in used:
        name = f"{base}_{counter}"
        counter += 1
    used.add(name)
    return name


def llm_tests(
    tuples: list[DsarcpTuple],
    statements: list[PolicyStatement],
    provider: Provider,
    config: PipelineConfig,
    module_slug: str | None = None,
    library: PromptLibrary | None = None,
    transcripts: list | None = None,
) -> TestSuite:
    """Provider-proposed suite. Sanitizes names and expectations; falls back
    to the rule-based suite (flagged) when the proposal lacks a positive or
    a negative case or cannot be parsed."""
    if not tuples:
        raise NoTuples("test generation requires at least one tuple")
    slug = module_slug or default_module_slug(tuples)
    library = library or PromptLibrary(config.prompt_dir)

    def fallback() -> TestSuite:
        suite = rule_based_tests(tuples, slug)
        return TestSuite(
            module_slug=suite.module_slug,
            cases=suite.cases,
            mode=TestMode.RULE_BASED,
            fallback_from_llm=True,
        )

    payload = render_synthesis_input(tuples, slug, statements)
    system_text, user_text = library.render(PromptStage.TESTGEN.value, input=payload)
    request = PromptRequest(
        stage=PromptStage.TESTGEN,
        system_text=system_text,
        user_text=user_text,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )
    try:
        response, transcript = provider.complete(request)
        if transcripts is not None:
            transcripts.append(transcript)
        proposed = extract_structured(response).get("cases")
    except (ProviderUnavailable, ProviderRefusal, NoStructuredPayload, MalformedPayload):
        return fallback()
    if not isinstance(proposed, list):
        return fallback()

    used_names: set[str] = set()
    cases: list[TestCase] = []
    for i, item in enumerate(proposed):
        if not isinstance(item, dict) or not isinstance(item.get("input"), dict):
            continue
        expected = _coerce_expected(item.get("expected_allow"))
        if expected is None:
            continue
        try:
            index = int(item.get("statement_index", -1))
        except (TypeError, ValueError):
            index = -1
        name = _sanitize_name(item.get("name"), used_names, fallback=f"test_case_{i}")
        try:
            cases.append(
                TestCase(
                    name=name,
                    kind=TestKind.POSITIVE if expected else TestKind.NEGATIVE,
                    statement_index=index,
                    input_document=_plain_json(item["input"]),
                    expected_allow=expected,
                )
            )
        except ValueError:
            continue

    kinds = {c.kind for c in cases}
    if TestKind.POSITIVE not in kinds or TestKind.NEGATIVE not in kinds:
        return fallback()
    return TestSuite(module_slug=slug, cases=tuple(cases), mode=TestMode.LLM_BASED)


def _plain_json(value: Any) -> Any:
    """Restrict provider-proposed inputs to plain JSON values."""
    return json.loads(json.dumps(value))


# --- rendering ---

_PREFERRED_KEY_ORDER = ("subject", "action", "resource", "context", "purpose")


def _ordered_keys(doc: dict[str, Any]) -> list[str]:
    known = [k for k in _PREFERRED_KEY_ORDER if k in doc]
    extras = sorted(k for k in doc if k not in _PREFERRED_KEY_ORDER)
    return known + extras


def _rego_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    return json.dumps(value, ensure_ascii=False)


def _render_inline(value: Any) -> str:
    if isinstance(value, dict):
        items = ", ".join(f"{json.dumps(k)}: {_render_inline(v)}" for k, v in sorted(value.items()))
        return "{" + items + "}"
    if isinstance(value, list):
        return "[" + ", ".join(_render_inline(v) for v in value) + "]"
    return _rego_scalar(value)


def _render_input_document(doc: dict[str, Any]) -> list[str]:
    """Multi-line object literal in opa-fmt style (tab indent, trailing
    commas); empty documents stay inline."""
    if not doc:
        return ["{}"]
    lines = ["{"]
    for key in _ordered_keys(doc):
        lines.append(f"\t\t{json.dumps(key)}: {_render_inline(doc[key])},")
    lines.append("\t}")
    return lines


def render_test_file(suite: TestSuite, module_slug: str | None = None) -> str:
    """Deterministic Rego test module for a suite. Positive cases assert
    the allow result; negative cases assert it is not true."""
    if not suite.cases:
        raise ValueError("cannot render an empty test suite")
    slug = module_slug or suite.module_slug
    lines = [
        f"package policies.{slug}_test",
        "",
        f"import data.policies.{slug}",
        "",
    ]
    for case in suite.cases:
        prefix = "" if case.expected_allow else "not "
        doc_lines = _render_input_document(case.input_document)
        lines.append(f"{case.name} if {{")
        lines.append(f"\t{prefix}{slug}.allow with input as {doc_lines[0]}")
        lines.extend(doc_lines[1:])
        lines.append("}")
        lines.append("")
    return "\n".join(lines[:-1]) + "\n"


__all__ = [
    "RESERVED_NEGATIVE_SUBJECT",
    "matching_input",
    "shadowed_positive_names",
    "rule_based_tests",
    "llm_tests",
    "render_test_file",
]
