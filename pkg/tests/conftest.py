"""Shared fixtures: configs, schemas, providers, and record helpers."""

from __future__ import annotations

import random

import pytest

from nl2rego.model import Decision, DsarcpTuple, PipelineConfig, PolicyStatement
from nl2rego.orchestrator import bundled_schemas
from nl2rego.prompts import PromptLibrary
from nl2rego.provider import MockProvider

NURSE_TEXT = "Nurses are allowed to read prescriptions, but they are not allowed to change them"
NURSE_STATEMENTS = [
    "Nurses are allowed to read prescriptions",
    "Nurses are not allowed to change prescriptions",
]
NURSE_TUPLES = [
    DsarcpTuple(Decision.ALLOW, "nurses", "read", "prescriptions", (), None, 0),
    DsarcpTuple(Decision.DENY, "nurses", "change", "prescriptions", (), None, 1),
]


@pytest.fixture
def config() -> PipelineConfig:
    return PipelineConfig()

@pytest.fixture
def offline_config() -> PipelineConfig:
    return PipelineConfig(rego_validation_enabled=False)


@pytest.fixture
def healthcare():
    return bundled_schemas()["healthcare"]


@pytest.fixture
def mock_provider() -> MockProvider:
    return MockProvider()


@pytest.fixture
def library() -> PromptLibrary:
    return PromptLibrary()


def nurse_statement_objs() -> list[PolicyStatement]:
    return [
        PolicyStatement(text=NURSE_STATEMENTS[0], index=0, origin_span=(0, 41)),
        PolicyStatement(text=NURSE_STATEMENTS[1], index=1, origin_span=(47, 82)),
    ]


def normalized_record_dict(record) -> dict:
    """Record dict with run ids, timestamps, durations, latencies, and raw
    tool output stripped, for purity comparisons."""
    data = record.to_dict()
    data.pop("run_id", None)
    data.pop("started_at", None)
    data.pop("finished_at", None)
    data.pop("parent_run_id", None)
    for entry in data["stage_entries"]:
        entry.pop("duration_ms", None)
        for transcript in entry["transcripts"]:
            transcript.pop("latency_ms", None)
        _strip_timing(entry.get("output_snapshot"))
    return data


def _strip_timing(value) -> None:
    if isinstance(value, dict):
        value.pop("duration_ms", None)
        value.pop("raw_output", None)
        for child in value.values():
            _strip_timing(child)
    elif isinstance(value, list):
        for child in value:
            _strip_timing(child)


# --- random tuple-set generation for property and acceptance tests ---

_WORDS = (
    "ana", "bor", "cal", "dun", "eri", "fal", "gor", "hol", "ira", "jun",
    "kel", "lom", "mir", "nor", "ost", "pel", "qua", "rim", "sol", "tor",
)


def random_slug(rng: random.Random, max_parts: int = 2) -> str:
    return "_".join(rng.choice(_WORDS) for _ in range(rng.randint(1, max_parts)))


def random_tuple_set(rng: random.Random, short_slugs: bool = False) -> tuple[list[DsarcpTuple], list[PolicyStatement]]:
    """A schema-valid tuple set with dense statement indices. Slug pools are
    small so subject/action/resource collisions (and hence shadowed allows)
    occur naturally; ``short_slugs`` keeps emitted annotation lines within
    the linter's line-length budget."""
    parts = 1 if short_slugs else 2
    subjects = [random_slug(rng, parts) for _ in range(3)]
    actions = [random_slug(rng, parts) for _ in range(3)]
    resources = [random_slug(rng, parts) for _ in range(3)]
    conditions = [random_slug(rng, 1) for _ in range(3)]
    purposes = [random_slug(rng, 1) for _ in range(2)]

    n = rng.randint(1, 5)
    tuples: list[DsarcpTuple] = []
    statements: list[PolicyStatement] = []
    for i in range(n):
        decision = rng.choice((Decision.ALLOW, Decision.DENY))
        conds = tuple(dict.fromkeys(rng.sample(conditions, rng.randint(0, 2))))
        purpose = rng.choice(purposes) if rng.random() < 0.4 else None
        tup = DsarcpTuple(
            decision=decision,
            subject=rng.choice(subjects),
            action=rng.choice(actions),
            resource=rng.choice(resources),
            conditions=conds,
            purpose=purpose,
            source_statement_index=i,
        )
        tuples.append(tup)
        verb = "may" if decision is Decision.ALLOW else "must not"
        text = f"{tup.subject} {verb} {tup.action} {tup.resource}"
        statements.append(PolicyStatement(text=text, index=i, origin_span=(0, len(text))))
    # force an exact shadow now and then so the labeling path is exercised
    if n >= 2 and rng.random() < 0.3:
        allows = [t for t in tuples if t.decision is Decision.ALLOW]
        if allows:
            src = rng.choice(allows)
            victim = rng.randrange(n)
            if tuples[victim] is not src:
                tuples[victim] = DsarcpTuple(
                    decision=Decision.DENY,
                    subject=src.subject,
                    action=src.action,
                    resource=src.resource,
                    conditions=(),
                    purpose=None,
                    source_statement_index=victim,
                )
    return tuples, statements
