"""Core model: slug normalization, type invariants, record round-trips."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from nl2rego.errors import EmptyValue, MalformedRecord
from nl2rego.model import (
    STAGE_ORDER,
    Decision,
    DsarcpTuple,
    PipelineConfig,
    PolicyStatement,
    RunRecord,
    Schema,
    StageEntry,
    Verdict,
    decode_run_record,
    encode_run_record,
    is_canonical_slug,
    slugify,
)
from nl2rego.model import TestCase as PolicyTestCase
from nl2rego.model import TestKind as PolicyTestKind
from nl2rego.model import TestMode as PolicyTestMode
from nl2rego.model import TestSuite as PolicyTestSuite


class TestSlugify:
    def test_collapses_spaces(self):
        assert slugify("Business Hours") == "business_hours"

    def test_trims(self):
        assert slugify("  nurses ") == "nurses"

    def test_empty_raises(self):
        with pytest.raises(EmptyValue):
            slugify("")

    def test_punctuation_only_raises(self):
        with pytest.raises(EmptyValue):
            slugify("!!! --- !!!")

    def test_leading_digit_prefixed(self):
        assert slugify("24x7 support") == "_24x7_support"

    def test_mixed_punctuation(self):
        assert slugify("For: Maintenance/Repair") == "for_maintenance_repair"

    @given(st.text(min_size=0, max_size=60))
    def test_idempotent(self, raw):
        try:
            once = slugify(raw)
        except EmptyValue:
            return
        assert slugify(once) == once
        assert is_canonical_slug(once)


class TestDsarcpTuple:
    def test_valid(self):
        tup = DsarcpTuple(Decision.ALLOW, "nurses", "read", "prescriptions")
        assert tup.conditions == ()
        assert tup.purpose is None

    def test_rejects_bad_slug(self):
        with pytest.raises(ValueError):
            DsarcpTuple(Decision.ALLOW, "Nurses", "read", "prescriptions")

    def test_rejects_duplicate_conditions(self):
        with pytest.raises(ValueError):
            DsarcpTuple(Decision.ALLOW, "a", "b", "c", ("x", "x"))

    def test_rejects_negative_index(self):
        with pytest.raises(ValueError):
            DsarcpTuple(Decision.ALLOW, "a", "b", "c", (), None, -1)

    def test_rejects_non_enum_decision(self):
        with pytest.raises(ValueError):
            DsarcpTuple("Allow", "a", "b", "c")  # type: ignore[arg-type]

    def test_round_trip_dict(self):
        tup = DsarcpTuple(Decision.DENY, "a", "b", "c", ("d",), "e", 3)
        assert DsarcpTuple.from_dict(tup.to_dict()) == tup


class TestPolicyStatement:
    def test_rejects_blank_text(self):
        with pytest.raises(ValueError):
            PolicyStatement(text="   ", index=0, origin_span=(0, 3))

    def test_rejects_inverted_span(self):
        with pytest.raises(ValueError):
            PolicyStatement(text="x", index=0, origin_span=(5, 2))


class TestSchemaType:
    def test_requires_nonempty_sets(self):
        with pytest.raises(ValueError):
            Schema(name="s", subjects=frozenset(), actions=frozenset({"a"}), resources=frozenset({"r"}))

    def test_optional_sets_default_none(self):
        schema = Schema(name="s", subjects=frozenset({"x"}), actions=frozenset({"a"}), resources=frozenset({"r"}))
        assert schema.conditions is None and schema.purposes is None


class TestTestCaseInvariants:
    def test_positive_must_expect_allow(self):
        with pytest.raises(ValueError):
            PolicyTestCase("test_x", PolicyTestKind.POSITIVE, 0, {}, expected_allow=False)

    def test_suite_rejects_duplicate_names(self):
        case = PolicyTestCase("test_x", PolicyTestKind.NEGATIVE, 0, {}, expected_allow=False)
        with pytest.raises(ValueError):
            PolicyTestSuite(module_slug="m", cases=(case, case), mode=PolicyTestMode.RULE_BASED)


def _minimal_record(entries=()) -> RunRecord:
    return RunRecord(
        run_id="abc123",
        raw_input="some text",
        stage_entries=tuple(entries),
        verdict=Verdict.COMPLETED,
        started_at="2026-01-01T00:00:00+00:00",
        finished_at="2026-01-01T00:00:01+00:00",
    )


class TestRunRecord:
    def test_minimal_round_trip(self):
        record = _minimal_record()
        assert decode_run_record(encode_run_record(record)) == record

    def test_encode_is_one_line(self):
        entry = StageEntry(stage="detect", input_snapshot={"text": "a\nb"}, output_snapshot=None)
        line = encode_run_record(_minimal_record([entry]))
        assert "\n" not in line

    def test_truncated_line_raises(self):
        line = encode_run_record(_minimal_record())
        with pytest.raises(MalformedRecord):
            decode_run_record(line[: len(line) // 2])

    def test_non_object_raises(self):
        with pytest.raises(MalformedRecord):
            decode_run_record("[1, 2, 3]")

    def test_stage_order_enforced(self):
        entries = [
            StageEntry(stage="segment", input_snapshot=None, output_snapshot=None),
        ]
        with pytest.raises(ValueError):
            _minimal_record(entries)


_json_scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-10_000, max_value=10_000),
    st.text(max_size=20),
)
_json_values = st.recursive(
    _json_scalars,
    lambda children: st.one_of(
        st.lists(children, max_size=3),
        st.dictionaries(st.text(min_size=1, max_size=8), children, max_size=3),
    ),
    max_leaves=8,
)


@st.composite
def _records(draw) -> RunRecord:
    n_stages = draw(st.integers(min_value=0, max_value=len(STAGE_ORDER)))
    entries = []
    for stage in STAGE_ORDER[:n_stages]:
        transcripts = draw(
            st.lists(
                st.fixed_dictionaries(
                    {
                        "provider_id": st.text(max_size=10),
                        "stage": st.just(stage),
                        "response_text": st.text(max_size=40),
                        "attempts": st.integers(min_value=1, max_value=3),
                    }
                ),
                max_size=2,
            )
        )
        entries.append(
            StageEntry(
                stage=stage,
                input_snapshot=draw(_json_values),
                output_snapshot=draw(_json_values),
                transcripts=tuple(transcripts),
                diagnostics=tuple(draw(st.lists(st.text(max_size=30), max_size=3))),
                duration_ms=draw(st.floats(min_value=0, max_value=1e6, allow_nan=False)),
            )
        )
    return RunRecord(
        run_id=draw(st.text(min_size=1, max_size=12, alphabet="abcdef0123456789")),
        raw_input=draw(st.text(max_size=80)),
        stage_entries=tuple(entries),
        verdict=draw(st.sampled_from(list(Verdict))),
        started_at=draw(st.text(max_size=30)),
        finished_at=draw(st.text(max_size=30)),
        parent_run_id=draw(st.one_of(st.none(), st.text(min_size=1, max_size=12))),
        edited_stage=draw(st.one_of(st.none(), st.sampled_from(list(STAGE_ORDER)))),
    )


@given(_records())
def test_run_record_round_trips_exactly(record):
    assert decode_run_record(encode_run_record(record)) == record


class TestPipelineConfig:
    def test_defaults(self):
        config = PipelineConfig()
        assert config.provider == "mock"
        assert config.max_lint_iterations == 3
        assert config.plural_fold is True

    def test_rejects_zero_lint_budget(self):
        with pytest.raises(ValueError):
            PipelineConfig(max_lint_iterations=0)

    def test_rejects_unknown_provider(self):
        with pytest.raises(ValueError):
            PipelineConfig(provider="carrier-pigeon")

    def test_with_overrides_round_trip(self):
        config = PipelineConfig().with_overrides({"test_mode": "llm", "codegen_backend": "llm"})
        assert config.test_mode is PolicyTestMode.LLM_BASED
        assert PipelineConfig.from_dict(config.to_dict()) == config

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig.from_dict({"no_such_option": 1})
