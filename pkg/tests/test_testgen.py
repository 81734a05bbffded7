"""Test-suite generation and rendering."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from nl2rego.errors import NoTuples, ReservedSlugCollision
from nl2rego.model import Decision, DsarcpTuple, TestKind, TestMode
from nl2rego.testgen import (
    RESERVED_NEGATIVE_SUBJECT,
    llm_tests,
    matching_input,
    render_test_file,
    rule_based_tests,
    shadowed_positive_names,
)
from nl2rego.orchestrator import bundled_schemas

from conftest import NURSE_TUPLES, nurse_statement_objs

GOLDEN = Path(__file__).parent / "golden"


class TestRuleBasedSuite:
    def test_nurse_suite_has_exactly_four_cases(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        assert [c.name for c in suite.cases] == [
            "test_statement_0_positive",
            "test_statement_0_neg_subject",
            "test_statement_1_neg_denied",
            "test_empty_input_denied",
        ]
        assert suite.mode is TestMode.RULE_BASED

    def test_positive_input_matches_tuple_exactly(self):
        tup = DsarcpTuple(Decision.ALLOW, "ops", "tune", "db", ("at_night",), "for_speed", 0)
        suite = rule_based_tests([tup], "ops_tune_db")
        positive = suite.cases[0]
        assert positive.input_document == {
            "subject": "ops",
            "action": "tune",
            "resource": "db",
            "context": {"at_night": True},
            "purpose": "for_speed",
        }
        assert positive.expected_allow is True

    def test_negative_subject_mutation_only(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        neg = next(c for c in suite.cases if c.name.endswith("neg_subject"))
        assert neg.input_document["subject"] == RESERVED_NEGATIVE_SUBJECT
        assert neg.input_document["action"] == "read"
        assert neg.input_document["resource"] == "prescriptions"
        assert neg.expected_allow is False

    def test_deny_tuple_gets_exact_match_negative(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        neg = next(c for c in suite.cases if c.name.endswith("neg_denied"))
        assert neg.input_document == matching_input(NURSE_TUPLES[1])

    def test_empty_input_case_present(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        empty = suite.cases[-1]
        assert empty.name == "test_empty_input_denied"
        assert empty.input_document == {}

    def test_reserved_slug_collision(self):
        tup = DsarcpTuple(Decision.ALLOW, RESERVED_NEGATIVE_SUBJECT, "read", "files", (), None, 0)
        with pytest.raises(ReservedSlugCollision):
            rule_based_tests([tup], "m")

    def test_empty_tuples(self):
        with pytest.raises(NoTuples):
            rule_based_tests([], "m")

    def test_reserved_slug_not_in_any_bundled_schema(self):
        for schema in bundled_schemas().values():
            for pool in (schema.subjects, schema.actions, schema.resources,
                         schema.conditions or (), schema.purposes or ()):
                assert RESERVED_NEGATIVE_SUBJECT not in pool


class TestShadowDetection:
    def test_exact_shadow_detected(self):
        allow = DsarcpTuple(Decision.ALLOW, "s", "a", "r", (), None, 0)
        deny = DsarcpTuple(Decision.DENY, "s", "a", "r", (), None, 1)
        assert shadowed_positive_names([allow, deny]) == frozenset({"test_statement_0_positive"})

    def test_deny_with_extra_condition_does_not_shadow(self):
        allow = DsarcpTuple(Decision.ALLOW, "s", "a", "r", (), None, 0)
        deny = DsarcpTuple(Decision.DENY, "s", "a", "r", ("only_sometimes",), None, 1)
        assert shadowed_positive_names([allow, deny]) == frozenset()

    def test_deny_with_subset_conditions_shadows(self):
        allow = DsarcpTuple(Decision.ALLOW, "s", "a", "r", ("c1", "c2"), None, 0)
        deny = DsarcpTuple(Decision.DENY, "s", "a", "r", ("c1",), None, 1)
        assert shadowed_positive_names([allow, deny]) == frozenset({"test_statement_0_positive"})

    def test_purpose_specific_deny_only_shadows_matching_purpose(self):
        allow = DsarcpTuple(Decision.ALLOW, "s", "a", "r", (), "for_x", 0)
        deny_other = DsarcpTuple(Decision.DENY, "s", "a", "r", (), "for_y", 1)
        assert shadowed_positive_names([allow, deny_other]) == frozenset()
        deny_same = DsarcpTuple(Decision.DENY, "s", "a", "r", (), "for_x", 1)
        assert shadowed_positive_names([allow, deny_same]) == frozenset({"test_statement_0_positive"})

    def test_different_resource_never_shadows(self):
        allow = DsarcpTuple(Decision.ALLOW, "s", "a", "r1", (), None, 0)
        deny = DsarcpTuple(Decision.DENY, "s", "a", "r2", (), None, 1)
        assert shadowed_positive_names([allow, deny]) == frozenset()


class TestRenderTestFile:
    def test_nurse_file_matches_golden(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        assert render_test_file(suite) == (GOLDEN / "nurse_policy_test.rego").read_text()

    def test_deterministic(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        assert render_test_file(suite) == render_test_file(suite)

    def test_negative_cases_assert_not_allow(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        text = render_test_file(suite)
        assert "\tnot nurse_policy.allow with input as {}" in text

    def test_empty_suite_rejected(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        empty = type(suite)(module_slug="m", cases=(), mode=TestMode.RULE_BASED)
        with pytest.raises(ValueError):
            render_test_file(empty)

    def test_imports_policy_package(self):
        suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        text = render_test_file(suite)
        assert text.startswith("package policies.nurse_policy_test\n\nimport data.policies.nurse_policy\n")


class TestLlmSuite:
    def test_mock_llm_suite_superset_of_rule_based(self, mock_provider, config, library):
        rule_suite = rule_based_tests(NURSE_TUPLES, "nurse_policy")
        llm_suite = llm_tests(NURSE_TUPLES, nurse_statement_objs(), mock_provider, config,
                              module_slug="nurse_policy", library=library)
        assert llm_suite.mode is TestMode.LLM_BASED
        rule_names = {c.name for c in rule_suite.cases}
        llm_names = {c.name for c in llm_suite.cases}
        assert rule_names <= llm_names

    def test_positive_only_proposal_falls_back(self, config, library):
        from test_extract import _ScriptedProvider

        proposal = json.dumps(
            {"cases": [{"name": "test_only_positive", "input": {"subject": "nurses"}, "expected_allow": True}]}
        )
        provider = _ScriptedProvider([proposal])
        suite = llm_tests(NURSE_TUPLES, nurse_statement_objs(), provider, config,
                          module_slug="nurse_policy", library=library)
        assert suite.mode is TestMode.RULE_BASED
        assert suite.fallback_from_llm is True

    def test_unparseable_proposal_falls_back(self, config, library):
        from test_extract import _ScriptedProvider

        provider = _ScriptedProvider(["not structured at all"])
        suite = llm_tests(NURSE_TUPLES, nurse_statement_objs(), provider, config,
                          module_slug="nurse_policy", library=library)
        assert suite.fallback_from_llm is True

    def test_duplicate_names_deduplicated(self, config, library):
        from test_extract import _ScriptedProvider

        proposal = json.dumps(
            {
                "cases": [
                    {"name": "test_dup", "input": {"a": 1}, "expected_allow": True},
                    {"name": "test_dup", "input": {"a": 2}, "expected_allow": False},
                ]
            }
        )
        provider = _ScriptedProvider([proposal])
        suite = llm_tests(NURSE_TUPLES, nurse_statement_objs(), provider, config,
                          module_slug="nurse_policy", library=library)
        names = [c.name for c in suite.cases]
        assert len(names) == len(set(names)) == 2

    def test_expected_allow_coercion(self, config, library):
        from test_extract import _ScriptedProvider

        proposal = json.dumps(
            {
                "cases": [
                    {"name": "test_a", "input": {}, "expected_allow": "true"},
                    {"name": "test_b", "input": {}, "expected_allow": "deny"},
                ]
            }
        )
        provider = _ScriptedProvider([proposal])
        suite = llm_tests(NURSE_TUPLES, nurse_statement_objs(), provider, config,
                          module_slug="nurse_policy", library=library)
        kinds = {c.name: c.kind for c in suite.cases}
        assert kinds["test_a"] is TestKind.POSITIVE
        assert kinds["test_b"] is TestKind.NEGATIVE
