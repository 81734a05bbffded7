"""Schema loading and tuple validation."""

from __future__ import annotations

import json

import pytest

from nl2rego.errors import SchemaMalformed, SchemaUnreadable
from nl2rego.model import Decision, DsarcpTuple, PipelineConfig
from nl2rego.orchestrator import bundled_schemas
from nl2rego.schemaval import levenshtein, load_schema, nearest_candidates, schema_from_dict, validate

from conftest import random_tuple_set


def _tuple(subject="nurses", action="read", resource="prescriptions", conditions=(), purpose=None):
    return DsarcpTuple(Decision.ALLOW, subject, action, resource, tuple(conditions), purpose, 0)


class TestLoadSchema:
    def test_bundled_healthcare(self, tmp_path):
        schema = bundled_schemas()["healthcare"]
        assert "nurse" in schema.subjects
        assert "doctor" in schema.subjects
        assert len(schema.subjects) >= 2

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"name": "s", "subjects": ["nurse", "doctor"], "actions": ["read"], "resources": ["chart"]}))
        schema = load_schema(str(path))
        assert schema.subjects == frozenset({"nurse", "doctor"})

    def test_missing_actions_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "s", "subjects": ["a"], "resources": ["r"]}))
        with pytest.raises(SchemaMalformed):
            load_schema(str(path))

    def test_case_variants_deduplicate(self, tmp_path):
        path = tmp_path / "dup.json"
        path.write_text(json.dumps({"name": "s", "subjects": ["nurse", "Nurse"], "actions": ["read"], "resources": ["r"]}))
        schema = load_schema(str(path))
        assert schema.subjects == frozenset({"nurse"})

    def test_unreadable_path(self):
        with pytest.raises(SchemaUnreadable):
            load_schema("/nonexistent/schema.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "garbage.json"
        path.write_text("{not json")
        with pytest.raises(SchemaMalformed):
            load_schema(str(path))

    def test_empty_required_set(self):
        with pytest.raises(SchemaMalformed):
            schema_from_dict({"name": "s", "subjects": [], "actions": ["a"], "resources": ["r"]})

    def test_values_slugified_on_load(self):
        schema = schema_from_dict(
            {"name": "s", "subjects": ["Lab Technician"], "actions": ["Read"], "resources": ["Patient Record"]}
        )
        assert "lab_technician" in schema.subjects
        assert "patient_record" in schema.resources


class TestValidate:
    def test_plural_fold_valid(self, healthcare, config):
        report = validate(_tuple(), healthcare, config)
        assert report.verdict == "Valid"
        assert report.findings == ()

    def test_unknown_subject_invalid_with_candidates(self, healthcare, config):
        report = validate(_tuple(subject="surgeon", resource="prescription"), healthcare, config)
        assert report.verdict == "Invalid"
        finding = report.findings[0]
        assert finding.component == "subject"
        assert finding.value == "surgeon"
        assert 1 <= len(finding.candidates) <= 3

    def test_skipped_when_disabled(self, healthcare):
        config = PipelineConfig(schema_validation_enabled=False)
        report = validate(_tuple(subject="anything_at_all"), healthcare, config)
        assert report.verdict == "Skipped"
        assert report.findings == ()

    def test_all_failing_components_reported(self, healthcare, config):
        report = validate(_tuple(subject="zz", action="qq", resource="ww"), healthcare, config)
        assert {f.component for f in report.findings} == {"subject", "action", "resource"}

    def test_conditions_checked_when_declared(self, healthcare, config):
        report = validate(_tuple(conditions=("made_up_condition",)), healthcare, config)
        assert report.verdict == "Invalid"
        assert report.findings[0].component == "condition"

    def test_conditions_unconstrained_when_schema_omits_them(self, config):
        schema = schema_from_dict({"name": "s", "subjects": ["nurses"], "actions": ["read"], "resources": ["prescriptions"]})
        report = validate(_tuple(conditions=("anything",), purpose="whatever"), schema, config)
        assert report.verdict == "Valid"

    def test_purpose_checked_when_declared(self, healthcare, config):
        report = validate(_tuple(purpose="for_world_domination"), healthcare, config)
        assert report.verdict == "Invalid"
        assert report.findings[0].component == "purpose"

    def test_tuple_not_mutated(self, healthcare, config):
        tup = _tuple(subject="surgeon")
        validate(tup, healthcare, config)
        assert tup.subject == "surgeon"

    def test_plural_fold_off_is_exact_membership(self, healthcare):
        config = PipelineConfig(plural_fold=False)
        assert validate(_tuple(subject="nurse", resource="prescription"), healthcare, config).verdict == "Valid"
        assert validate(_tuple(subject="nurses", resource="prescription"), healthcare, config).verdict == "Invalid"

    def test_fold_strips_exactly_one_s(self, config):
        schema = schema_from_dict({"name": "s", "subjects": ["glas"], "actions": ["read"], "resources": ["r"]})
        # "glass" folds to "glas"; "glasss" does not reach it
        assert validate(_tuple(subject="glass", resource="r"), schema, config).verdict == "Valid"
        assert validate(_tuple(subject="glasss", resource="r"), schema, config).verdict == "Invalid"

    def test_fold_off_equals_brute_force_membership(self, healthcare):
        import random

        config = PipelineConfig(plural_fold=False)
        rng = random.Random(11)
        pools = {
            "subject": healthcare.subjects,
            "action": healthcare.actions,
            "resource": healthcare.resources,
        }
        for _ in range(100):
            from conftest import random_slug

            tup = _tuple(
                subject=rng.choice([rng.choice(sorted(healthcare.subjects)), random_slug(rng)]),
                action=rng.choice([rng.choice(sorted(healthcare.actions)), random_slug(rng)]),
                resource=rng.choice([rng.choice(sorted(healthcare.resources)), random_slug(rng)]),
            )
            expected = (
                tup.subject in pools["subject"]
                and tup.action in pools["action"]
                and tup.resource in pools["resource"]
            )
            assert (validate(tup, healthcare, config).verdict == "Valid") == expected

    def test_at_least_two_bundled_schemas(self):
        assert len(bundled_schemas()) >= 2

    def test_monotone_in_schema(self, healthcare, config):
        import random

        rng = random.Random(7)
        grown = schema_from_dict(
            {
                "name": "grown",
                "subjects": sorted(healthcare.subjects) + ["extra_subject"],
                "actions": sorted(healthcare.actions) + ["extra_action"],
                "resources": sorted(healthcare.resources) + ["extra_resource"],
                "conditions": sorted(healthcare.conditions) + ["extra_condition"],
                "purposes": sorted(healthcare.purposes) + ["extra_purpose"],
            }
        )
        for _ in range(50):
            tuples, _stmts = random_tuple_set(rng)
            for tup in tuples:
                if validate(tup, healthcare, config).verdict == "Valid":
                    assert validate(tup, grown, config).verdict == "Valid"


class TestNearestCandidates:
    def test_levenshtein_basics(self):
        assert levenshtein("", "abc") == 3
        assert levenshtein("abc", "abc") == 0
        assert levenshtein("kitten", "sitting") == 3

    def test_candidates_ranked_by_distance_then_lexicographic(self):
        pool = frozenset({"nurse", "doctor", "curse", "purse"})
        ranked = nearest_candidates("nurse", pool)
        assert ranked[0] == "nurse" if "nurse" in pool else True
        ranked = nearest_candidates("nursf", pool)
        assert ranked[0] == "nurse"
        # curse and purse are both distance 2 from "nursf"; lexicographic tie-break
        assert list(ranked[1:]) == sorted(ranked[1:])

    def test_limit_three(self):
        pool = frozenset({"a", "b", "c", "d", "e"})
        assert len(nearest_candidates("x", pool)) == 3
