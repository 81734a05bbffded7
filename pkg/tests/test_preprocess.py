"""Detection, co-reference resolution, and segmentation."""

from __future__ import annotations

import pytest

from nl2rego.errors import EmptyInput
from nl2rego.heuristics import looks_like_policy
from nl2rego.preprocess import DetectionResult, detect, segment_and_resolve
from nl2rego.provider import MockProvider

from conftest import NURSE_STATEMENTS, NURSE_TEXT


class TestDetect:
    def test_nurse_sentence_two_statements(self, mock_provider, config, library):
        result = detect(NURSE_TEXT, mock_provider, config, library)
        assert result.is_policy is True
        assert result.estimated_statement_count == 2

    def test_empty_input(self, mock_provider, config, library):
        with pytest.raises(EmptyInput):
            detect("   ", mock_provider, config, library)

    def test_weather_is_not_policy(self, mock_provider, config, library):
        result = detect("The weather is nice today", mock_provider, config, library)
        assert result.is_policy is False
        assert result.estimated_statement_count is None
        assert result.rationale

    def test_transcript_appended(self, mock_provider, config, library):
        transcripts = []
        detect(NURSE_TEXT, mock_provider, config, library, transcripts)
        assert len(transcripts) == 1

    def test_provider_failure_falls_back_to_heuristic(self, config, library):
        class DeadProvider(MockProvider):
            def complete(self, request):
                from nl2rego.errors import ProviderUnavailable

                raise ProviderUnavailable("down")

        result = detect(NURSE_TEXT, DeadProvider(load_bundled=False), config, library)
        assert result.is_policy is True

    def test_result_invariants(self):
        with pytest.raises(ValueError):
            DetectionResult(is_policy=True, rationale="r", estimated_statement_count=None)
        with pytest.raises(ValueError):
            DetectionResult(is_policy=False, rationale="")


class TestHeuristicCues:
    def test_cue_with_context_is_policy(self):
        assert looks_like_policy("Nurses are allowed to read prescriptions")[0]

    def test_no_cue(self):
        assert not looks_like_policy("The weather is nice today")[0]

    def test_cue_without_subject_context(self):
        assert not looks_like_policy("allowed to read")[0]


class TestSegmentation:
    def test_nurse_coreference_resolution(self, mock_provider, config, library):
        statements = segment_and_resolve(NURSE_TEXT, mock_provider, config, library)
        assert [s.text for s in statements] == NURSE_STATEMENTS
        assert [s.index for s in statements] == [0, 1]

    def test_identity_segmentation(self, mock_provider, config, library):
        text = "Administrators can access the database"
        statements = segment_and_resolve(text, mock_provider, config, library)
        assert len(statements) == 1
        assert statements[0].text == text
        start, end = statements[0].origin_span
        assert text[start:end].strip(".") == text

    def test_semicolon_joined_statements_recover_spans(self, mock_provider, config, library):
        parts = [
            "Doctors can view lab results",
            "Nurses cannot delete appointments",
            "Auditors may access the database",
        ]
        raw = "; ".join(parts)
        statements = segment_and_resolve(raw, mock_provider, config, library)
        assert len(statements) == 3
        for part, statement in zip(parts, statements):
            assert statement.text == part
            start, end = statement.origin_span
            assert raw[start:end] == part

    def test_spans_ordered_and_non_overlapping(self, mock_provider, config, library):
        statements = segment_and_resolve(NURSE_TEXT, mock_provider, config, library)
        spans = [s.origin_span for s in statements]
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2
        for start, end in spans:
            assert 0 <= start <= end <= len(NURSE_TEXT)

    def test_every_output_statement_passes_detect(self, mock_provider, config, library):
        for text in (NURSE_TEXT, "Doctors can view records; Nurses cannot delete appointments"):
            for statement in segment_and_resolve(text, mock_provider, config, library):
                verdict = detect(statement.text, mock_provider, config, library)
                assert verdict.is_policy, statement.text

    def test_single_cue_no_conjunction_yields_one_statement(self, mock_provider, config, library):
        text = "Pharmacists may read treatment plans"
        statements = segment_and_resolve(text, mock_provider, config, library)
        assert len(statements) == 1

    def test_every_corpus_line_segments_to_one_statement(self, mock_provider, config, library):
        from nl2rego.orchestrator import bundled_corpus_lines

        for line in bundled_corpus_lines():
            statements = segment_and_resolve(line, mock_provider, config, library)
            assert len(statements) == 1, line
