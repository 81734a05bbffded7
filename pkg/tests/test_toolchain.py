"""OPA/Regal wrappers: compile, lint, and test execution."""

from __future__ import annotations

import pytest

from nl2rego.codegen import emit_module
from nl2rego.errors import ToolUnavailable
from nl2rego.model import PipelineConfig, RegoArtifact
from nl2rego.testgen import render_test_file, rule_based_tests
from nl2rego.toolchain import ToolReport, compile_check, discover_opa, lint, lint_report, run_tests

from conftest import NURSE_TUPLES, nurse_statement_objs


@pytest.fixture
def nurse_artifact():
    return emit_module(NURSE_TUPLES, "nurse_policy", nurse_statement_objs())


@pytest.fixture
def nurse_test_file():
    return render_test_file(rule_based_tests(NURSE_TUPLES, "nurse_policy"))


def _artifact_with_source(base: RegoArtifact, source: str) -> RegoArtifact:
    return RegoArtifact(
        package_name=base.package_name,
        source=source,
        annotations=base.annotations,
        backend=base.backend,
        lint_iterations_used=base.lint_iterations_used,
    )


class TestCompileCheck:
    def test_template_output_compiles(self, nurse_artifact, config):
        report = compile_check(nurse_artifact, config)
        assert report.success
        assert report.exit_status == 0
        assert report.diagnostics == ()
        assert report.tool == "OpaCheck"
        assert report.tool_version

    def test_unbalanced_brace_fails_with_location(self, nurse_artifact, config):
        broken = _artifact_with_source(nurse_artifact, nurse_artifact.source.replace("allow if {\n\tpermit", "allow if {\n\tpermit {"))
        report = compile_check(broken, config)
        assert not report.success
        assert report.diagnostics
        assert any(".rego:" in diag for diag in report.diagnostics)

    def test_missing_binary_is_tool_unavailable(self, nurse_artifact, monkeypatch):
        monkeypatch.delenv("NL2REGO_OPA", raising=False)
        config = PipelineConfig(opa_path="/nonexistent/opa-binary")
        with pytest.raises(ToolUnavailable):
            compile_check(nurse_artifact, config)

    def test_env_override_wins(self, nurse_artifact, monkeypatch):
        monkeypatch.setenv("NL2REGO_OPA", "/nonexistent/opa-binary")
        with pytest.raises(ToolUnavailable):
            discover_opa(PipelineConfig())


class TestLint:
    def test_template_output_is_clean(self, nurse_artifact, config):
        assert lint(nurse_artifact, config) == []

    def test_non_snake_case_rule_flagged(self, nurse_artifact, config):
        source = nurse_artifact.source.replace("permit if {", "permitRule if {").replace(
            "\tpermit\n", "\tpermitRule\n"
        )
        findings = lint(_artifact_with_source(nurse_artifact, source), config)
        rules = {f.rule for f in findings}
        assert "style/prefer-snake-case" in rules

    def test_unformatted_module_flagged(self, nurse_artifact, config):
        source = nurse_artifact.source.replace("\tinput.subject", "\t input.subject")
        findings = lint(_artifact_with_source(nurse_artifact, source), config)
        assert any(f.rule == "style/opa-fmt" for f in findings)

    def test_findings_carry_severity_and_location(self, nurse_artifact, config):
        source = nurse_artifact.source.replace("\tinput.subject", "\t input.subject")
        findings = lint(_artifact_with_source(nurse_artifact, source), config)
        assert findings
        for finding in findings:
            assert finding.severity in ("error", "warning", "style")
            assert finding.file.endswith(".rego")

    def test_report_preserves_raw_output(self, nurse_artifact, config):
        findings, report = lint_report(nurse_artifact, config)
        assert report.tool == "RegalLint"
        assert '"violations"' in report.raw_output


class TestRunTests:
    def test_nurse_suite_all_pass(self, nurse_artifact, nurse_test_file, config):
        report = run_tests(nurse_artifact, nurse_test_file, config)
        assert (report.total, report.passed, report.failed) == (4, 4, 0)
        assert dict(report.verdicts) == {
            "test_statement_0_positive": "pass",
            "test_statement_0_neg_subject": "pass",
            "test_statement_1_neg_denied": "pass",
            "test_empty_input_denied": "pass",
        }

    def test_deleted_permit_fails_positive_only(self, nurse_artifact, nurse_test_file, config):
        start = nurse_artifact.source.index("permit if {")
        end = nurse_artifact.source.index("}", start) + 2
        mutated_source = (
            nurse_artifact.source[:start] + "default permit := false\n\n" + nurse_artifact.source[end:]
        )
        report = run_tests(_artifact_with_source(nurse_artifact, mutated_source), nurse_test_file, config)
        verdicts = dict(report.verdicts)
        assert verdicts["test_statement_0_positive"] == "fail"
        assert verdicts["test_statement_0_neg_subject"] == "pass"
        assert verdicts["test_statement_1_neg_denied"] == "pass"
        assert verdicts["test_empty_input_denied"] == "pass"

    def test_empty_test_file_reports_zero(self, nurse_artifact, config):
        report = run_tests(nurse_artifact, "package policies.nurse_policy_test\n", config)
        assert report.total == 0
        assert report.passed == 0

    def test_counts_invariant_enforced(self):
        with pytest.raises(ValueError):
            ToolReport(
                tool="OpaTest", exit_status=0, diagnostics=(), raw_output="",
                duration_ms=0.0, tool_version="v", total=3, passed=1, failed=1,
            )
