"""CLI surface: exit codes, envelopes, and stage-pipe composability."""

from __future__ import annotations

import io
import json

from nl2rego.cli import main

from conftest import NURSE_TEXT


def run_cli(argv, stdin_text=""):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = main(argv, stdin=io.StringIO(stdin_text), stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


class TestDetectCommand:
    def test_policy_text_exits_zero(self):
        code, out, _ = run_cli(["detect", NURSE_TEXT])
        assert code == 0
        envelope = json.loads(out)
        assert envelope["detection"]["is_policy"] is True
        assert envelope["detection"]["estimated_statement_count"] == 2

    def test_non_policy_exits_three(self):
        code, out, err = run_cli(["detect", "hello"])
        assert code == 3
        assert "not a policy" in err

    def test_reads_stdin_when_no_arg(self):
        code, out, _ = run_cli(["detect"], stdin_text=NURSE_TEXT)
        assert code == 0

    def test_reads_file(self, tmp_path):
        f = tmp_path / "p.txt"
        f.write_text(NURSE_TEXT)
        code, out, _ = run_cli(["detect", "--file", str(f)])
        assert code == 0

    def test_empty_input_usage_error(self):
        code, _, err = run_cli(["detect"], stdin_text="   ")
        assert code == 2


class TestUsageErrors:
    def test_unknown_command(self):
        code, _, _ = run_cli(["frobnicate"])
        assert code == 2

    def test_unknown_schema(self):
        code, _, err = run_cli(["run", NURSE_TEXT, "--schema", "no_such_schema"])
        assert code == 2
        assert "schema" in err

    def test_malformed_envelope(self):
        code, _, err = run_cli(["extract"], stdin_text="this is not json")
        assert code == 2


class TestRunCommand:
    def test_nurse_run_writes_artifacts(self, tmp_path):
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(
            ["--runs-dir", str(tmp_path / "runs"), "run", NURSE_TEXT, "--schema", "healthcare", "--out", str(out_dir)]
        )
        assert code == 0
        assert "Completed" in out
        assert (out_dir / "nurses_read_prescriptions.rego").is_file()
        assert (out_dir / "nurses_read_prescriptions_test.rego").is_file()

    def test_non_policy_exit_three(self, tmp_path):
        code, out, err = run_cli(["--runs-dir", str(tmp_path / "runs"), "run", "The weather is nice today"])
        assert code == 3
        assert "RejectedNotPolicy" in out

    def test_schema_invalid_exit_three(self, tmp_path):
        code, out, _ = run_cli(
            ["--runs-dir", str(tmp_path / "runs"), "run", "Surgeons can read prescriptions.", "--schema", "healthcare"]
        )
        assert code == 3
        assert "HaltedSchemaInvalid" in out


class TestStagePipe:
    def _pipe(self, text, tmp_path, emit_dir):
        """detect | extract | validate | generate | test"""
        code, out, err = run_cli(["detect", text])
        assert code == 0, err
        code, out, err = run_cli(["extract"], stdin_text=out)
        assert code == 0, err
        code, out, err = run_cli(["validate", "--schema", "healthcare"], stdin_text=out)
        assert code == 0, err
        code, out, err = run_cli(["generate", "--emit-dir", str(emit_dir)], stdin_text=out)
        assert code == 0, err
        code, out, err = run_cli(["test", "--emit-dir", str(emit_dir)], stdin_text=out)
        assert code == 0, err
        return json.loads(out)

    def test_pipe_equals_run_on_nurse(self, tmp_path):
        pipe_dir = tmp_path / "pipe"
        run_dir = tmp_path / "run"
        envelope = self._pipe(NURSE_TEXT, tmp_path, pipe_dir)
        assert envelope["test_report"]["passed"] == 4

        code, _, _ = run_cli(
            ["--runs-dir", str(tmp_path / "runs"), "run", NURSE_TEXT, "--schema", "healthcare", "--out", str(run_dir)]
        )
        assert code == 0
        for name in ("nurses_read_prescriptions.rego", "nurses_read_prescriptions_test.rego"):
            assert (pipe_dir / name).read_bytes() == (run_dir / name).read_bytes()

    def test_validate_rejects_unknown_subject(self, tmp_path):
        code, out, _ = run_cli(["detect", "Surgeons can read prescriptions."])
        assert code == 0
        code, out, _ = run_cli(["extract"], stdin_text=out)
        assert code == 0
        code, out, err = run_cli(["validate", "--schema", "healthcare"], stdin_text=out)
        assert code == 3
        assert "schema-invalid" in err
        envelope = json.loads(out)
        assert envelope["validation"][0]["verdict"] == "Invalid"


class TestBatchCommand:
    def test_small_batch_writes_reports(self, tmp_path):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text(
            "Nurses are allowed to read prescriptions.\n"
            "Doctors must not delete audit logs.\n"
        )
        out_dir = tmp_path / "batch-out"
        code, out, _ = run_cli(
            [
                "--runs-dir", str(tmp_path / "runs"),
                "batch", "--input", str(corpus), "--schema", "healthcare", "--out", str(out_dir),
            ]
        )
        assert code == 0
        assert "compile rate:          2/2" in out
        assert (out_dir / "report.json").is_file()
        assert (out_dir / "report.csv").is_file()
        assert (out_dir / "metrics.png").is_file()
        assert (out_dir / "out" / "nurses_read_prescriptions.rego").is_file()
        report = json.loads((out_dir / "report.json").read_text())
        assert report["compile_rate"]["numerator"] == 2

    def test_figure_optional(self, tmp_path):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text("Nurses are allowed to read prescriptions.\n")
        out_dir = tmp_path / "batch-out"
        code, _, _ = run_cli(
            [
                "--runs-dir", str(tmp_path / "runs"),
                "batch", "--input", str(corpus), "--schema", "healthcare",
                "--out", str(out_dir), "--no-figure",
            ]
        )
        assert code == 0
        assert not (out_dir / "metrics.png").exists()


class TestConfigPlumbing:
    def test_config_file_applies(self, tmp_path):
        config_file = tmp_path / "config.json"
        config_file.write_text(json.dumps({"rego_validation_enabled": False, "runs_dir": str(tmp_path / "runs")}))
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(
            ["--config", str(config_file), "run", NURSE_TEXT, "--schema", "healthcare", "--out", str(out_dir)]
        )
        assert code == 0
        assert "Completed" in out

    def test_flag_overrides_config(self, tmp_path):
        code, out, _ = run_cli(
            ["--runs-dir", str(tmp_path / "runs"), "--no-schema-validation", "run",
             "Surgeons can read prescriptions.", "--schema", "healthcare"]
        )
        assert code == 0
        assert "Completed" in out
