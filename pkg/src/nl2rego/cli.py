"""Command-line interface.

Each pipeline stage is exposed as its own subcommand so any stage can be
swapped with an external implementation; the stage commands pass a JSON
envelope on stdin/stdout that accumulates stage outputs (text, detection,
statements, tuples, validation, artifact, suite). ``run`` executes the full
flow and is envelope-equivalent to piping the stage commands in order.

Exit codes: 0 success, 1 internal error, 2 usage error, 3 domain rejection
(not a policy, schema-invalid, or compile failure) with the reason on
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, TextIO

from . import codegen, extract as extract_mod, preprocess, report as report_mod, schemaval, testgen, toolchain
from .errors import Nl2RegoError, SchemaMalformed, SchemaUnreadable, ToolUnavailable
from .model import (
    CodegenBackend,
    DsarcpTuple,
    PipelineConfig,
    PolicyStatement,
    RegoArtifact,
    Schema,
    TestMode,
    Verdict,
)
from .orchestrator import (
    RunStore,
    bundled_schemas,
    run_batch,
    run_single,
)
from .prompts import PromptLibrary
from .provider import get_provider

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_REJECTED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nl2rego",
        description="Translate natural-language access control policies into tested Rego modules.",
    )
    parser.add_argument("--config", metavar="FILE", help="pipeline config file (JSON)")
    parser.add_argument("--provider", choices=["mock", "openai-compatible"], help="completion provider")
    parser.add_argument("--no-schema-validation", action="store_true", help="skip schema validation")
    parser.add_argument("--no-rego-validation", action="store_true", help="skip lint/compile/test execution")
    parser.add_argument("--test-mode", choices=["rule", "llm"], help="test generation mode")
    parser.add_argument("--codegen-backend", choices=["template", "llm"], help="Rego generation backend")
    parser.add_argument("--max-lint-iterations", type=int, metavar="N", help="lint repair budget (default 3)")
    parser.add_argument("--prompt-dir", metavar="DIR", help="directory with prompt template overrides")
    parser.add_argument("--runs-dir", metavar="DIR", help="run record directory (default ./runs)")

    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="policy detection (plus segmentation) for raw text")
    p_detect.add_argument("text", nargs="?", help="policy text (reads stdin when omitted)")
    p_detect.add_argument("--file", metavar="F", help="read raw text from a file")
    p_detect.add_argument("--out", metavar="F", help="write the output envelope to a file")

    for name, help_text in (
        ("extract", "segment and extract DSARCP tuples from a detect envelope"),
        ("validate", "validate extracted tuples against an organization schema"),
        ("generate", "emit the Rego module (and lint/compile it when enabled)"),
        ("test", "generate and execute unit tests for a generated module"),
    ):
        p_stage = sub.add_parser(name, help=help_text)
        p_stage.add_argument("--in", dest="infile", metavar="F", help="input envelope (default stdin)")
        p_stage.add_argument("--out", metavar="F", help="output envelope (default stdout)")
        if name == "validate":
            p_stage.add_argument("--schema", required=True, metavar="S", help="schema file or bundled schema name")
        if name == "generate":
            p_stage.add_argument("--slug", metavar="SLUG", help="module slug override")
            p_stage.add_argument("--emit-dir", metavar="DIR", help="also write <slug>.rego here")
        if name == "test":
            p_stage.add_argument("--emit-dir", metavar="DIR", help="also write <slug>_test.rego here")

    p_run = sub.add_parser("run", help="full single-policy flow")
    p_run.add_argument("text", nargs="?", help="policy text (reads stdin when omitted)")
    p_run.add_argument("--file", metavar="F", help="read raw text from a file")
    p_run.add_argument("--schema", metavar="S", help="schema file or bundled schema name")
    p_run.add_argument("--out", metavar="DIR", help="artifact output directory")
    p_run.add_argument("--slug", metavar="SLUG", help="module slug override")

    p_batch = sub.add_parser("batch", help="run the pipeline over a corpus, one policy per line")
    p_batch.add_argument("--input", required=True, metavar="F", help="corpus file ('-' for stdin)")
    p_batch.add_argument("--schema", metavar="S", help="schema file or bundled schema name")
    p_batch.add_argument("--out", required=True, metavar="DIR", help="output directory for artifacts and reports")
    p_batch.add_argument("--no-figure", action="store_true", help="skip the metrics figure")

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--port", type=int, default=8000, metavar="N")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--state-dir", metavar="DIR", help="service state directory (default ./nl2rego-state)")

    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides: dict[str, Any] = {}
    if args.provider:
        overrides["provider"] = args.provider
    if args.no_schema_validation:
        overrides["schema_validation_enabled"] = False
    if args.no_rego_validation:
        overrides["rego_validation_enabled"] = False
    if args.test_mode:
        overrides["test_mode"] = args.test_mode
    if args.codegen_backend:
        overrides["codegen_backend"] = args.codegen_backend
    if args.max_lint_iterations is not None:
        overrides["max_lint_iterations"] = args.max_lint_iterations
    if args.prompt_dir:
        overrides["prompt_dir"] = args.prompt_dir
    if args.runs_dir:
        overrides["runs_dir"] = args.runs_dir
    return config.with_overrides(overrides) if overrides else config


def _resolve_schema(spec: str | None) -> Schema | None:
    if not spec:
        return None
    if Path(spec).is_file():
        return schemaval.load_schema(spec)
    bundled = bundled_schemas()
    if spec in bundled:
        return bundled[spec]
    raise SchemaUnreadable(f"schema {spec!r} is neither a file nor a bundled schema ({', '.join(sorted(bundled))})")


def _read_text(args: argparse.Namespace, stdin: TextIO) -> str:
    if getattr(args, "file", None):
        return Path(args.file).read_text(encoding="utf-8")
    if getattr(args, "text", None):
        return args.text
    return stdin.read()


def _read_envelope(args: argparse.Namespace, stdin: TextIO) -> dict[str, Any]:
    raw = Path(args.infile).read_text(encoding="utf-8") if args.infile else stdin.read()
    try:
        envelope = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise _UsageError(f"input is not a JSON envelope: {exc}") from exc
    if not isinstance(envelope, dict):
        raise _UsageError("input envelope must be a JSON object")
    return envelope


def _write_envelope(envelope: dict[str, Any], args: argparse.Namespace, stdout: TextIO) -> None:
    text = json.dumps(envelope, indent=2) + "\n"
    if getattr(args, "out", None):
        target = Path(args.out)
        if str(target.parent) not in ("", "."):
            target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


class _UsageError(Exception):
    pass


class _Rejection(Exception):
    pass


def _envelope_statements(envelope: dict[str, Any]) -> list[PolicyStatement]:
    return [PolicyStatement.from_dict(s) for s in envelope.get("statements") or []]


def _envelope_tuples(envelope: dict[str, Any]) -> list[DsarcpTuple]:
    tuples = envelope.get("tuples")
    if not tuples:
        raise _UsageError("envelope carries no tuples; run the extract stage first")
    return [DsarcpTuple.from_dict(t) for t in tuples]


def _cmd_detect(args, config, stdin, stdout, stderr) -> int:
    text = _read_text(args, stdin).strip()
    if not text:
        raise _UsageError("no input text given")
    provider = get_provider(config)
    library = PromptLibrary(config.prompt_dir)
    detection = preprocess.detect(text, provider, config, library)
    envelope = {"text": text, "detection": detection.to_dict()}
    _write_envelope(envelope, args, stdout)
    if not detection.is_policy:
        print(f"not a policy: {detection.rationale}", file=stderr)
        return EXIT_REJECTED
    return EXIT_OK


def _cmd_extract(args, config, stdin, stdout, stderr) -> int:
    envelope = _read_envelope(args, stdin)
    text = envelope.get("text") or ""
    if not text.strip():
        raise _UsageError("envelope carries no text")
    provider = get_provider(config)
    library = PromptLibrary(config.prompt_dir)
    statements = preprocess.segment_and_resolve(text, provider, config, library)
    tuples = [
        extract_mod.extract_dsarcp(statement, provider, config, library)
        for statement in statements
    ]
    envelope["statements"] = [s.to_dict() for s in statements]
    envelope["tuples"] = [t.to_dict() for t in tuples]
    _write_envelope(envelope, args, stdout)
    return EXIT_OK


def _cmd_validate(args, config, stdin, stdout, stderr) -> int:
    envelope = _read_envelope(args, stdin)
    schema = _resolve_schema(args.schema)
    tuples = _envelope_tuples(envelope)
    reports = [schemaval.validate(t, schema, config) for t in tuples]
    envelope["validation"] = [r.to_dict() for r in reports]
    _write_envelope(envelope, args, stdout)
    invalid = [r for r in reports if r.verdict == "Invalid"]
    if invalid:
        for r in invalid:
            for finding in r.findings:
                print(
                    f"schema-invalid: {finding.component} {finding.value!r}"
                    f" (nearest: {', '.join(finding.candidates)})",
                    file=stderr,
                )
        return EXIT_REJECTED
    return EXIT_OK


def _cmd_generate(args, config, stdin, stdout, stderr) -> int:
    envelope = _read_envelope(args, stdin)
    tuples = _envelope_tuples(envelope)
    statements = _envelope_statements(envelope)
    if not statements:
        statements = [
            PolicyStatement(text=f"statement {t.source_statement_index}", index=t.source_statement_index, origin_span=(0, 0))
            for t in tuples
        ]
    slug = args.slug or envelope.get("module_slug") or codegen.default_module_slug(tuples)
    provider = get_provider(config)
    library = PromptLibrary(config.prompt_dir)
    if config.codegen_backend is CodegenBackend.LLM_SYNTHESIS:
        artifact = codegen.llm_emit(tuples, statements, provider, config, module_slug=slug, library=library)
    else:
        artifact = codegen.emit_module(tuples, slug, statements)

    lint_findings: list[toolchain.LintFinding] = []
    compile_ok = True
    if config.rego_validation_enabled:
        lint_findings, _ = toolchain.lint_report(artifact, config)
        while lint_findings and artifact.backend is CodegenBackend.LLM_SYNTHESIS:
            artifact = codegen.apply_lint_feedback(artifact, lint_findings, provider, config, library)
            lint_findings, _ = toolchain.lint_report(artifact, config)
        compile_report = toolchain.compile_check(artifact, config)
        compile_ok = compile_report.success
        envelope["compile"] = compile_report.to_dict()
    envelope["module_slug"] = artifact.module_slug
    envelope["artifact"] = artifact.to_dict()
    envelope["lint"] = [f.to_dict() for f in lint_findings]
    if args.emit_dir:
        emit_dir = Path(args.emit_dir)
        emit_dir.mkdir(parents=True, exist_ok=True)
        (emit_dir / f"{artifact.module_slug}.rego").write_text(artifact.source, encoding="utf-8")
    _write_envelope(envelope, args, stdout)
    if not compile_ok:
        print("compile failed:", file=stderr)
        for diag in envelope["compile"]["diagnostics"]:
            print(f"  {diag}", file=stderr)
        return EXIT_REJECTED
    return EXIT_OK


def _cmd_test(args, config, stdin, stdout, stderr) -> int:
    envelope = _read_envelope(args, stdin)
    if not envelope.get("artifact"):
        raise _UsageError("envelope carries no artifact; run the generate stage first")
    artifact = RegoArtifact.from_dict(envelope["artifact"])
    tuples = _envelope_tuples(envelope)
    statements = _envelope_statements(envelope)
    provider = get_provider(config)
    library = PromptLibrary(config.prompt_dir)
    if config.test_mode is TestMode.LLM_BASED:
        suite = testgen.llm_tests(
            tuples, statements, provider, config, module_slug=artifact.module_slug, library=library
        )
    else:
        suite = testgen.rule_based_tests(tuples, artifact.module_slug)
    test_file = testgen.render_test_file(suite)
    envelope["suite"] = suite.to_dict()
    envelope["test_file"] = test_file
    if config.rego_validation_enabled:
        tool_report = toolchain.run_tests(artifact, test_file, config)
        shadowed = testgen.shadowed_positive_names(tuples)
        envelope["test_report"] = tool_report.to_dict()
        envelope["shadowed"] = sorted(
            n for n, v in tool_report.verdicts if v == "fail" and n in shadowed
        )
        print(
            f"tests: {tool_report.passed}/{tool_report.total} passed"
            + (f" ({len(envelope['shadowed'])} shadowed-by-deny)" if envelope["shadowed"] else ""),
            file=stderr,
        )
    if args.emit_dir:
        emit_dir = Path(args.emit_dir)
        emit_dir.mkdir(parents=True, exist_ok=True)
        (emit_dir / f"{artifact.module_slug}_test.rego").write_text(test_file, encoding="utf-8")
    _write_envelope(envelope, args, stdout)
    return EXIT_OK


def _cmd_run(args, config, stdin, stdout, stderr) -> int:
    text = _read_text(args, stdin).strip()
    if not text:
        raise _UsageError("no input text given")
    schema = _resolve_schema(args.schema)
    store = RunStore(config.runs_dir)
    record = run_single(
        text,
        config,
        schema=schema,
        store=store,
        out_dir=args.out,
        module_slug=args.slug,
    )
    print(f"run {record.run_id}: {record.verdict.value}", file=stdout)
    if args.out and record.verdict is Verdict.COMPLETED:
        generate_entry = record.entry("generate")
        if generate_entry:
            slug = generate_entry.output_snapshot["artifact"]["package_name"].rsplit(".", 1)[-1]
            print(f"artifacts: {Path(args.out) / (slug + '.rego')}, {Path(args.out) / (slug + '_test.rego')}", file=stdout)
    for entry in record.stage_entries:
        for diag in entry.diagnostics:
            print(f"[{entry.stage}] {diag}", file=stderr)
    if record.verdict in (Verdict.REJECTED_NOT_POLICY, Verdict.HALTED_SCHEMA_INVALID, Verdict.COMPILE_FAILED):
        return EXIT_REJECTED
    return EXIT_OK


def _cmd_batch(args, config, stdin, stdout, stderr) -> int:
    if args.input == "-":
        lines = stdin.read().splitlines()
    else:
        lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    schema = _resolve_schema(args.schema)
    store = RunStore(config.runs_dir)
    out_dir = Path(args.out)
    batch_report = run_batch(lines, config, schema=schema, store=store, out_dir=out_dir / "out")
    written = {
        "json": report_mod.write_json(batch_report, out_dir / "report.json"),
        "csv": report_mod.write_csv(batch_report, out_dir / "report.csv"),
    }
    if not args.no_figure:
        written["figure"] = report_mod.write_figure(batch_report, out_dir / "metrics.png")
    print(report_mod.render_table(batch_report), file=stdout)
    print(f"reports: {', '.join(str(p) for p in written.values())}", file=stdout)
    return EXIT_OK


def _cmd_serve(args, config, stdin, stdout, stderr) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(state_dir=args.state_dir or "nl2rego-state", base_config=config)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


_COMMANDS = {
    "detect": _cmd_detect,
    "extract": _cmd_extract,
    "validate": _cmd_validate,
    "generate": _cmd_generate,
    "test": _cmd_test,
    "run": _cmd_run,
    "batch": _cmd_batch,
    "serve": _cmd_serve,
}


def main(
    argv: list[str] | None = None,
    stdin: TextIO | None = None,
    stdout: TextIO | None = None,
    stderr: TextIO | None = None,
) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _config_from_args(args)
        return _COMMANDS[args.command](args, config, stdin, stdout, stderr)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except (SchemaMalformed, SchemaUnreadable) as exc:
        print(f"schema error: {exc}", file=stderr)
        return EXIT_USAGE
    except ToolUnavailable as exc:
        print(f"toolchain unavailable: {exc}", file=stderr)
        return EXIT_INTERNAL
    except Nl2RegoError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"io error: {exc}", file=stderr)
        return EXIT_INTERNAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
