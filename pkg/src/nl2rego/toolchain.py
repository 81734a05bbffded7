"""Wrappers around the external OPA and Regal binaries.

Every invocation runs in a fresh temporary workspace laid out as
``policies/<module_slug>/<module_slug>.rego`` (mirroring the package path,
which the linter's directory rules expect) and is deleted once raw output
has been captured. Commands run with the workspace as cwd and relative
arguments so diagnostics are path-deterministic.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .errors import LintOutputUnparseable, ToolUnavailable
from .model import PipelineConfig, RegoArtifact

SUBPROCESS_TIMEOUT_S = 120

_version_cache: dict[str, str] = {}


@dataclass(frozen=True)
class LintFinding:
    rule: str
    severity: str  # error | warning | style
    message: str
    file: str
    row: int
    col: int

    def __post_init__(self) -> None:
        if self.severity not in ("error", "warning", "style"):
            raise ValueError(f"unknown severity {self.severity!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule": self.rule,
            "severity": self.severity,
            "message": self.message,
            "file": self.file,
            "row": self.row,
            "col": self.col,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LintFinding":
        return cls(
            rule=data["rule"],
            severity=data["severity"],
            message=data["message"],
            file=data.get("file", ""),
            row=int(data.get("row", 0)),
            col=int(data.get("col", 0)),
        )


@dataclass(frozen=True)
class ToolReport:
    """Structured result of one tool invocation, raw output included."""

    tool: str  # OpaCheck | RegalLint | OpaTest
    exit_status: int
    diagnostics: tuple[str, ...]
    raw_output: str
    duration_ms: float
    tool_version: str
    total: int = 0
    passed: int = 0
    failed: int = 0
    verdicts: tuple[tuple[str, str], ...] = ()  # (test name, "pass"|"fail")

    def __post_init__(self) -> None:
        if self.total != self.passed + self.failed:
            raise ValueError("test counts must satisfy total = passed + failed")

    @property
    def success(self) -> bool:
        return self.exit_status == 0 and not self.diagnostics

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool": self.tool,
            "exit_status": self.exit_status,
            "diagnostics": list(self.diagnostics),
            "raw_output": self.raw_output,
            "duration_ms": self.duration_ms,
            "tool_version": self.tool_version,
            "total": self.total,
            "passed": self.passed,
            "failed": self.failed,
            "verdicts": [list(v) for v in self.verdicts],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ToolReport":
        return cls(
            tool=data["tool"],
            exit_status=int(data["exit_status"]),
            diagnostics=tuple(data.get("diagnostics") or ()),
            raw_output=data.get("raw_output", ""),
            duration_ms=float(data.get("duration_ms", 0.0)),
            tool_version=data.get("tool_version", ""),
            total=int(data.get("total", 0)),
            passed=int(data.get("passed", 0)),
            failed=int(data.get("failed", 0)),
            verdicts=tuple((v[0], v[1]) for v in data.get("verdicts") or ()),
        )


def _discover(tool: str, env_var: str, config_path: str | None) -> str:
    """Resolve a binary: explicit env override, then config path, then PATH.
    An explicit setting that does not exist is an error, not a fallthrough."""
    override = os.environ.get(env_var)
    if override:
        if not Path(override).is_file():
            raise ToolUnavailable(f"{env_var}={override} does not exist")
        return override
    if config_path:
        if not Path(config_path).is_file():
            raise ToolUnavailable(f"configured {tool} path {config_path} does not exist")
        return config_path
    found = shutil.which(tool)
    if not found:
        raise ToolUnavailable(f"{tool} binary not found on PATH (set {env_var} to override)")
    return found


def discover_opa(config: PipelineConfig | None = None) -> str:
    return _discover("opa", "NL2REGO_OPA", config.opa_path if config else None)


def discover_regal(config: PipelineConfig | None = None) -> str:
    return _discover("regal", "NL2REGO_REGAL", config.regal_path if config else None)


def _tool_version(binary: str) -> str:
    if binary not in _version_cache:
        try:
            proc = subprocess.run(
                [binary, "version"], capture_output=True, encoding="utf-8", timeout=30, check=False
            )
            first_line = (proc.stdout or proc.stderr).strip().splitlines()
            _version_cache[binary] = first_line[0].strip() if first_line else "unknown"
        except OSError:
            _version_cache[binary] = "unknown"
    return _version_cache[binary]


@contextmanager
def _workspace(artifact: RegoArtifact, test_source: str | None = None) -> Iterator[Path]:
    root = Path(tempfile.mkdtemp(prefix="nl2rego-ws-"))
    try:
        slug = artifact.module_slug
        module_dir = root / "policies" / slug
        module_dir.mkdir(parents=True)
        (module_dir / f"{slug}.rego").write_text(artifact.source, encoding="utf-8")
        if test_source is not None:
            (module_dir / f"{slug}_test.rego").write_text(test_source, encoding="utf-8")
        yield root
    finally:
        shutil.rmtree(root, ignore_errors=True)


def _run(binary: str, args: list[str], cwd: Path) -> tuple[subprocess.CompletedProcess, float]:
    started = time.perf_counter()
    try:
        proc = subprocess.run(
            [binary, *args],
            cwd=cwd,
            capture_output=True,
            encoding="utf-8",
            timeout=SUBPROCESS_TIMEOUT_S,
            check=False,
        )
    except FileNotFoundError as exc:
        raise ToolUnavailable(f"{binary} disappeared: {exc}") from exc
    return proc, (time.perf_counter() - started) * 1000.0


def _parse_json(text: str) -> Any | None:
    try:
        return json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return None


def compile_check(artifact: RegoArtifact, config: PipelineConfig | None = None) -> ToolReport:
    """Run the OPA syntax/compile check. Success means zero diagnostics."""
    opa = discover_opa(config)
    with _workspace(artifact) as ws:
        proc, duration = _run(opa, ["check", "--format", "json", "policies"], ws)
    raw = (proc.stdout or "") + (proc.stderr or "")
    diagnostics: list[str] = []
    payload = _parse_json(proc.stdout) or _parse_json(proc.stderr)
    if isinstance(payload, dict):
        for err in payload.get("errors") or []:
            loc = err.get("location") or {}
            where = f"{loc.get('file', '?')}:{loc.get('row', '?')}:{loc.get('col', '?')}"
            diagnostics.append(f"{err.get('code', 'error')}: {err.get('message', '')} ({where})")
    elif proc.returncode != 0:
        diagnostics.append(raw.strip() or f"opa check exited {proc.returncode}")
    return ToolReport(
        tool="OpaCheck",
        exit_status=proc.returncode,
        diagnostics=tuple(diagnostics),
        raw_output=raw,
        duration_ms=duration,
        tool_version=_tool_version(opa),
    )


def _finding_from_violation(violation: dict[str, Any]) -> LintFinding:
    category = violation.get("category", "")
    level = violation.get("level", "warning")
    severity = "style" if category == "style" else (level if level in ("error", "warning") else "warning")
    location = violation.get("location") or {}
    return LintFinding(
        rule=f"{category}/{violation.get('title', 'unknown')}" if category else violation.get("title", "unknown"),
        severity=severity,
        message=violation.get("description", ""),
        file=location.get("file", ""),
        row=int(location.get("row", 0) or 0),
        col=int(location.get("col", 0) or 0),
    )


def lint_report(artifact: RegoArtifact, config: PipelineConfig | None = None) -> tuple[list[LintFinding], ToolReport]:
    """Run Regal over the module; returns parsed findings plus the full
    report (raw output preserved for the audit trail)."""
    regal = discover_regal(config)
    with _workspace(artifact) as ws:
        proc, duration = _run(regal, ["lint", "--format", "json", "."], ws)
    raw = (proc.stdout or "") + (proc.stderr or "")
    payload = _parse_json(proc.stdout)
    if not isinstance(payload, dict) or "violations" not in payload:
        raise LintOutputUnparseable(f"regal output not understood (exit {proc.returncode}): {raw[:400]}")
    findings = [_finding_from_violation(v) for v in payload["violations"]]
    report = ToolReport(
        tool="RegalLint",
        exit_status=proc.returncode,
        diagnostics=tuple(f"{f.rule}: {f.message} ({f.file}:{f.row})" for f in findings),
        raw_output=raw,
        duration_ms=duration,
        tool_version=_tool_version(regal),
    )
    return findings, report


def lint(artifact: RegoArtifact, config: PipelineConfig | None = None) -> list[LintFinding]:
    """Findings parsed from the linter's structured output; empty == clean."""
    findings, _ = lint_report(artifact, config)
    return findings


def run_tests(artifact: RegoArtifact, test_source: str, config: PipelineConfig | None = None) -> ToolReport:
    """Execute the generated unit tests via the OPA test runner."""
    opa = discover_opa(config)
    with _workspace(artifact, test_source) as ws:
        proc, duration = _run(opa, ["test", "--format=json", "policies"], ws)
    raw = (proc.stdout or "") + (proc.stderr or "")
    payload = _parse_json(proc.stdout)
    verdicts: list[tuple[str, str]] = []
    diagnostics: list[str] = []
    if isinstance(payload, list):
        # the runner reports tests in nondeterministic order; sort for
        # stable records (raw output keeps the original)
        for entry in sorted(payload, key=lambda e: e.get("name", "?")):
            name = entry.get("name", "?")
            failed = bool(entry.get("fail")) or bool(entry.get("error"))
            verdicts.append((name, "fail" if failed else "pass"))
            if failed:
                diagnostics.append(f"test {name} failed")
    elif proc.returncode != 0:
        diagnostics.append(raw.strip() or f"opa test exited {proc.returncode}")
    passed = sum(1 for _, v in verdicts if v == "pass")
    failed_count = len(verdicts) - passed
    return ToolReport(
        tool="OpaTest",
        exit_status=proc.returncode,
        diagnostics=tuple(diagnostics),
        raw_output=raw,
        duration_ms=duration,
        tool_version=_tool_version(opa),
        total=len(verdicts),
        passed=passed,
        failed=failed_count,
        verdicts=tuple(verdicts),
    )


__all__ = [
    "LintFinding",
    "ToolReport",
    "discover_opa",
    "discover_regal",
    "compile_check",
    "lint",
    "lint_report",
    "run_tests",
]
