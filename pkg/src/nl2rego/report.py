"""Batch report rendering: summary table, delimited per-run rows, JSON, and
a rates figure rendered alongside the delimited output."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .orchestrator import BatchReport

_CSV_FIELDS = ("line_index", "run_id", "verdict", "module_slug", "statements", "tests_total", "tests_passed")


def render_table(report: BatchReport) -> str:
    """Plain-text summary with every rate shown next to its denominator."""
    lines = [
        "batch summary",
        "-------------",
        f"inputs:                {report.inputs}",
        f"statements:            {report.statements}",
        f"detected as policy:    {report.detected}",
        f"accepted:              {report.accepted}",
        f"compiled:              {report.compiled}",
        f"rejected (not policy): {report.rejected_not_policy}",
        f"halted (schema):       {report.halted_schema_invalid}",
        f"compile failures:      {report.compile_failed}",
    ]
    if report.tool_unavailable:
        lines.append(f"aborted (toolchain):   {report.tool_unavailable}")
    lines.extend(
        [
            f"compile rate:          {report.compile_rate}",
            f"positive pass rate:    {report.positive_pass_rate}"
            + (f"  [{report.positive_shadowed} shadowed-by-deny excluded]" if report.positive_shadowed else ""),
            f"negative pass rate:    {report.negative_pass_rate}",
        ]
    )
    return "\n".join(lines)


def write_csv(report: BatchReport, path: str | Path) -> Path:
    """One delimited row per input line."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for row in report.rows:
            writer.writerow(row.to_dict())
    return target


def write_json(report: BatchReport, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return target


def write_figure(report: BatchReport, path: str | Path) -> Path:
    """Bar chart of the three batch rates; undefined rates are drawn as
    empty slots so a missing denominator is visible, not zero."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    labels = ["compile", "positive tests", "negative tests"]
    rates = [report.compile_rate, report.positive_pass_rate, report.negative_pass_rate]

    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    xs = range(len(labels))
    heights = [r.value if r.value is not None else 0.0 for r in rates]
    colors = ["#4878a8", "#6aa84f", "#a84848"]
    bars = ax.bar(xs, heights, color=colors, width=0.55)
    for bar, rate in zip(bars, rates):
        label = f"{rate.numerator}/{rate.denominator}" if rate.denominator else "n/a"
        ax.annotate(
            label,
            xy=(bar.get_x() + bar.get_width() / 2, bar.get_height()),
            xytext=(0, 3),
            textcoords="offset points",
            ha="center",
            fontsize=9,
        )
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_ylim(0.0, 1.12)
    ax.set_ylabel("pass rate")
    ax.set_title("batch validation rates")
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)
    return target


def write_all(report: BatchReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, report.csv, and metrics.png under ``out_dir``."""
    base = Path(out_dir)
    return {
        "json": write_json(report, base / "report.json"),
        "csv": write_csv(report, base / "report.csv"),
        "figure": write_figure(report, base / "metrics.png"),
    }


__all__ = ["render_table", "write_csv", "write_json", "write_figure", "write_all"]
