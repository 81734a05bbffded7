/** Batch view: paste or upload a corpus, launch, poll progress, inspect
 * metrics with explicit denominators, drill into runs, download artifacts. */

import type { Api } from "../api";
import { button, clear, el, table } from "../dom";
import type { BatchReport, BatchState, RateValue, RunRecord } from "../types";

export function rateText(rate: RateValue): string {
  if (rate.denominator === 0) return "undefined";
  const pct = ((rate.value ?? 0) * 100).toFixed(1);
  return `${rate.numerator}/${rate.denominator} (${pct}%)`;
}

export function metricsSummary(report: BatchReport): HTMLElement {
  const rows: [string, string][] = [
    ["inputs", String(report.inputs)],
    ["detected as policy", String(report.detected)],
    ["accepted", String(report.accepted)],
    ["compiled", String(report.compiled)],
    ["compile rate", rateText(report.compile_rate)],
    ["positive pass rate", rateText(report.positive_pass_rate) + (report.positive_shadowed ? ` — ${report.positive_shadowed} shadowed-by-deny excluded` : "")],
    ["negative pass rate", rateText(report.negative_pass_rate)],
  ];
  if (report.tool_unavailable) rows.push(["aborted (toolchain)", String(report.tool_unavailable)]);
  return el(
    "dl",
    { class: "metrics" },
    ...rows.flatMap(([label, value]) => [el("dt", {}, label), el("dd", {}, value)]),
  );
}

export interface BatchViewDeps {
  api: Api;
  onOpenRun(record: RunRecord): void;
  pollIntervalMs?: number;
}

export function renderBatchState(state: BatchState, batchId: string, deps: BatchViewDeps): HTMLElement {
  const root = el("div", { class: "batch-state" });
  if (state.status === "running") {
    const done = state.done ?? 0;
    const total = state.total ?? 0;
    root.append(
      el("p", {}, `running… ${done}/${total}`),
      el("progress", { value: String(done), max: String(Math.max(total, 1)) }),
    );
    return root;
  }
  if (state.status === "failed") {
    root.append(el("p", { class: "error" }, `batch failed: ${state.error ?? "unknown error"}`));
    return root;
  }
  const report = state.report;
  if (!report) return root;
  root.append(metricsSummary(report));
  root.append(
    el(
      "p",
      {},
      el("a", { href: deps.api.batchArtifactsUrl(batchId), download: `${batchId}-artifacts.zip` }, "download generated Rego modules"),
    ),
  );
  const byId = new Map((state.runs ?? []).map((record) => [record.run_id, record]));
  root.append(
    table(
      ["line", "verdict", "module", "tests", ""],
      report.rows.map((row) => [
        String(row.line_index),
        row.verdict,
        row.module_slug ?? "—",
        row.tests_total ? `${row.tests_passed}/${row.tests_total}` : "—",
        byId.has(row.run_id)
          ? button("open", () => deps.onOpenRun(byId.get(row.run_id)!), "btn subtle")
          : "",
      ]),
    ),
  );
  return root;
}

export function createBatchView(deps: BatchViewDeps): { element: HTMLElement } {
  const corpus = el("textarea", { rows: "8", placeholder: "one policy statement per line" }) as HTMLTextAreaElement;
  const fileInput = el("input", { type: "file", accept: ".txt" }) as HTMLInputElement;
  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (file) corpus.value = await file.text();
  });
  const schemaSelect = el("select", {}) as HTMLSelectElement;
  deps.api
    .getSchemas()
    .then((schemas) => {
      schemaSelect.append(el("option", { value: "" }, "no schema"));
      for (const name of Object.keys(schemas)) schemaSelect.append(el("option", { value: name }, name));
      if ("healthcare" in schemas) schemaSelect.value = "healthcare";
    })
    .catch(() => undefined);

  const statusBox = el("div", { class: "batch-output" });
  let timer: ReturnType<typeof setInterval> | null = null;

  async function poll(batchId: string): Promise<void> {
    const state = await deps.api.getBatch(batchId);
    clear(statusBox);
    statusBox.append(renderBatchState(state, batchId, deps));
    if (state.status !== "running" && timer !== null) {
      clearInterval(timer);
      timer = null;
    }
  }

  const launch = button("launch batch", async () => {
    const lines = corpus.value.split("\n").filter((line) => line.trim());
    if (!lines.length) return;
    const { batch_id } = await deps.api.createBatch(lines, schemaSelect.value || null);
    if (timer !== null) clearInterval(timer);
    await poll(batch_id);
    timer = setInterval(() => void poll(batch_id), deps.pollIntervalMs ?? 1000);
  });

  const element = el(
    "div",
    { class: "view batch-view" },
    el("div", { class: "run-form" }, corpus, el("div", { class: "run-controls" }, fileInput, schemaSelect, launch)),
    statusBox,
  );
  return { element };
}
