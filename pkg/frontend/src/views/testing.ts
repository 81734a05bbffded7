/** Testing & validation view: pick any persisted run and re-execute the
 * lint / compile / test stages on its artifact — optionally after editing
 * the Rego source by hand. Results come back as a fresh run record. */

import type { Api } from "../api";
import { button, clear, el } from "../dom";
import type { RunRecord } from "../types";
import { highlightedSource } from "./single";

function artifactSource(record: RunRecord): string | null {
  const entry = record.stage_entries.find((e) => e.stage === "generate");
  if (!entry || !entry.output_snapshot) return null;
  const snapshot = entry.output_snapshot as { artifact?: { source?: string } };
  return snapshot.artifact?.source ?? null;
}

function checkResults(record: RunRecord): HTMLElement {
  const root = el("div", { class: "check-results" });
  for (const stage of ["lint", "compile", "test"] as const) {
    const entry = record.stage_entries.find((e) => e.stage === stage);
    const section = el("section", {}, el("h4", {}, stage));
    if (!entry) {
      section.append(el("p", {}, "not reached"));
    } else if (entry.diagnostics.length) {
      section.append(el("ul", { class: "diagnostics" }, ...entry.diagnostics.map((d) => el("li", {}, d))));
    } else {
      const output = entry.output_snapshot as { skipped?: boolean; report?: { passed?: number; total?: number } } | null;
      if (output?.skipped) section.append(el("p", {}, "skipped"));
      else if (output?.report && stage === "test") section.append(el("p", {}, `${output.report.passed}/${output.report.total} tests passed`));
      else section.append(el("p", {}, "clean"));
    }
    root.append(section);
  }
  return root;
}

export function createTestingView(api: Api): { element: HTMLElement } {
  const runSelect = el("select", { class: "run-select" }) as HTMLSelectElement;
  const refresh = button("refresh runs", loadRuns, "btn subtle");
  const sourceBox = el("textarea", { rows: "18", class: "code" }) as HTMLTextAreaElement;
  const resultBox = el("div", {});
  const errorBox = el("p", { class: "error", hidden: "hidden" });
  let records = new Map<string, RunRecord>();

  async function loadRuns(): Promise<void> {
    const page = await api.listRuns(1, 50);
    records = new Map(page.runs.map((r) => [r.run_id, r]));
    clear(runSelect);
    for (const record of page.runs) {
      if (artifactSource(record) !== null) {
        runSelect.append(el("option", { value: record.run_id }, `${record.run_id} — ${record.raw_input.slice(0, 60)}`));
      }
    }
    showSelected();
  }

  function showSelected(): void {
    const record = records.get(runSelect.value);
    sourceBox.value = record ? artifactSource(record) ?? "" : "";
  }

  runSelect.addEventListener("change", showSelected);

  const check = button("run opa check / lint / tests", async () => {
    errorBox.hidden = true;
    const record = records.get(runSelect.value);
    if (!record) return;
    try {
      const edited = sourceBox.value !== artifactSource(record);
      const next = await api.rerun(record.run_id, "generate", edited ? { source: sourceBox.value } : null, null);
      clear(resultBox);
      resultBox.append(checkResults(next));
      resultBox.append(el("details", {}, el("summary", {}, "validated module"), highlightedSource(sourceBox.value)));
    } catch (error) {
      errorBox.textContent = error instanceof Error ? error.message : String(error);
      errorBox.hidden = false;
    }
  });

  void loadRuns();

  const element = el(
    "div",
    { class: "view testing-view" },
    el("div", { class: "run-controls" }, runSelect, refresh, check),
    errorBox,
    sourceBox,
    resultBox,
  );
  return { element };
}
