/** Single-policy view: run a statement, inspect every stage, edit stage
 * outputs, and rerun downstream. All displayed values come from service
 * responses. */

import type { Api } from "../api";
import { button, clear, el, table } from "../dom";
import { EDITABLE_STAGES, buildEditor } from "../editors";
import type {
  DsarcpTuple,
  LintFinding,
  RegoArtifact,
  RunRecord,
  StageEntry,
  StageName,
  TestSuite,
  ToolReport,
  ValidationReport,
} from "../types";

function chip(text: string, cls: string): HTMLElement {
  return el("span", { class: `chip ${cls}` }, text);
}

function verdictChip(verdict: string): HTMLElement {
  const cls = verdict === "Completed" ? "ok" : verdict === "Accepted" ? "warn" : "bad";
  return chip(verdict, cls);
}

function tupleRow(tuple: DsarcpTuple): (string | HTMLElement)[] {
  return [
    String(tuple.source_statement_index),
    chip(tuple.decision, tuple.decision === "Allow" ? "ok" : "bad"),
    tuple.subject,
    tuple.action,
    tuple.resource,
    tuple.conditions.join(", ") || "—",
    tuple.purpose ?? "—",
  ];
}

export function dsarcpTable(tuples: DsarcpTuple[]): HTMLElement {
  return table(
    ["#", "decision", "subject", "action", "resource", "conditions", "purpose"],
    tuples.map(tupleRow),
  );
}

function renderDetect(output: { is_policy: boolean; rationale: string; estimated_statement_count: number | null }): HTMLElement {
  return el(
    "div",
    {},
    chip(output.is_policy ? "policy" : "not a policy", output.is_policy ? "ok" : "bad"),
    output.estimated_statement_count !== null
      ? chip(`${output.estimated_statement_count} statement(s)`, "info")
      : null,
    el("p", { class: "rationale" }, output.rationale),
  );
}

function renderSegment(output: { statements: { text: string; index: number; origin_span: number[] }[] }): HTMLElement {
  return el(
    "ol",
    { class: "statements", start: "0" },
    ...output.statements.map((s) =>
      el("li", {}, s.text, el("span", { class: "span-badge" }, ` [${s.origin_span[0]}..${s.origin_span[1]})`)),
    ),
  );
}

function renderValidate(output: { reports: ValidationReport[] }): HTMLElement {
  const root = el("div", {});
  for (const report of output.reports) {
    const cls = report.verdict === "Valid" ? "ok" : report.verdict === "Skipped" ? "warn" : "bad";
    root.append(
      el(
        "div",
        { class: "validation-row" },
        chip(report.verdict, cls),
        el("code", {}, `${report.tuple.subject} / ${report.tuple.action} / ${report.tuple.resource}`),
      ),
    );
    if (report.findings.length) {
      root.append(
        table(
          ["component", "value", "nearest candidates"],
          report.findings.map((f) => [f.component, f.value, f.candidates.join(", ")]),
        ),
      );
    }
  }
  return root;
}

/** Rego source with dsarcp annotation lines highlighted. */
export function highlightedSource(source: string): HTMLElement {
  const pre = el("pre", { class: "code rego" });
  for (const line of source.split("\n")) {
    const cls = line.startsWith("# dsarcp:") ? "annotation" : line.startsWith("#") ? "comment" : "";
    pre.append(el("span", { class: cls }, line + "\n"));
  }
  return pre;
}

function renderGenerate(output: { artifact: RegoArtifact }): HTMLElement {
  const artifact = output.artifact;
  return el(
    "div",
    {},
    chip(artifact.backend === "template" ? "deterministic template" : "llm synthesis", "info"),
    el("code", { class: "pkg" }, artifact.package_name),
    highlightedSource(artifact.source),
  );
}

function renderLint(output: { skipped: boolean; findings: LintFinding[] }): HTMLElement {
  if (output.skipped) return chip("skipped", "warn");
  if (!output.findings.length) return chip("clean", "ok");
  return el(
    "div",
    {},
    chip(`${output.findings.length} finding(s)`, "bad"),
    table(
      ["rule", "severity", "message", "location"],
      output.findings.map((f) => [f.rule, f.severity, f.message, `${f.file}:${f.row}`]),
    ),
  );
}

function renderCompile(output: { skipped: boolean; report?: ToolReport }): HTMLElement {
  if (output.skipped || !output.report) return chip("skipped", "warn");
  const report = output.report;
  const root = el("div", {}, chip(report.exit_status === 0 ? "compiled" : "compile failed", report.exit_status === 0 ? "ok" : "bad"), chip(report.tool_version, "info"));
  if (report.diagnostics.length) {
    root.append(el("ul", { class: "diagnostics" }, ...report.diagnostics.map((d) => el("li", { class: "line-anchor" }, d))));
  }
  return root;
}

function renderTestgen(output: { suite: TestSuite }): HTMLElement {
  const suite = output.suite;
  return el(
    "div",
    {},
    chip(`${suite.mode === "rule" ? "rule-based" : "llm-based"}${suite.fallback_from_llm ? " (fallback)" : ""}`, "info"),
    table(
      ["name", "kind", "expected", "input"],
      suite.cases.map((c) => [
        c.name,
        chip(c.kind, c.kind === "Positive" ? "ok" : "bad"),
        c.expected_allow ? "allow" : "deny",
        el("code", {}, JSON.stringify(c.input_document)),
      ]),
    ),
  );
}

function renderTest(output: { skipped: boolean; report?: ToolReport; shadowed?: string[] }): HTMLElement {
  if (output.skipped || !output.report) return chip("skipped", "warn");
  const report = output.report;
  const shadowed = new Set(output.shadowed ?? []);
  const root = el(
    "div",
    {},
    chip(`${report.passed}/${report.total} passed`, report.failed === 0 ? "ok" : shadowed.size === report.failed ? "warn" : "bad"),
  );
  root.append(
    table(
      ["test", "result"],
      report.verdicts.map(([name, verdict]) => [
        name,
        shadowed.has(name)
          ? chip("ShadowedByDeny", "warn")
          : chip(verdict, verdict === "pass" ? "ok" : "bad"),
      ]),
    ),
  );
  return root;
}

const STAGE_RENDERERS: Partial<Record<StageName, (output: never) => HTMLElement>> = {
  detect: renderDetect,
  segment: renderSegment,
  extract: (output: { tuples: DsarcpTuple[] }) => dsarcpTable(output.tuples),
  validate: renderValidate,
  generate: renderGenerate,
  lint: renderLint,
  compile: renderCompile,
  testgen: renderTestgen,
  test: renderTest,
};

function transcriptDetails(entry: StageEntry): HTMLElement | null {
  if (!entry.transcripts.length) return null;
  const details = el("details", { class: "transcripts" }, el("summary", {}, `${entry.transcripts.length} provider call(s)`));
  for (const transcript of entry.transcripts) {
    details.append(
      el(
        "div",
        { class: "transcript" },
        el("p", {}, `${transcript.provider_id} · ${transcript.attempts} attempt(s)`),
        el("pre", { class: "code" }, transcript.user_text),
        el("pre", { class: "code response" }, transcript.response_text),
      ),
    );
  }
  return details;
}

export interface RunViewOptions {
  api: Api;
  schemaName: string | null;
  onRecord(record: RunRecord): void;
  onError(message: string): void;
}

function stageCard(entry: StageEntry, record: RunRecord, opts: RunViewOptions): HTMLElement {
  const body = el("div", { class: "stage-body" });
  const renderer = STAGE_RENDERERS[entry.stage];
  if (renderer && entry.output_snapshot !== null && entry.output_snapshot !== undefined) {
    try {
      body.append(renderer(entry.output_snapshot as never));
    } catch {
      body.append(el("pre", { class: "code" }, JSON.stringify(entry.output_snapshot, null, 2)));
    }
  }
  if (entry.diagnostics.length) {
    body.append(el("ul", { class: "diagnostics" }, ...entry.diagnostics.map((d) => el("li", {}, d))));
  }
  const transcripts = transcriptDetails(entry);
  if (transcripts) body.append(transcripts);

  const actions = el("div", { class: "stage-actions" });
  if (EDITABLE_STAGES.includes(entry.stage)) {
    actions.append(
      button("edit & rerun from here", () => {
        const editor = buildEditor(entry.stage, entry.output_snapshot);
        if (!editor) return;
        const panel = el("div", { class: "editor-panel" }, editor.element);
        panel.append(
          button("apply & rerun", async () => {
            try {
              const next = await opts.api.rerun(record.run_id, entry.stage, editor.payload(), opts.schemaName);
              opts.onRecord(next);
            } catch (error) {
              opts.onError(error instanceof Error ? error.message : String(error));
            }
          }),
          button("cancel", () => panel.remove(), "btn subtle"),
        );
        body.append(panel);
      }),
    );
  } else if (entry.stage !== "detect") {
    actions.append(
      button("rerun from here", async () => {
        try {
          const next = await opts.api.rerun(record.run_id, entry.stage, null, opts.schemaName);
          opts.onRecord(next);
        } catch (error) {
          opts.onError(error instanceof Error ? error.message : String(error));
        }
      }),
    );
  }

  return el(
    "section",
    { class: "stage-card", "data-stage": entry.stage },
    el("header", { class: "stage-header" }, el("h3", {}, entry.stage), el("span", { class: "ms" }, `${entry.duration_ms.toFixed(0)} ms`), actions),
    body,
  );
}

export function renderRunRecord(record: RunRecord, opts: RunViewOptions): HTMLElement {
  const root = el("article", { class: "run-record" });
  const header = el(
    "header",
    { class: "run-header" },
    el("h2", {}, `run ${record.run_id}`),
    verdictChip(record.verdict),
  );
  if (record.parent_run_id) {
    header.append(
      el("p", { class: "provenance" }, `rerun of `, el("code", {}, record.parent_run_id), record.edited_stage ? ` with edited ${record.edited_stage} output` : ""),
    );
  }
  header.append(el("p", { class: "raw-input" }, record.raw_input));
  root.append(header);
  for (const entry of record.stage_entries) {
    root.append(stageCard(entry, record, opts));
  }
  return root;
}

export function createSingleView(api: Api): { element: HTMLElement; showRecord(record: RunRecord): void } {
  const input = el("textarea", {
    rows: "3",
    placeholder: "Nurses are allowed to read prescriptions, but they are not allowed to change them",
  }) as HTMLTextAreaElement;
  const schemaSelect = el("select", { class: "schema-select" }) as HTMLSelectElement;
  const errorBox = el("p", { class: "error", hidden: "hidden" });
  const output = el("div", { class: "run-output" });

  api
    .getSchemas()
    .then((schemas) => {
      schemaSelect.append(el("option", { value: "" }, "no schema"));
      for (const name of Object.keys(schemas)) {
        schemaSelect.append(el("option", { value: name }, name));
      }
      if (Object.keys(schemas).includes("healthcare")) schemaSelect.value = "healthcare";
    })
    .catch(() => undefined);

  const opts: RunViewOptions = {
    api,
    get schemaName() {
      return schemaSelect.value || null;
    },
    onRecord: (record) => showRecord(record),
    onError: (message) => {
      errorBox.textContent = message;
      errorBox.hidden = false;
    },
  };

  function showRecord(record: RunRecord): void {
    errorBox.hidden = true;
    clear(output);
    output.append(renderRunRecord(record, opts));
  }

  const runButton = button("run policy", async () => {
    errorBox.hidden = true;
    try {
      const record = await api.createRun(input.value, schemaSelect.value || null);
      showRecord(record);
    } catch (error) {
      opts.onError(error instanceof Error ? error.message : String(error));
    }
  });

  const element = el(
    "div",
    { class: "view single-view" },
    el("div", { class: "run-form" }, input, el("div", { class: "run-controls" }, schemaSelect, runButton)),
    errorBox,
    output,
  );
  return { element, showRecord };
}
