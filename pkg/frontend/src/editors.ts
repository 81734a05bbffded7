/** Schema-driven stage payload editors.
 *
 * Each editable stage declares a form schema over its output type; the
 * editor renders inputs from that schema and re-assembles an edited payload
 * for the rerun endpoint. New fields only need a schema entry, not UI code.
 */

import { button, el } from "./dom";
import type { DsarcpTuple, PolicyStatement, StageName } from "./types";

export type FieldSpec =
  | { kind: "boolean"; key: string; label: string }
  | { kind: "text"; key: string; label: string }
  | { kind: "number"; key: string; label: string }
  | { kind: "select"; key: string; label: string; options: string[] }
  | { kind: "slug-list"; key: string; label: string }
  | { kind: "code"; key: string; label: string };

export interface Editor {
  element: HTMLElement;
  payload(): unknown;
}

export const TUPLE_FIELDS: FieldSpec[] = [
  { kind: "select", key: "decision", label: "decision", options: ["Allow", "Deny"] },
  { kind: "text", key: "subject", label: "subject" },
  { kind: "text", key: "action", label: "action" },
  { kind: "text", key: "resource", label: "resource" },
  { kind: "slug-list", key: "conditions", label: "conditions" },
  { kind: "text", key: "purpose", label: "purpose" },
];

export const DETECTION_FIELDS: FieldSpec[] = [
  { kind: "boolean", key: "is_policy", label: "is policy" },
  { kind: "text", key: "rationale", label: "rationale" },
  { kind: "number", key: "estimated_statement_count", label: "statement count" },
];

function fieldInput(spec: FieldSpec, value: unknown): HTMLElement {
  const name = spec.key;
  switch (spec.kind) {
    case "boolean": {
      const input = el("input", { type: "checkbox", "data-field": name });
      (input as HTMLInputElement).checked = Boolean(value);
      return input;
    }
    case "number": {
      const input = el("input", { type: "number", "data-field": name });
      (input as HTMLInputElement).value = value === null || value === undefined ? "" : String(value);
      return input;
    }
    case "select": {
      const select = el("select", { "data-field": name });
      for (const option of spec.options) {
        const node = el("option", { value: option }, option);
        if (option === value) node.setAttribute("selected", "selected");
        select.append(node);
      }
      return select;
    }
    case "slug-list": {
      const input = el("input", { type: "text", "data-field": name, placeholder: "comma-separated" });
      (input as HTMLInputElement).value = Array.isArray(value) ? value.join(", ") : "";
      return input;
    }
    case "code": {
      const area = el("textarea", { "data-field": name, rows: "16", class: "code" });
      (area as HTMLTextAreaElement).value = typeof value === "string" ? value : "";
      return area;
    }
    default: {
      const input = el("input", { type: "text", "data-field": name });
      (input as HTMLInputElement).value = value === null || value === undefined ? "" : String(value);
      return input;
    }
  }
}

function readField(root: HTMLElement, spec: FieldSpec): unknown {
  const node = root.querySelector(`[data-field="${spec.key}"]`) as
    | HTMLInputElement
    | HTMLSelectElement
    | HTMLTextAreaElement;
  switch (spec.kind) {
    case "boolean":
      return (node as HTMLInputElement).checked;
    case "number":
      return node.value === "" ? null : Number(node.value);
    case "slug-list":
      return node.value
        .split(",")
        .map((part) => part.trim())
        .filter(Boolean);
    default:
      return node.value === "" ? null : node.value;
  }
}

function objectForm(fields: FieldSpec[], value: Record<string, unknown>): { element: HTMLElement; read(): Record<string, unknown> } {
  const rows = fields.map((spec) =>
    el("label", { class: "field" }, el("span", {}, spec.label), fieldInput(spec, value[spec.key])),
  );
  const element = el("div", { class: "object-form" }, ...rows);
  return {
    element,
    read: () => {
      const result: Record<string, unknown> = {};
      for (const spec of fields) result[spec.key] = readField(element, spec);
      return result;
    },
  };
}

function detectEditor(output: Record<string, unknown>): Editor {
  const form = objectForm(DETECTION_FIELDS, output);
  return { element: form.element, payload: () => form.read() };
}

function segmentEditor(output: { statements: PolicyStatement[] }): Editor {
  const area = el("textarea", { rows: "6", class: "code" }) as HTMLTextAreaElement;
  area.value = output.statements.map((s) => s.text).join("\n");
  const element = el("div", {}, el("p", { class: "hint" }, "One statement per line."), area);
  return {
    element,
    payload: () => {
      const prior = output.statements;
      const statements = area.value
        .split("\n")
        .map((line) => line.trim())
        .filter(Boolean)
        .map((text, index) => ({
          text,
          index,
          origin_span: prior[index] ? prior[index].origin_span : [0, 0],
        }));
      return { statements };
    },
  };
}

function extractEditor(output: { tuples: DsarcpTuple[] }): Editor {
  const forms = output.tuples.map((tuple) =>
    objectForm(TUPLE_FIELDS, tuple as unknown as Record<string, unknown>),
  );
  const element = el(
    "div",
    {},
    ...forms.map((form, i) =>
      el("fieldset", { class: "tuple-form" }, el("legend", {}, `statement ${output.tuples[i].source_statement_index}`), form.element),
    ),
  );
  return {
    element,
    payload: () => ({
      tuples: forms.map((form, i) => {
        const read = form.read();
        return {
          ...read,
          purpose: read.purpose || null,
          source_statement_index: output.tuples[i].source_statement_index,
        };
      }),
    }),
  };
}

function generateEditor(output: { artifact: { source: string } }): Editor {
  const area = fieldInput({ kind: "code", key: "source", label: "source" }, output.artifact.source) as HTMLTextAreaElement;
  const element = el(
    "div",
    {},
    el("p", { class: "hint" }, "Hand-edit the Rego module; lint, compile, and tests re-run on the edited source."),
    area,
  );
  return { element, payload: () => ({ source: area.value }) };
}

function testgenEditor(output: { suite: unknown }): Editor {
  const area = el("textarea", { rows: "14", class: "code" }) as HTMLTextAreaElement;
  area.value = JSON.stringify(output.suite, null, 2);
  const element = el("div", {}, el("p", { class: "hint" }, "Edit the suite as JSON."), area);
  return {
    element,
    payload: () => ({ suite: JSON.parse(area.value) }),
  };
}

/** Stages whose output payloads are editable, mirroring the service. */
export const EDITABLE_STAGES: StageName[] = ["detect", "segment", "extract", "generate", "testgen"];

export function buildEditor(stage: StageName, output: unknown): Editor | null {
  switch (stage) {
    case "detect":
      return detectEditor(output as Record<string, unknown>);
    case "segment":
      return segmentEditor(output as { statements: PolicyStatement[] });
    case "extract":
      return extractEditor(output as { tuples: DsarcpTuple[] });
    case "generate":
      return generateEditor(output as { artifact: { source: string } });
    case "testgen":
      return testgenEditor(output as { suite: unknown });
    default:
      return null;
  }
}

export { button };
