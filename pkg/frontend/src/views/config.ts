/** Configuration view: provider selection, validation toggles, test mode,
 * lint budget, and prompt template editing with save / restore-default. */

import type { Api } from "../api";
import { button, clear, el } from "../dom";
import type { PipelineConfig } from "../types";

const CONFIG_FIELDS: { key: keyof PipelineConfig; label: string; kind: "select" | "boolean" | "number" | "text"; options?: string[] }[] = [
  { key: "provider", label: "provider", kind: "select", options: ["mock", "openai-compatible"] },
  { key: "model", label: "model", kind: "text" },
  { key: "endpoint", label: "endpoint", kind: "text" },
  { key: "schema_validation_enabled", label: "schema validation", kind: "boolean" },
  { key: "rego_validation_enabled", label: "rego validation (lint/compile/test)", kind: "boolean" },
  { key: "test_mode", label: "test generation", kind: "select", options: ["rule", "llm"] },
  { key: "codegen_backend", label: "codegen backend", kind: "select", options: ["template", "llm"] },
  { key: "max_lint_iterations", label: "max lint iterations", kind: "number" },
  { key: "plural_fold", label: "plural folding", kind: "boolean" },
];

export function createConfigView(api: Api): { element: HTMLElement } {
  const form = el("div", { class: "config-form" });
  const statusBox = el("p", { class: "status" });
  const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();

  function fill(config: PipelineConfig): void {
    clear(form);
    inputs.clear();
    for (const field of CONFIG_FIELDS) {
      const value = config[field.key];
      let input: HTMLInputElement | HTMLSelectElement;
      if (field.kind === "select") {
        input = el("select", {}) as HTMLSelectElement;
        for (const option of field.options ?? []) {
          const node = el("option", { value: option }, option);
          if (option === value) node.setAttribute("selected", "selected");
          input.append(node);
        }
      } else if (field.kind === "boolean") {
        input = el("input", { type: "checkbox" }) as HTMLInputElement;
        input.checked = Boolean(value);
      } else if (field.kind === "number") {
        input = el("input", { type: "number", min: "1" }) as HTMLInputElement;
        input.value = String(value ?? "");
      } else {
        input = el("input", { type: "text" }) as HTMLInputElement;
        input.value = value === null || value === undefined ? "" : String(value);
      }
      inputs.set(field.key, input);
      form.append(el("label", { class: "field" }, el("span", {}, field.label), input));
    }
    form.append(
      button("save configuration", async () => {
        const overrides: Record<string, unknown> = {};
        for (const field of CONFIG_FIELDS) {
          const input = inputs.get(field.key)!;
          if (field.kind === "boolean") overrides[field.key] = (input as HTMLInputElement).checked;
          else if (field.kind === "number") overrides[field.key] = Number(input.value);
          else overrides[field.key] = input.value || null;
        }
        if (overrides.provider === null) overrides.provider = "mock";
        try {
          fill(await api.putConfig(overrides));
          statusBox.textContent = "saved";
        } catch (error) {
          statusBox.textContent = error instanceof Error ? error.message : String(error);
        }
      }),
    );
  }

  const promptsBox = el("div", { class: "prompts" });

  function fillPrompts(templates: Record<string, string>): void {
    clear(promptsBox);
    for (const [stage, template] of Object.entries(templates)) {
      const area = el("textarea", { rows: "8", class: "code" }) as HTMLTextAreaElement;
      area.value = template;
      promptsBox.append(
        el(
          "details",
          { class: "prompt-editor", "data-stage": stage },
          el("summary", {}, `${stage} template`),
          area,
          el(
            "div",
            { class: "run-controls" },
            button("save", async () => {
              const saved = await api.putPrompt(stage, area.value);
              area.value = saved.template;
            }),
            button("restore default", async () => {
              const restored = await api.resetPrompt(stage);
              area.value = restored.template;
            }, "btn subtle"),
          ),
        ),
      );
    }
  }

  void api.getConfig().then(fill).catch(() => undefined);
  void api.getPrompts().then(fillPrompts).catch(() => undefined);

  const element = el(
    "div",
    { class: "view config-view" },
    el("h2", {}, "pipeline configuration"),
    form,
    statusBox,
    el("h2", {}, "prompt templates"),
    promptsBox,
  );
  return { element };
}
