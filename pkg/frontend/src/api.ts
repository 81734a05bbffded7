/** Typed client for the nl2rego service. Views depend on this interface so
 * contract tests can substitute recorded fixtures. */

import type {
  BatchState,
  PipelineConfig,
  RunList,
  RunRecord,
  SchemaDoc,
} from "./types";

export interface Api {
  createRun(text: string, schemaName: string | null, config?: Record<string, unknown>): Promise<RunRecord>;
  getRun(runId: string): Promise<RunRecord>;
  listRuns(page?: number, pageSize?: number): Promise<RunList>;
  rerun(runId: string, stage: string, editedPayload: unknown, schemaName: string | null): Promise<RunRecord>;
  createBatch(lines: string[], schemaName: string | null): Promise<{ batch_id: string }>;
  getBatch(batchId: string): Promise<BatchState>;
  batchArtifactsUrl(batchId: string): string;
  getConfig(): Promise<PipelineConfig>;
  putConfig(overrides: Record<string, unknown>): Promise<PipelineConfig>;
  getSchemas(): Promise<Record<string, SchemaDoc>>;
  putSchema(name: string, body: SchemaDoc): Promise<SchemaDoc>;
  getPrompts(): Promise<Record<string, string>>;
  putPrompt(stage: string, template: string): Promise<{ stage: string; template: string }>;
  resetPrompt(stage: string): Promise<{ stage: string; template: string }>;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(method: string, url: string, body?: unknown): Promise<T> {
  const response = await fetch(url, {
    method,
    headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
    body: body !== undefined ? JSON.stringify(body) : undefined,
  });
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const payload = await response.json();
      detail = payload.detail ?? JSON.stringify(payload);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class HttpApi implements Api {
  constructor(private base = "") {}

  createRun(text: string, schemaName: string | null, config?: Record<string, unknown>) {
    return request<RunRecord>("POST", `${this.base}/api/runs`, {
      text,
      schema_name: schemaName,
      config: config ?? null,
    });
  }

  getRun(runId: string) {
    return request<RunRecord>("GET", `${this.base}/api/runs/${runId}`);
  }

  listRuns(page = 1, pageSize = 20) {
    return request<RunList>("GET", `${this.base}/api/runs?page=${page}&page_size=${pageSize}`);
  }

  rerun(runId: string, stage: string, editedPayload: unknown, schemaName: string | null) {
    return request<RunRecord>("POST", `${this.base}/api/runs/${runId}/rerun`, {
      stage,
      edited_payload: editedPayload,
      schema_name: schemaName,
    });
  }

  createBatch(lines: string[], schemaName: string | null) {
    return request<{ batch_id: string }>("POST", `${this.base}/api/batch`, {
      lines,
      schema_name: schemaName,
    });
  }

  getBatch(batchId: string) {
    return request<BatchState>("GET", `${this.base}/api/batch/${batchId}`);
  }

  batchArtifactsUrl(batchId: string) {
    return `${this.base}/api/batch/${batchId}/artifacts`;
  }

  getConfig() {
    return request<PipelineConfig>("GET", `${this.base}/api/config`);
  }

  putConfig(overrides: Record<string, unknown>) {
    return request<PipelineConfig>("PUT", `${this.base}/api/config`, overrides);
  }

  getSchemas() {
    return request<Record<string, SchemaDoc>>("GET", `${this.base}/api/schemas`);
  }

  putSchema(name: string, body: SchemaDoc) {
    return request<SchemaDoc>("PUT", `${this.base}/api/schemas/${name}`, body);
  }

  getPrompts() {
    return request<Record<string, string>>("GET", `${this.base}/api/prompts`);
  }

  putPrompt(stage: string, template: string) {
    return request<{ stage: string; template: string }>("PUT", `${this.base}/api/prompts/${stage}`, {
      template,
    });
  }

  resetPrompt(stage: string) {
    return request<{ stage: string; template: string }>("DELETE", `${this.base}/api/prompts/${stage}`);
  }
}
