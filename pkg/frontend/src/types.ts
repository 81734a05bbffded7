/** Wire types for the nl2rego HTTP API. These mirror the service's JSON
 * shapes one-to-one; the console never reinterprets them. */

export type Verdict =
  | "Accepted"
  | "RejectedNotPolicy"
  | "HaltedSchemaInvalid"
  | "CompileFailed"
  | "Completed";

export type StageName =
  | "detect"
  | "segment"
  | "extract"
  | "validate"
  | "generate"
  | "lint"
  | "compile"
  | "testgen"
  | "test";

export const STAGE_ORDER: StageName[] = [
  "detect",
  "segment",
  "extract",
  "validate",
  "generate",
  "lint",
  "compile",
  "testgen",
  "test",
];

export interface ProviderTranscript {
  provider_id: string;
  stage: string;
  system_text: string;
  user_text: string;
  response_text: string;
  attempts: number;
  latency_ms: number;
}

export interface StageEntry {
  stage: StageName;
  input_snapshot: unknown;
  output_snapshot: unknown;
  transcripts: ProviderTranscript[];
  diagnostics: string[];
  duration_ms: number;
}

export interface RunRecord {
  run_id: string;
  raw_input: string;
  stage_entries: StageEntry[];
  verdict: Verdict;
  started_at: string;
  finished_at: string;
  parent_run_id: string | null;
  edited_stage: string | null;
}

export interface DsarcpTuple {
  decision: "Allow" | "Deny";
  subject: string;
  action: string;
  resource: string;
  conditions: string[];
  purpose: string | null;
  source_statement_index: number;
}

export interface PolicyStatement {
  text: string;
  index: number;
  origin_span: [number, number];
}

export interface ValidationFinding {
  component: string;
  value: string;
  candidates: string[];
}

export interface ValidationReport {
  verdict: "Valid" | "Invalid" | "Skipped";
  tuple: DsarcpTuple;
  findings: ValidationFinding[];
}

export interface RegoArtifact {
  package_name: string;
  source: string;
  annotations: { tuple: DsarcpTuple; statement_text: string }[];
  backend: "template" | "llm";
  lint_iterations_used: number;
}

export interface LintFinding {
  rule: string;
  severity: string;
  message: string;
  file: string;
  row: number;
  col: number;
}

export interface ToolReport {
  tool: string;
  exit_status: number;
  diagnostics: string[];
  raw_output: string;
  duration_ms: number;
  tool_version: string;
  total: number;
  passed: number;
  failed: number;
  verdicts: [string, "pass" | "fail"][];
}

export interface TestCase {
  name: string;
  kind: "Positive" | "Negative";
  statement_index: number;
  input_document: Record<string, unknown>;
  expected_allow: boolean;
}

export interface TestSuite {
  module_slug: string;
  cases: TestCase[];
  mode: "rule" | "llm";
  fallback_from_llm: boolean;
}

export interface RateValue {
  numerator: number;
  denominator: number;
  value: number | null;
}

export interface BatchRow {
  line_index: number;
  run_id: string;
  verdict: string;
  module_slug: string | null;
  statements: number;
  tests_total: number;
  tests_passed: number;
}

export interface BatchReport {
  inputs: number;
  statements: number;
  detected: number;
  accepted: number;
  compiled: number;
  rejected_not_policy: number;
  halted_schema_invalid: number;
  compile_failed: number;
  tool_unavailable: number;
  positive_total: number;
  positive_passed: number;
  positive_shadowed: number;
  negative_total: number;
  negative_passed: number;
  compile_rate: RateValue;
  positive_pass_rate: RateValue;
  negative_pass_rate: RateValue;
  rows: BatchRow[];
}

export interface BatchState {
  status: "running" | "done" | "failed";
  total?: number;
  done?: number;
  error?: string;
  report?: BatchReport;
  run_ids?: string[];
  runs?: RunRecord[];
}

export interface PipelineConfig {
  provider: string;
  endpoint: string | null;
  model: string | null;
  api_key_env: string;
  schema_validation_enabled: boolean;
  rego_validation_enabled: boolean;
  test_mode: "rule" | "llm";
  codegen_backend: "template" | "llm";
  max_lint_iterations: number;
  plural_fold: boolean;
  prompt_dir: string | null;
  parallelism: number | null;
  opa_path: string | null;
  regal_path: string | null;
  temperature: number;
  max_output_tokens: number;
  runs_dir: string;
}

export interface SchemaDoc {
  name: string;
  subjects: string[];
  actions: string[];
  resources: string[];
  conditions?: string[];
  purposes?: string[];
}

export interface RunList {
  total: number;
  page: number;
  page_size: number;
  runs: RunRecord[];
}
