/** Wire types for the queryloom /v1 API. */

export interface ExecutionResultPayload {
  columns: string[];
  rows: unknown[][];
}

export interface ClarificationPayload {
  parameter: string;
  kind: "parameter" | "formula";
  acceptable_values: string[] | null;
  reason: string;
}

export interface RefusalPayload {
  stage: string;
  reason: string;
}

export interface AnsweredResponse {
  state: "answered";
  text: string;
  sql: string;
  chart: unknown | null;
  result: ExecutionResultPayload | null;
  trace_id: string | null;
}

export interface ClarifyingResponse {
  state: "clarifying";
  clarification: ClarificationPayload;
  trace_id?: string | null;
}

export interface RefusedResponse {
  state: "refused";
  refusal: RefusalPayload;
  trace_id: string | null;
}

export type TurnResponse = AnsweredResponse | ClarifyingResponse | RefusedResponse;

export interface FeedbackResponse {
  status: "accepted" | "rejected";
  diagnostics?: string[];
}

export interface TracePayload {
  trace_id: string;
  stages: Array<Record<string, unknown>>;
}
