/** Fetch-based client for the queryloom /v1 API. */

import type { FeedbackResponse, TracePayload, TurnResponse } from "./types.js";

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export interface QueryloomClient {
  createSession(domainId: string): Promise<string>;
  postMessage(sessionId: string, question: string): Promise<TurnResponse>;
  postFeedback(sessionId: string, turnIndex: number, correctedSql: string): Promise<FeedbackResponse>;
  getTrace(traceId: string): Promise<TracePayload>;
}

export class ApiClient implements QueryloomClient {
  constructor(
    private readonly baseUrl: string,
    private readonly userId: string = "anonymous",
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: {
        "Content-Type": "application/json",
        "X-User-Id": this.userId,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        detail = JSON.parse(text).detail ?? text;
      } catch {
        // non-JSON error body: keep the raw text
      }
      throw new ApiError(response.status, String(detail));
    }
    return JSON.parse(text) as T;
  }

  async health(): Promise<boolean> {
    try {
      await this.request<{ status: string }>("GET", "/v1/health");
      return true;
    } catch {
      return false;
    }
  }

  async createSession(domainId: string): Promise<string> {
    const body = await this.request<{ session_id: string }>("POST", "/v1/sessions", {
      domain_id: domainId,
    });
    return body.session_id;
  }

  postMessage(sessionId: string, question: string): Promise<TurnResponse> {
    return this.request("POST", `/v1/sessions/${sessionId}/messages`, { question });
  }

  postFeedback(sessionId: string, turnIndex: number, correctedSql: string): Promise<FeedbackResponse> {
    return this.request("POST", `/v1/sessions/${sessionId}/feedback`, {
      turn_index: turnIndex,
      corrected_sql: correctedSql,
    });
  }

  getTrace(traceId: string): Promise<TracePayload> {
    return this.request("GET", `/v1/traces/${traceId}`);
  }
}
