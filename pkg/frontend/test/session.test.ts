import { describe, expect, it } from "vitest";

import type { QueryloomClient } from "../src/api.js";
import { ChatSession, TurnInFlightError, openSession } from "../src/session.js";
import type { FeedbackResponse, TracePayload, TurnResponse } from "../src/types.js";

type Script = Array<TurnResponse | Error>;

class FakeClient implements QueryloomClient {
  readonly messages: string[] = [];
  feedback: FeedbackResponse = { status: "accepted" };
  private resolvers: Array<(r: TurnResponse) => void> = [];

  constructor(private script: Script = []) {}

  async createSession(): Promise<string> {
    return "s1";
  }

  /** With an empty script, postMessage stays pending until release(). */
  postMessage(_sessionId: string, question: string): Promise<TurnResponse> {
    this.messages.push(question);
    const next = this.script.shift();
    if (next instanceof Error) return Promise.reject(next);
    if (next) return Promise.resolve(next);
    return new Promise((resolve) => this.resolvers.push(resolve));
  }

  release(response: TurnResponse): void {
    this.resolvers.shift()!(response);
  }

  async postFeedback(): Promise<FeedbackResponse> {
    return this.feedback;
  }

  async getTrace(): Promise<TracePayload> {
    return { trace_id: "t", stages: [] };
  }
}

const ANSWERED: TurnResponse = {
  state: "answered",
  text: "All good.",
  sql: "SELECT 1",
  chart: null,
  result: { columns: ["x"], rows: [[1]] },
  trace_id: "trace-1",
};

const CLARIFYING: TurnResponse = {
  state: "clarifying",
  clarification: {
    parameter: "department",
    kind: "parameter",
    acceptable_values: ["sales", "hr"],
    reason: "ambiguous department",
  },
  trace_id: "trace-2",
};

const REFUSED: TurnResponse = {
  state: "refused",
  refusal: { stage: "authorize", reason: "missing grant" },
  trace_id: "trace-3",
};

describe("ChatSession", () => {
  it("resolves the happy path pending -> answered", async () => {
    const session = await openSession(new FakeClient([ANSWERED]), "sales");
    const turn = await session.send("q");
    expect(turn.state).toBe("answered");
    expect(turn.narrative).toBe("All good.");
    expect(turn.sql).toBe("SELECT 1");
    expect(turn.chart).toBeNull(); // no spec, nothing rendered
    expect(turn.traceId).toBe("trace-1");
    expect(session.mode).toBe("idle");
  });

  it("disables send while a turn is in flight", async () => {
    const client = new FakeClient();
    const session = new ChatSession(client, "s1");
    const pending = session.send("first");
    expect(session.mode).toBe("pending");
    expect(session.canSend).toBe(false);
    expect(session.turns[0]!.state).toBe("pending");
    await expect(session.send("second")).rejects.toBeInstanceOf(TurnInFlightError);
    client.release(ANSWERED);
    await pending;
    expect(session.canSend).toBe(true);
  });

  it("is modal while clarifying and labels the input box", async () => {
    const client = new FakeClient([CLARIFYING, ANSWERED]);
    const session = new ChatSession(client, "s1");
    const turn = await session.send("sales by department");
    expect(turn.state).toBe("clarifying");
    expect(session.mode).toBe("clarifying");
    expect(session.inputPrompt).toBe("department (sales, hr)");
    // the next send posts the clarification answer as the message body
    const resolved = await session.send("sales");
    expect(client.messages).toEqual(["sales by department", "sales"]);
    expect(resolved.state).toBe("answered");
    expect(session.mode).toBe("idle");
    expect(session.inputPrompt).toBe("Ask a question");
  });

  it("shows refusals with their stage tag", async () => {
    const session = new ChatSession(new FakeClient([REFUSED]), "s1");
    const turn = await session.send("secret data");
    expect(turn.state).toBe("refused");
    expect(turn.refusal).toEqual({ stage: "authorize", reason: "missing grant" });
  });

  it("drops the turn and rethrows on network failure (retryable)", async () => {
    const session = new ChatSession(new FakeClient([new Error("boom"), ANSWERED]), "s1");
    await expect(session.send("q")).rejects.toThrow("boom");
    expect(session.turns).toHaveLength(0);
    expect(session.canSend).toBe(true);
    await session.send("q");
    expect(session.turns).toHaveLength(1);
  });

  it("marks turns corrected on accepted feedback", async () => {
    const client = new FakeClient([ANSWERED]);
    const session = new ChatSession(client, "s1");
    await session.send("q");
    const result = await session.submitCorrection(0, "SELECT 2");
    expect(result.status).toBe("accepted");
    expect(session.turns[0]!.corrected).toBe(true);
  });

  it("surfaces rejection diagnostics and leaves the turn unmarked", async () => {
    const client = new FakeClient([ANSWERED]);
    client.feedback = { status: "rejected", diagnostics: ["UnknownColumn: nope"] };
    const session = new ChatSession(client, "s1");
    await session.send("q");
    const result = await session.submitCorrection(0, "SELECT nope FROM t");
    expect(result.diagnostics).toEqual(["UnknownColumn: nope"]);
    expect(session.turns[0]!.corrected).toBe(false);
  });

  it("refuses corrections on pending or clarifying turns", async () => {
    const client = new FakeClient([CLARIFYING]);
    const session = new ChatSession(client, "s1");
    await session.send("q");
    await expect(session.submitCorrection(0, "SELECT 1")).rejects.toThrow(
      /answered or refused/,
    );
  });

  it("renders a chart only when the response carries a spec", async () => {
    const withChart: TurnResponse = {
      ...ANSWERED,
      chart: {
        xAxis: { type: "category", name: "m", data: ["1"] },
        yAxis: { type: "value", name: "v" },
        series: [{ type: "bar", name: "v", data: [5] }],
      },
    };
    const session = new ChatSession(new FakeClient([withChart]), "s1");
    const turn = await session.send("q");
    expect(turn.chart).not.toBeNull();
    expect(turn.chart!.kind).toBe("bar");
  });
});
