/** Session state machine for the chat view.
 *
 * One in-flight turn per session (mirrors the service's Busy contract: the UI
 * disables send while pending). While a clarification is open, the flow is
 * modal: the next send posts the clarification answer, not a fresh question.
 */

import type { QueryloomClient } from "./api.js";
import { toRenderModel, type RenderModel } from "./chart.js";
import type { ClarificationPayload, RefusalPayload, TurnResponse } from "./types.js";

export type TurnState = "answered" | "clarifying" | "refused" | "pending";

export interface ChatTurnView {
  question: string;
  state: TurnState;
  narrative: string | null;
  chart: RenderModel | null; // rendered only when the service sent a spec
  sql: string | null;
  traceId: string | null;
  clarification: ClarificationPayload | null;
  refusal: RefusalPayload | null;
  corrected: boolean; // feedback accepted for this turn
}

export type SessionMode = "idle" | "pending" | "clarifying";

export class TurnInFlightError extends Error {
  constructor() {
    super("a turn is already in flight; send is disabled");
    this.name = "TurnInFlightError";
  }
}

export class ChatSession {
  readonly turns: ChatTurnView[] = [];
  private inFlight = false;
  private openClarification: ClarificationPayload | null = null;

  constructor(
    private readonly client: QueryloomClient,
    readonly sessionId: string,
  ) {}

  get mode(): SessionMode {
    if (this.inFlight) return "pending";
    return this.openClarification ? "clarifying" : "idle";
  }

  get canSend(): boolean {
    return !this.inFlight;
  }

  /** Label for the input box; while clarifying it names the parameter and
   * its acceptable values. */
  get inputPrompt(): string {
    const open = this.openClarification;
    if (!open) return "Ask a question";
    const values = open.acceptable_values?.length
      ? ` (${open.acceptable_values.join(", ")})`
      : "";
    return `${open.parameter}${values}`;
  }

  async send(text: string): Promise<ChatTurnView> {
    if (!this.canSend) throw new TurnInFlightError();
    this.inFlight = true;
    const turn: ChatTurnView = {
      question: text,
      state: "pending",
      narrative: null,
      chart: null,
      sql: null,
      traceId: null,
      clarification: null,
      refusal: null,
      corrected: false,
    };
    this.turns.push(turn);
    try {
      const response = await this.client.postMessage(this.sessionId, text);
      this.apply(turn, response);
      return turn;
    } catch (error) {
      // network failure: the turn stays visible and retryable via a new send
      this.turns.pop();
      throw error;
    } finally {
      this.inFlight = false;
    }
  }

  private apply(turn: ChatTurnView, response: TurnResponse): void {
    turn.traceId = ("trace_id" in response ? response.trace_id : null) ?? null;
    switch (response.state) {
      case "answered":
        turn.state = "answered";
        turn.narrative = response.text;
        turn.sql = response.sql;
        turn.chart = response.chart == null ? null : toRenderModel(response.chart);
        this.openClarification = null;
        break;
      case "clarifying":
        turn.state = "clarifying";
        turn.clarification = response.clarification;
        this.openClarification = response.clarification;
        break;
      case "refused":
        turn.state = "refused";
        turn.refusal = response.refusal;
        this.openClarification = null;
        break;
    }
  }

  async submitCorrection(turnIndex: number, correctedSql: string) {
    const turn = this.turns[turnIndex];
    if (!turn || (turn.state !== "answered" && turn.state !== "refused")) {
      throw new Error("corrections apply only to answered or refused turns");
    }
    const result = await this.client.postFeedback(this.sessionId, turnIndex, correctedSql);
    if (result.status === "accepted") turn.corrected = true;
    return result;
  }
}

export async function openSession(
  client: QueryloomClient,
  domainId: string,
): Promise<ChatSession> {
  const sessionId = await client.createSession(domainId);
  return new ChatSession(client, sessionId);
}
