/** End-to-end tests against a live queryloom service (spawned uvicorn). */
import { type ChildProcess, spawn } from "node:child_process";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { openSession } from "../src/session.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const SERVER = join(dirname(fileURLToPath(import.meta.url)), "server.py");

let server: ChildProcess;

async function waitForHealth(client: ApiClient): Promise<void> {
  for (let i = 0; i < 100; i++) {
    if (await client.health()) return;
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("service did not become healthy");
}

beforeAll(async () => {
  server = spawn("python3", [SERVER, String(PORT)], { stdio: "inherit" });
  await waitForHealth(new ApiClient(BASE));
}, 30_000);

afterAll(() => {
  server?.kill();
});

describe("live service", () => {
  const client = new ApiClient(BASE, "ui");

  it("completes a clarification round-trip", async () => {
    const session = await openSession(client, "sales");
    const first = await session.send("sales by department");
    expect(first.state).toBe("clarifying");
    expect(first.clarification?.parameter).toBe("department");
    expect(session.mode).toBe("clarifying");
    expect(session.inputPrompt).toBe("department (sales, hr)");

    // modal: this send is the clarification answer
    const second = await session.send("sales");
    expect(second.state).toBe("answered");
    expect(second.sql).toContain("Zhou Hui");
    expect(second.chart?.kind).toBe("line");
    expect(session.mode).toBe("idle");

    // the trace shows authorize before execute
    const trace = await client.getTrace(second.traceId!);
    const stages = trace.stages.map((s) => s.stage);
    expect(stages.indexOf("authorize")).toBeGreaterThanOrEqual(0);
    expect(stages.indexOf("authorize")).toBeLessThan(stages.indexOf("execute"));
  });

  it("feeds an accepted correction back into the next identical question", async () => {
    const session = await openSession(client, "sales");
    const question = "Quarterly totals per employee";
    const corrected =
      "SELECT name, SUM(sales_amount) AS total FROM employee GROUP BY name";

    const before = await session.send(question);
    expect(before.state).toBe("answered");
    expect(before.sql).not.toContain("SUM(sales_amount)");

    const verdict = await session.submitCorrection(0, corrected);
    expect(verdict.status).toBe("accepted");
    expect(session.turns[0]!.corrected).toBe(true);

    const after = await session.send(question);
    expect(after.state).toBe("answered");
    expect(after.sql).toBe(corrected);
  });

  it("rejects an invalid correction with diagnostics", async () => {
    const session = await openSession(client, "sales");
    await session.send("Quarterly totals per employee");
    const verdict = await session.submitCorrection(
      0,
      "SELECT no_such_column FROM employee",
    );
    expect(verdict.status).toBe("rejected");
    expect(verdict.diagnostics!.join(" ")).toMatch(/no_such_column/);
  });
});
