// Criterion: with the control service running a script that emits a
// clarification, the console surfaces the question, answering resumes the
// run and the next planner digest carries the clarification symbol, and
// the halt control terminates a run with zero executed ops.
//
// Drives the exact modules the browser uses (ApiClient, readSse, store),
// headlessly, against a real service process.

import { spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ServiceError } from "../src/api.js";
import { readSse } from "../src/sse.js";
import { applyEventLine, digestKeys, emptyRunView, type RunView } from "../src/store.js";
import { codePhaseMilestones } from "../src/timeline.js";
import type { RunStatus } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const dataDir = join(here, "..", "..", "src", "labgate", "data");
const PORT = 8741 + (process.pid % 50);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
const api = new ApiClient(BASE);

function loadJson(path: string): unknown {
  return JSON.parse(readFileSync(path, "utf-8"));
}

const clarifyTask = loadJson(join(dataDir, "tasks", "demo_clarify.json"));
const clarifyScript = loadJson(join(dataDir, "scripts", "demo_clarify.json"));

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt += 1) {
    try {
      const response = await fetch(`${BASE}/fsm/matrix`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("service did not come up");
}

async function waitForStatus(runId: string, wanted: RunStatus[], timeoutMs = 8000): Promise<RunStatus> {
  const deadline = Date.now() + timeoutMs;
  let status: RunStatus = "running";
  while (Date.now() < deadline) {
    status = (await api.getRun(runId)).status;
    if (wanted.includes(status)) return status;
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  return status;
}

async function collectTrace(runId: string): Promise<RunView> {
  let view = emptyRunView(runId);
  for await (const line of readSse(api.traceUrl(runId))) {
    view = applyEventLine(view, line);
  }
  return view;
}

beforeAll(async () => {
  service = spawn(
    "python3",
    ["-m", "labgate.cli", "serve", "--port", String(PORT), "--max-runs", "8"],
    { stdio: "ignore" },
  );
  await waitForService();
}, 30_000);

afterAll(() => {
  service?.kill();
});

describe("clarify round trip through the real service", () => {
  it("displays the question, resumes on answer, and shows the bound symbol", async () => {
    const handle = await api.startRun(clarifyTask, { kind: "scripted", script: clarifyScript });
    expect(handle.run_id).toMatch(/^run-/);

    await waitForStatus(handle.run_id, ["awaiting_clarification"]);
    const pending = await api.pendingClarifications();
    const item = pending.find((clar) => clar.run_id === handle.run_id);
    expect(item).toBeDefined();
    expect(item!.question).toContain("wash buffer");

    await api.answerClarification(item!.clar_id, "trough_1 holds the wash buffer");
    const finalStatus = await waitForStatus(handle.run_id, ["success", "halted", "failed"]);
    expect(finalStatus).toBe("success");

    const view = await collectTrace(handle.run_id);
    // the first planner step after the resume carries the clarify symbol
    const afterResume = view.events.filter(
      (event) => event.digest !== undefined && event.t > 2,
    );
    expect(afterResume.length).toBeGreaterThan(0);
    expect(afterResume[0].digest).toContain("clarify_c1");
    expect(digestKeys(view)).toContain("clarify_c1");
    expect(view.currentState).toBe("SUCCESS");
  }, 20_000);

  it("rejects a second answer with a conflict the inbox can surface", async () => {
    const handle = await api.startRun(clarifyTask, { kind: "scripted", script: clarifyScript });
    await waitForStatus(handle.run_id, ["awaiting_clarification"]);
    const pending = await api.pendingClarifications();
    const item = pending.find((clar) => clar.run_id === handle.run_id)!;
    await api.answerClarification(item.clar_id, "first answer");
    await waitForStatus(handle.run_id, ["success", "halted", "failed"]);

    let conflict: ServiceError | null = null;
    try {
      await api.answerClarification(item.clar_id, "second answer");
    } catch (error) {
      conflict = error as ServiceError;
    }
    expect(conflict).not.toBeNull();
    expect(["AlreadyAnswered", "UnknownClarification"]).toContain(conflict!.kind);
  }, 20_000);
});

describe("halt control", () => {
  it("terminates a parked run with zero executed ops", async () => {
    const handle = await api.startRun(clarifyTask, { kind: "scripted", script: clarifyScript });
    await waitForStatus(handle.run_id, ["awaiting_clarification"]);

    const halted = await api.haltRun(handle.run_id);
    expect(halted.run_id).toBe(handle.run_id);
    const finalStatus = await waitForStatus(handle.run_id, ["halted"]);
    expect(finalStatus).toBe("halted");

    const view = await collectTrace(handle.run_id);
    expect(view.currentState).toBe("HALT");
    expect(view.executedSteps).toBe(0);
    expect(view.events.every((event) => !event.executed)).toBe(true);
  }, 20_000);

  it("reports AlreadyTerminal for a finished run", async () => {
    const handle = await api.startRun(clarifyTask, { kind: "scripted", script: clarifyScript });
    await waitForStatus(handle.run_id, ["awaiting_clarification"]);
    await api.haltRun(handle.run_id);
    await waitForStatus(handle.run_id, ["halted"]);

    let conflict: ServiceError | null = null;
    try {
      await api.haltRun(handle.run_id);
    } catch (error) {
      conflict = error as ServiceError;
    }
    expect(conflict?.kind).toBe("AlreadyTerminal");
  }, 20_000);
});

describe("state graph and milestones from live data", () => {
  it("renders the matrix from the service, never hard-coded", async () => {
    const matrix = await api.getMatrix();
    expect(matrix.rules.length).toBeGreaterThanOrEqual(6);
    expect(matrix.fallback).toBe("HALT");
    const targets = matrix.rules.map((rule) => rule.target);
    expect(targets).toContain("RECTIFY_CODE");
  });

  it("replays a correction run into the published milestone sequence", async () => {
    const task = loadJson(join(dataDir, "tasks", "d1_overrange.json"));
    const script = loadJson(join(dataDir, "scripts", "d1_overrange.json"));
    const handle = await api.startRun(task, { kind: "scripted", script });
    await waitForStatus(handle.run_id, ["success"]);
    const view = await collectTrace(handle.run_id);
    expect(codePhaseMilestones(view.events)).toEqual([
      "DESIGN_CODE",
      "RECTIFY_CODE",
      "DESIGN_CODE",
      "SUCCESS",
    ]);
  }, 20_000);
});
