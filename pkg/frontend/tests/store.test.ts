import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { applyEvent, applyEventLine, digestKeys, emptyRunView } from "../src/store.js";
import type { TraceEvent } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const traceLines = readFileSync(join(here, "fixtures", "trace_d1.jsonl"), "utf-8")
  .trim()
  .split("\n");

function reduceAll() {
  let view = emptyRunView("run-x");
  for (const line of traceLines) {
    view = applyEventLine(view, line);
  }
  return view;
}

describe("run view reduction", () => {
  it("tracks the latest event's state with no client-side inference", () => {
    let view = emptyRunView("run-x");
    for (const line of traceLines) {
      view = applyEventLine(view, line);
      const events = view.events;
      // thin-client invariant: rendered state equals the last event's state
      expect(view.currentState).toBe(events[events.length - 1].state);
      expect(view.signal).toEqual(events[events.length - 1].signal);
    }
    expect(view.currentState).toBe("SUCCESS");
  });

  it("collects violations from failing verdicts", () => {
    const view = reduceAll();
    expect(view.violations.length).toBe(1);
    expect(view.violations[0].kind).toBe("range");
    expect(view.violations[0].message).toContain("25000");
  });

  it("deduplicates backfill overlap on reconnect", () => {
    const once = reduceAll();
    let twice = reduceAll();
    for (const line of traceLines) {
      twice = applyEventLine(twice, line); // replay the whole backfill
    }
    expect(twice.events.length).toBe(once.events.length);
    expect(twice.executedSteps).toBe(once.executedSteps);
    expect(twice.violations.length).toBe(once.violations.length);
  });

  it("counts malformed lines without dropping the stream", () => {
    let view = emptyRunView("run-x");
    view = applyEventLine(view, "this is not json");
    view = applyEventLine(view, '{"not": "an event"}');
    view = applyEventLine(view, traceLines[0]);
    expect(view.malformedEvents).toBe(2);
    expect(view.events.length).toBe(1);
  });

  it("orders out-of-order arrivals by step index", () => {
    const events = traceLines.map((line) => JSON.parse(line) as TraceEvent);
    let view = emptyRunView("run-x");
    view = applyEvent(view, events[2]);
    view = applyEvent(view, events[0]);
    view = applyEvent(view, events[1]);
    expect(view.events.map((event) => event.t)).toEqual([0, 1, 2]);
    expect(view.currentState).toBe(events[2].state);
  });

  it("exposes the latest planner digest", () => {
    const view = reduceAll();
    const keys = digestKeys(view);
    expect(keys).toContain("plate_1");
    expect(keys).toContain("centrifuge_1");
  });
});
