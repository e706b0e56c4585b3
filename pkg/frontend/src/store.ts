// Thin-client run view: every displayed value is copied from a received
// trace event, never computed. Reconnects are safe because events are
// deduplicated by step index against the service's backfill.

import type { SignalVector, TraceEvent, ViolationRecord } from "./types.js";

export interface RunView {
  runId: string;
  events: TraceEvent[];
  currentState: string | null;
  signal: SignalVector | null;
  violations: ViolationRecord[];
  executedSteps: number;
  malformedEvents: number;
}

export function emptyRunView(runId: string): RunView {
  return {
    runId,
    events: [],
    currentState: null,
    signal: null,
    violations: [],
    executedSteps: 0,
    malformedEvents: 0,
  };
}

function isTraceEvent(value: unknown): value is TraceEvent {
  if (typeof value !== "object" || value === null) {
    return false;
  }
  const event = value as Partial<TraceEvent>;
  return typeof event.t === "number" && typeof event.state === "string" && !!event.signal;
}

export function applyEventLine(view: RunView, line: string): RunView {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    return { ...view, malformedEvents: view.malformedEvents + 1 };
  }
  if (!isTraceEvent(parsed)) {
    return { ...view, malformedEvents: view.malformedEvents + 1 };
  }
  return applyEvent(view, parsed);
}

export function applyEvent(view: RunView, event: TraceEvent): RunView {
  if (view.events.some((seen) => seen.t === event.t)) {
    return view; // backfill overlap after a reconnect
  }
  const events = [...view.events, event].sort((a, b) => a.t - b.t);
  const latest = events[events.length - 1];
  const violations = [...view.violations];
  if (event.verdict && !event.verdict.passed) {
    violations.push(...event.verdict.violations);
  }
  return {
    ...view,
    events,
    currentState: latest.state,
    signal: latest.signal,
    violations,
    executedSteps: view.executedSteps + (event.executed ? 1 : 0),
  };
}

export function digestKeys(view: RunView): string[] {
  for (let i = view.events.length - 1; i >= 0; i -= 1) {
    const digest = view.events[i].digest;
    if (digest !== undefined) {
      return digest;
    }
  }
  return [];
}
