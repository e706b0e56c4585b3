// Timeline render model: one node per step, colored by state class, with
// interlock flags, plus the milestone view matching the published
// correction-trajectory figures (design/rectify/terminal states only).

import type { TraceEvent } from "./types.js";

export type StateClass = "design" | "verify" | "rectify" | "terminal" | "control";

export interface TimelineNode {
  t: number;
  state: string;
  stateClass: StateClass;
  interlock: boolean;
  executed: boolean;
  label: string;
  error: boolean;
}

const DESIGN = new Set(["DESIGN_DRAFT", "DESIGN_CODE"]);
const VERIFY = new Set(["VERIFY_DRAFT", "VERIFY_CODE", "APPROVED"]);
const RECTIFY = new Set(["RECTIFY_DRAFT", "RECTIFY_CODE"]);
const TERMINAL = new Set(["SUCCESS", "HALT"]);

export function classOf(state: string): StateClass {
  if (DESIGN.has(state)) return "design";
  if (VERIFY.has(state)) return "verify";
  if (RECTIFY.has(state)) return "rectify";
  if (TERMINAL.has(state)) return "terminal";
  return "control";
}

function labelOf(event: TraceEvent): string {
  if (event.action) {
    return event.action.kind;
  }
  if (event.verdict) {
    return `${event.verdict.layer} ${event.verdict.passed ? "pass" : "fail"}`;
  }
  return event.note ?? "";
}

export function buildTimeline(events: TraceEvent[]): TimelineNode[] {
  return events.map((event) => ({
    t: event.t,
    state: event.state,
    stateClass: classOf(event.state),
    interlock: event.signal.interlock,
    executed: event.executed,
    label: labelOf(event),
    error: false,
  }));
}

export function errorNode(t: number): TimelineNode {
  return {
    t,
    state: "?",
    stateClass: "control",
    interlock: false,
    executed: false,
    label: "malformed event",
    error: true,
  };
}

// The cognitive milestones of a run: the sequence shown by the published
// correction figures (code-phase design/rectify states plus the terminal).
export function codePhaseMilestones(events: TraceEvent[]): string[] {
  const wanted = new Set(["DESIGN_CODE", "RECTIFY_CODE", "SUCCESS", "HALT"]);
  return events.filter((event) => wanted.has(event.state)).map((event) => event.state);
}
