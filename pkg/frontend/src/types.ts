// Wire types for the control-service endpoints. Field names mirror the
// service's JSON exactly; the console performs no inference over them.

export type TriState = "unset" | "pass" | "fail";

export interface SignalVector {
  know: boolean;
  draft: boolean;
  code: boolean;
  sci: TriState;
  phys: TriState;
  interlock: boolean;
  clarify_pending: boolean;
}

export interface Verdict {
  layer: "scientific" | "physical";
  passed: boolean;
  violations: ViolationRecord[];
  checked_constraints: number;
}

export interface ViolationRecord {
  op_index: number;
  constraint_path: string;
  kind: string;
  observed: string;
  limit: string;
  message: string;
}

export interface TraceEvent {
  t: number;
  state: string;
  signal: SignalVector;
  action: { kind: string; payload: unknown } | null;
  verdict: Verdict | null;
  executed: boolean;
  tokens: { in: number; out: number };
  digest?: string[];
  note?: string;
  feedback?: string;
}

export type RunStatus =
  | "running"
  | "awaiting_clarification"
  | "success"
  | "halted"
  | "failed";

export interface RunHandle {
  run_id: string;
  status: RunStatus;
  created_at: number;
}

export interface PendingClarification {
  clar_id: string;
  run_id: string;
  question: string;
}

export interface MatrixRule {
  priority: number;
  condition: Record<string, boolean | string>;
  target: string;
}

export interface MatrixExport {
  rules: MatrixRule[];
  fallback: string;
  enforce_gate: boolean;
}

export interface WorldSnapshot {
  state: unknown;
  hash: string;
}

export interface ServiceErrorBody {
  error: { kind: string; message: string };
}
