// Typed client over the documented control-service endpoints. Nothing
// here is console-specific: any caller with fetch can drive a run.

import type {
  MatrixExport,
  PendingClarification,
  RunHandle,
  ServiceErrorBody,
  WorldSnapshot,
} from "./types.js";

export class ServiceError extends Error {
  readonly kind: string;
  readonly status: number;

  constructor(kind: string, message: string, status: number) {
    super(message);
    this.kind = kind;
    this.status = status;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let kind = "HttpError";
      let message = `${method} ${path} -> ${response.status}`;
      try {
        const parsed = (await response.json()) as ServiceErrorBody;
        kind = parsed.error.kind;
        message = parsed.error.message;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ServiceError(kind, message, response.status);
    }
    return (await response.json()) as T;
  }

  startRun(task: unknown, planner?: unknown): Promise<RunHandle> {
    return this.request<RunHandle>("POST", "/runs", { task, planner });
  }

  getRun(runId: string): Promise<RunHandle> {
    return this.request<RunHandle>("GET", `/runs/${encodeURIComponent(runId)}`);
  }

  async pendingClarifications(): Promise<PendingClarification[]> {
    const body = await this.request<{ clarifications: PendingClarification[] }>(
      "GET",
      "/clarifications?pending=true",
    );
    return body.clarifications;
  }

  answerClarification(clarId: string, answer: string): Promise<{ ok: boolean }> {
    return this.request("POST", `/clarifications/${encodeURIComponent(clarId)}/answer`, {
      answer,
    });
  }

  haltRun(runId: string): Promise<RunHandle> {
    return this.request<RunHandle>("POST", `/runs/${encodeURIComponent(runId)}/halt`);
  }

  getMatrix(): Promise<MatrixExport> {
    return this.request<MatrixExport>("GET", "/fsm/matrix");
  }

  getWorld(runId: string): Promise<WorldSnapshot> {
    return this.request<WorldSnapshot>("GET", `/runs/${encodeURIComponent(runId)}/world`);
  }

  traceUrl(runId: string): string {
    return `${this.baseUrl}/runs/${encodeURIComponent(runId)}/trace`;
  }
}
