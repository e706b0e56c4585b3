// Browser entry: wires the typed API client, the SSE reader, and the
// thin-client store to the DOM. No state is computed client-side; every
// rendered value comes from a service response or a trace event.

import { ApiClient, ServiceError } from "./api.js";
import { readSse } from "./sse.js";
import { applyEventLine, emptyRunView, type RunView } from "./store.js";
import { buildTimeline, classOf, codePhaseMilestones } from "./timeline.js";
import type { MatrixExport, RunStatus } from "./types.js";

const api = new ApiClient("");

let view: RunView = emptyRunView("");
let status: RunStatus | null = null;
let streamAbort: AbortController | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setNotice(text: string, isError = false): void {
  const notice = el<HTMLDivElement>("notice");
  notice.textContent = text;
  notice.className = isError ? "notice error" : "notice";
}

function renderStatus(): void {
  const badge = el<HTMLSpanElement>("status-badge");
  badge.textContent = status ?? "-";
  badge.className = `badge badge-${status ?? "none"}`;
  el<HTMLButtonElement>("halt-button").disabled =
    status === null || status === "success" || status === "halted" || status === "failed";
}

function renderSignals(): void {
  const host = el<HTMLDivElement>("signal-chips");
  host.replaceChildren();
  if (!view.signal) return;
  const entries: [string, string][] = [
    ["know", view.signal.know ? "on" : "off"],
    ["draft", view.signal.draft ? "on" : "off"],
    ["code", view.signal.code ? "on" : "off"],
    ["sci", view.signal.sci],
    ["phys", view.signal.phys],
    ["interlock", view.signal.interlock ? "RAISED" : "clear"],
  ];
  for (const [name, value] of entries) {
    const chip = document.createElement("span");
    chip.className = `chip chip-${value.toLowerCase()}`;
    chip.textContent = `${name}: ${value}`;
    host.appendChild(chip);
  }
}

function renderTimeline(): void {
  const host = el<HTMLOListElement>("timeline");
  host.replaceChildren();
  for (const node of buildTimeline(view.events)) {
    const item = document.createElement("li");
    item.className = `node node-${node.stateClass}${node.interlock ? " node-interlock" : ""}`;
    item.textContent = `t=${node.t} ${node.state}${node.label ? ` :: ${node.label}` : ""}`;
    if (node.executed) item.textContent += " ⚙";
    host.appendChild(item);
  }
  if (view.malformedEvents > 0) {
    const item = document.createElement("li");
    item.className = "node node-error";
    item.textContent = `${view.malformedEvents} malformed event(s) skipped`;
    host.appendChild(item);
  }
  el<HTMLDivElement>("milestones").textContent = codePhaseMilestones(view.events).join(" → ");
  host.scrollTop = host.scrollHeight;
}

function renderViolations(): void {
  const host = el<HTMLUListElement>("violations");
  host.replaceChildren();
  for (const violation of view.violations) {
    const item = document.createElement("li");
    item.textContent = `[${violation.kind}] op ${violation.op_index}: ${violation.message}`;
    host.appendChild(item);
  }
}

function renderMatrix(matrix: MatrixExport): void {
  const host = el<HTMLTableSectionElement>("matrix-body");
  host.replaceChildren();
  for (const rule of matrix.rules) {
    const row = document.createElement("tr");
    const condition = Object.entries(rule.condition)
      .map(([key, value]) => (typeof value === "boolean" ? (value ? key : `!${key}`) : `${key}=${value}`))
      .join(" & ");
    row.innerHTML = `<td>${rule.priority}</td><td>${condition}</td><td></td>`;
    const target = row.lastElementChild as HTMLTableCellElement;
    target.textContent = rule.target;
    target.className = `state-cell state-${classOf(rule.target)}`;
    row.dataset.target = rule.target;
    host.appendChild(row);
  }
  const fallback = document.createElement("tr");
  fallback.innerHTML = `<td>∞</td><td>fallback</td><td class="state-cell state-terminal">${matrix.fallback}</td>`;
  fallback.dataset.target = matrix.fallback;
  host.appendChild(fallback);
  highlightMatrix();
}

function highlightMatrix(): void {
  const rows = el<HTMLTableSectionElement>("matrix-body").querySelectorAll("tr");
  rows.forEach((row) => {
    row.classList.toggle("current", row.dataset.target === view.currentState);
  });
}

async function renderWorld(): Promise<void> {
  if (!view.runId) return;
  try {
    const world = await api.getWorld(view.runId);
    el<HTMLPreElement>("world-panel").textContent = JSON.stringify(world.state, null, 2);
    el<HTMLSpanElement>("world-hash").textContent = world.hash.slice(0, 16);
  } catch {
    // world endpoint is best-effort while a run is mid-flight
  }
}

async function renderClarifications(): Promise<void> {
  const host = el<HTMLUListElement>("clarify-inbox");
  let pending;
  try {
    pending = await api.pendingClarifications();
  } catch (error) {
    setNotice(`clarifications unavailable: ${String(error)}; retry shortly`, true);
    return;
  }
  host.replaceChildren();
  el<HTMLSpanElement>("clarify-count").textContent = String(pending.length);
  for (const item of pending) {
    const li = document.createElement("li");
    const question = document.createElement("span");
    question.textContent = `[${item.run_id}] ${item.question} `;
    const input = document.createElement("input");
    input.placeholder = "answer";
    const button = document.createElement("button");
    button.textContent = "answer";
    button.addEventListener("click", async () => {
      if (!input.value) return;
      try {
        await api.answerClarification(item.clar_id, input.value);
        setNotice(`answered ${item.clar_id}`);
      } catch (error) {
        if (error instanceof ServiceError && error.kind === "AlreadyAnswered") {
          setNotice(`conflict: ${item.clar_id} was already answered`, true);
        } else {
          setNotice(String(error), true);
        }
      }
      void renderClarifications();
    });
    li.append(question, input, button);
    host.appendChild(li);
  }
}

function renderAll(): void {
  el<HTMLSpanElement>("run-id-label").textContent = view.runId || "-";
  renderStatus();
  renderSignals();
  renderTimeline();
  renderViolations();
  highlightMatrix();
}

async function pollStatus(): Promise<void> {
  if (!view.runId) return;
  try {
    const handle = await api.getRun(view.runId);
    status = handle.status;
  } catch {
    return;
  }
  renderStatus();
}

async function watchRun(runId: string): Promise<void> {
  streamAbort?.abort();
  streamAbort = new AbortController();
  view = emptyRunView(runId);
  status = null;
  renderAll();
  await pollStatus();
  try {
    for await (const line of readSse(api.traceUrl(runId), { signal: streamAbort.signal })) {
      view = applyEventLine(view, line);
      renderAll();
      if (view.signal?.clarify_pending) {
        void renderClarifications();
      }
      void pollStatus();
    }
    setNotice(`stream for ${runId} ended`);
    void pollStatus();
    void renderWorld();
  } catch (error) {
    if (!streamAbort.signal.aborted) {
      setNotice(`stream dropped (${String(error)}); reconnecting...`, true);
      setTimeout(() => void watchRun(runId), 1000);
    }
  }
}

function wire(): void {
  el<HTMLButtonElement>("watch-button").addEventListener("click", () => {
    const runId = el<HTMLInputElement>("run-id-input").value.trim();
    if (runId) void watchRun(runId);
  });
  el<HTMLButtonElement>("halt-button").addEventListener("click", async () => {
    if (!view.runId) return;
    if (!window.confirm(`Halt run ${view.runId}? Execution stops at the next step boundary.`)) {
      return;
    }
    try {
      await api.haltRun(view.runId);
      setNotice(`halt requested for ${view.runId}`);
    } catch (error) {
      if (error instanceof ServiceError && error.kind === "AlreadyTerminal") {
        setNotice(`run ${view.runId} already finished`, true);
      } else {
        setNotice(String(error), true);
      }
    }
    void pollStatus();
  });
  el<HTMLButtonElement>("clarify-refresh").addEventListener("click", () => {
    void renderClarifications();
  });
  void api
    .getMatrix()
    .then(renderMatrix)
    .catch((error) => setNotice(`matrix unavailable: ${String(error)}`, true));
  void renderClarifications();
  window.setInterval(() => void renderClarifications(), 3000);
  window.setInterval(() => void renderWorld(), 3000);
}

wire();

export { watchRun };
