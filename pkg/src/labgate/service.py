"""HTTP control plane: start runs, stream traces, broker clarifications.

Each run gets its own engine stepping in a worker thread; trace events are
fanned out through a per-run buffer with condition-variable wakeups, so a
subscriber always receives the full history (backfill) followed by live
events, each exactly once.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from starlette.staticfiles import StaticFiles

from .engine import Engine, StepOutcome
from .fsm import default_matrix
from .harness import build_engine, task_planner
from .planners import (
    PlannerScript,
    RemotePlanner,
    RemotePlannerConfig,
    ScriptedPlanner,
    inject_fault,
)
from .registry import serialize
from .simulator import snapshot
from .tasks import LoadedTask, Suite, TaskLoadError, bundled_suite_path, load_suite, task_from_json

TERMINAL_STATUSES = ("success", "halted", "failed")


class ServiceError(Exception):
    def __init__(self, kind: str, message: str, status_code: int):
        self.kind = kind
        self.message = message
        self.status_code = status_code
        super().__init__(message)


@dataclass
class RunRecord:
    run_id: str
    engine: Engine
    status: str = "running"
    created_at: float = field(default_factory=time.time)
    events: list[dict[str, Any]] = field(default_factory=list)
    cond: threading.Condition = field(default_factory=threading.Condition)
    thread: threading.Thread | None = None

    def to_json(self) -> dict[str, Any]:
        return {"run_id": self.run_id, "status": self.status, "created_at": self.created_at}


class RunManager:
    """Owns every live run; all cross-thread state is condition-guarded."""

    def __init__(
        self,
        suite: Suite,
        max_runs: int = 8,
        planner_backend: str = "scripted",
        trace_dir: str | Path | None = None,
    ):
        self.suite = suite
        self.max_runs = max_runs
        self.planner_backend = planner_backend
        self.trace_dir = Path(trace_dir) if trace_dir is not None else None
        self.runs: dict[str, RunRecord] = {}
        self._seq = 0
        self._lock = threading.Lock()

    # -- lifecycle ----------------------------------------------------

    def start_run(self, body: dict[str, Any]) -> RunRecord:
        with self._lock:
            active = sum(1 for r in self.runs.values() if r.status not in TERMINAL_STATUSES)
            if active >= self.max_runs:
                raise ServiceError("CapacityExceeded", "maximum concurrent runs reached", 429)
            self._seq += 1
            run_id = f"run-{self._seq}"

        try:
            task = task_from_json(body["task"])
            task.validate()
        except (KeyError, TypeError, ValueError, TaskLoadError) as exc:
            raise ServiceError("InvalidTask", f"task rejected: {exc}", 400) from exc

        planner_cfg = body.get("planner") or {}
        loaded = self._load_task(task, planner_cfg)
        planner = self._build_planner(loaded, planner_cfg)
        engine = build_engine(loaded, self.suite, planner)
        record = RunRecord(run_id=run_id, engine=engine)
        with self._lock:
            self.runs[run_id] = record
        record.thread = threading.Thread(target=self._drive, args=(record,), daemon=True)
        record.thread.start()
        return record

    def _load_task(self, task, planner_cfg) -> LoadedTask:
        fixture = {"labware": {}, "devices": []}
        if task.fixture:
            fixture_path = (self.suite.root / "tasks" / task.fixture).resolve()
            if not fixture_path.exists():
                fixture_path = (self.suite.root / task.fixture).resolve()
            try:
                fixture = json.loads(fixture_path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ServiceError("InvalidTask", f"fixture unavailable: {exc}", 400) from exc
        return LoadedTask(task=task, path=self.suite.root / "tasks" / f"{task.id}.json", fixture=fixture)

    def _build_planner(self, loaded: LoadedTask, cfg: dict[str, Any]):
        kind = cfg.get("kind", self.planner_backend)
        if kind == "remote":
            return RemotePlanner(
                RemotePlannerConfig(
                    endpoint=str(cfg.get("endpoint", "")), model=str(cfg.get("model", "default"))
                )
            )
        script_data = cfg.get("script")
        if script_data is not None:
            script = PlannerScript.from_json(script_data)
            for fault in loaded.task.faults:
                script = inject_fault(script, fault)
            return ScriptedPlanner(script)
        script_path = self.suite.root / "scripts" / f"{loaded.task.id}.json"
        if script_path.exists():
            loaded = LoadedTask(
                task=loaded.task,
                path=loaded.path,
                fixture=loaded.fixture,
                script=PlannerScript.from_json(script_path.read_text()),
            )
            return task_planner(loaded)
        raise ServiceError("InvalidTask", "no planner script available for task", 400)

    def _drive(self, record: RunRecord) -> None:
        engine = record.engine
        while not engine.terminal:
            try:
                outcome = engine.step()
            except Exception as exc:
                engine.fail(str(exc))
                break
            self._sync_events(record)
            if outcome is StepOutcome.AWAITING_CLARIFY:
                with record.cond:
                    record.status = "awaiting_clarification"
                    record.cond.notify_all()
                    while (
                        engine.pending_clarification() is not None
                        and not engine.halt_requested
                    ):
                        record.cond.wait(timeout=0.5)
                    record.status = "running"
                    record.cond.notify_all()
        self._sync_events(record)
        if self.trace_dir is not None:
            self.trace_dir.mkdir(parents=True, exist_ok=True)
            tmp = self.trace_dir / f".{record.run_id}.tmp"
            tmp.write_text(engine.trace_lines())
            tmp.replace(self.trace_dir / f"{record.run_id}.jsonl")
        with record.cond:
            if engine.outcome == "success":
                record.status = "success"
            elif engine.outcome == "failed":
                record.status = "failed"
            else:
                record.status = "halted"
            record.cond.notify_all()

    def _sync_events(self, record: RunRecord) -> None:
        with record.cond:
            have = len(record.events)
            fresh = record.engine.trace[have:]
            if fresh:
                record.events.extend(fresh)
                record.cond.notify_all()

    # -- queries --------------------------------------------------------

    def get(self, run_id: str) -> RunRecord:
        record = self.runs.get(run_id)
        if record is None:
            raise ServiceError("UnknownRun", f"no run {run_id!r}", 404)
        return record

    def stream(self, run_id: str) -> Iterator[dict[str, Any]]:
        """Backfill then live events, exactly once each, in order."""
        record = self.get(run_id)
        cursor = 0
        while True:
            with record.cond:
                while cursor >= len(record.events) and record.status not in TERMINAL_STATUSES:
                    record.cond.wait(timeout=0.5)
                chunk = record.events[cursor:]
                done = record.status in TERMINAL_STATUSES and cursor + len(chunk) >= len(
                    record.events
                )
            for event in chunk:
                yield event
            cursor += len(chunk)
            if done:
                return

    def answer(self, global_id: str, answer: str) -> RunRecord:
        run_id, _, local_id = global_id.rpartition(":")
        record = self.runs.get(run_id)
        if record is None:
            raise ServiceError("UnknownClarification", f"no clarification {global_id!r}", 404)
        clar = next(
            (c for c in record.engine.clarifications if c.clar_id == local_id), None
        )
        if clar is None:
            raise ServiceError("UnknownClarification", f"no clarification {global_id!r}", 404)
        with record.cond:
            if clar.answer is not None:
                raise ServiceError("AlreadyAnswered", "answer already recorded", 409)
            if clar.closed or record.status in TERMINAL_STATUSES:
                raise ServiceError(
                    "UnknownClarification", "run is no longer accepting answers", 404
                )
            record.engine.answer_clarification(local_id, answer)
            record.cond.notify_all()
        return record

    def pending_clarifications(self) -> list[dict[str, Any]]:
        out = []
        for record in self.runs.values():
            if record.status in TERMINAL_STATUSES:
                continue
            for clar in record.engine.clarifications:
                if clar.answer is None:
                    out.append(
                        {
                            "clar_id": f"{record.run_id}:{clar.clar_id}",
                            "run_id": record.run_id,
                            "question": clar.question,
                        }
                    )
        return out

    def halt(self, run_id: str) -> RunRecord:
        record = self.get(run_id)
        with record.cond:
            if record.status in TERMINAL_STATUSES:
                raise ServiceError("AlreadyTerminal", "run already terminal", 409)
            record.engine.request_halt()
            record.cond.notify_all()
        if record.thread is not None:
            record.thread.join(timeout=5.0)
        return record


def create_app(
    suite: Suite | None = None,
    max_runs: int = 8,
    planner_backend: str = "scripted",
    static_dir: str | Path | None = None,
    trace_dir: str | Path | None = None,
) -> FastAPI:
    suite = suite or load_suite(bundled_suite_path())
    manager = RunManager(
        suite, max_runs=max_runs, planner_backend=planner_backend, trace_dir=trace_dir
    )
    app = FastAPI(title="labgate control service")
    app.state.manager = manager

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": {"kind": exc.kind, "message": exc.message}},
        )

    @app.post("/runs")
    async def start_run(request: Request):
        body = await request.json()
        record = manager.start_run(body)
        return record.to_json()

    @app.get("/runs/{run_id}")
    async def get_run(run_id: str):
        record = manager.get(run_id)
        return record.to_json()

    @app.get("/runs/{run_id}/trace")
    async def stream_trace(run_id: str):
        manager.get(run_id)

        def generate():
            for event in manager.stream(run_id):
                yield f"data: {json.dumps(event, separators=(',', ':'))}\n\n"

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/runs/{run_id}/world")
    async def get_world(run_id: str):
        record = manager.get(run_id)
        serialized, digest = snapshot(record.engine.world)
        return {"state": json.loads(serialized), "hash": digest}

    @app.get("/clarifications")
    async def clarifications(pending: bool = True):
        return {"clarifications": manager.pending_clarifications() if pending else []}

    @app.post("/clarifications/{clar_id}/answer")
    async def answer_clarification(clar_id: str, request: Request):
        body = await request.json()
        answer = body.get("answer")
        if not isinstance(answer, str) or not answer:
            raise ServiceError("InvalidAnswer", "body must carry a non-empty answer string", 400)
        record = manager.answer(clar_id, answer)
        return {"ok": True, "run_id": record.run_id}

    @app.post("/runs/{run_id}/halt")
    async def halt_run(run_id: str):
        record = manager.halt(run_id)
        return record.to_json()

    @app.get("/registry")
    async def get_registry():
        return json.loads(serialize(suite.registry))

    @app.get("/fsm/matrix")
    async def get_matrix():
        return default_matrix().to_json()

    if static_dir is not None and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app
