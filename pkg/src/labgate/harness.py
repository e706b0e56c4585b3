"""Benchmark execution, compliance auditing, and the adversarial suite.

run_benchmark executes every suite task in an isolated engine (fresh
world, memory, trajectory) and assembles per-task metric reports plus
per-subset aggregates, written atomically as deterministic JSON.

audit_executed_ops is the independent check behind the safety guarantee:
it re-verifies every op committed to a world's event log against the
registry, so nothing the engine believed is trusted.
"""

from __future__ import annotations

import json
import os
import random
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import simulator as sim
from ._kernels import BACKEND
from .engine import Engine, EngineConfig, bind_run_symbols
from .fsm import ActionKind, DecisionMatrix
from .grounding import SymbolEntry, WorkingMemory, payload_tokens, project
from .metrics import MetricsReport, detect_loop, score_code, score_rouge_l, score_semantic
from .planners import (
    FaultSpec,
    PlannerScript,
    ScriptStep,
    ScriptedPlanner,
    SymbolicAction,
    inject_fault,
)
from .registry import HardwareRegistry
from .tasks import LoadedTask, Suite
from .verify import ProtocolCode, ProtocolOp, RubricJudge, verify_physical
from .violations import Violation


def build_engine(
    loaded: LoadedTask,
    suite: Suite,
    planner: Any,
    matrix: DecisionMatrix | None = None,
    config: EngineConfig | None = None,
) -> Engine:
    """Fresh, isolated engine for one task run."""
    task = loaded.task
    return Engine(
        registry=suite.registry,
        world=sim.LabWorld.from_fixture(loaded.fixture),
        planner=planner,
        rubric=task.rubric,
        judge=RubricJudge(),
        matrix=matrix,
        knowledge=suite.knowledge.subset(list(task.knowledge_refs)),
        intent=task.intent,
        context_symbols=list(task.context_symbols),
        order_rules=task.code_order_rules,
        config=config,
    )


def task_planner(loaded: LoadedTask, rectify: bool = True) -> ScriptedPlanner:
    """Scripted planner for a task, with its declared faults injected.

    rectify=False strips the feedback-guarded correction steps and makes
    the script repeat its last action forever: the degenerate planner that
    retries the same faulty emission.
    """
    if loaded.script is None:
        raise ValueError(f"task {loaded.task.id!r} has no planner script")
    script = loaded.script
    for fault in loaded.task.faults:
        script = inject_fault(script, fault)
    if not rectify:
        script = degenerate_script(script)
    return ScriptedPlanner(script)


def degenerate_script(script: PlannerScript) -> PlannerScript:
    """Drop rectification steps and loop the final action forever."""
    steps = tuple(s for s in script.steps if not s.expect_feedback)
    return PlannerScript(steps=steps, on_exhausted="repeat_last")


def compute_metrics(loaded: LoadedTask, suite: Suite, engine: Engine, result) -> MetricsReport:
    task = loaded.task
    draft = engine.final_draft()
    draft_text = draft.full_text() if draft is not None else ""
    s_sem = score_semantic(draft_text, task.rubric.keyword_groups)
    rouge = score_rouge_l(draft_text, task.ground_truth.draft_reference)
    if draft is not None:
        _, _, c_s = RubricJudge().evaluate(draft, task.rubric)
    else:
        c_s = 0.0

    gt = task.ground_truth.code_ops
    pred = None if engine.code_parse_failed() else engine.final_code()
    if gt is not None:
        scoring_world = sim.LabWorld.from_fixture(loaded.fixture)
        scores = score_code(pred, gt, suite.registry, engine.memory, world=scoring_world)
        c_p, acc_seq, acc_param, s_code = scores.c_p, scores.acc_seq, scores.acc_param, scores.s_code
    else:
        c_p = acc_seq = acc_param = s_code = 0.0

    return MetricsReport(
        s_sem=s_sem,
        rouge_l=rouge,
        c_s=c_s,
        c_p=c_p,
        s_code=s_code,
        acc_seq=acc_seq,
        acc_param=acc_param,
        success=result.outcome == "success" and len(result.protocol) > 0,
        loop_rate_flag=detect_loop(result.trace),
        tokens_in=result.tokens_in,
        tokens_out=result.tokens_out,
        wall_time_s=result.sim_clock_s,
    )


def compression_stats(registry: HardwareRegistry) -> dict[str, Any]:
    """Context-compression figures on the full device-schema payload set."""
    memory = bind_run_symbols(registry, "compression probe", [])
    raw = payload_tokens(memory)
    digest = project(memory).token_count
    return {
        "raw_payload_tokens": raw,
        "digest_tokens": digest,
        "ratio": round(raw / digest, 2) if digest else 0.0,
    }


def run_benchmark(
    suite: Suite,
    rectify: bool = True,
    matrix: DecisionMatrix | None = None,
    config: EngineConfig | None = None,
    out_path: str | Path | None = None,
) -> dict[str, Any]:
    """One isolated run per task; per-task reports plus subset aggregates."""
    rows: list[dict[str, Any]] = []
    for loaded in suite.tasks:
        loaded.task.validate()
        try:
            planner = task_planner(loaded, rectify=rectify)
            engine = build_engine(loaded, suite, planner, matrix=matrix, config=config)
            result = engine.run()
            report = compute_metrics(loaded, suite, engine, result)
            rows.append(
                {
                    "id": loaded.task.id,
                    "subset": loaded.task.subset,
                    "outcome": result.outcome,
                    "metrics": report.to_json(),
                }
            )
        except Exception as exc:  # task failures never abort the batch
            rows.append(
                {
                    "id": loaded.task.id,
                    "subset": loaded.task.subset,
                    "outcome": "error",
                    "error": str(exc),
                    "metrics": MetricsReport(
                        s_sem=0.0,
                        rouge_l=0.0,
                        c_s=0.0,
                        c_p=0.0,
                        s_code=0.0,
                        acc_seq=0.0,
                        acc_param=0.0,
                        success=False,
                        loop_rate_flag=False,
                        tokens_in=0,
                        tokens_out=0,
                        wall_time_s=0.0,
                    ).to_json(),
                }
            )

    report = {
        "suite": suite.name,
        "kernel_backend": BACKEND,
        "compression": compression_stats(suite.registry),
        "tasks": rows,
        "aggregates": aggregate(rows),
    }
    if out_path is not None:
        write_report(report, out_path)
    return report


_MEAN_METRICS = ("s_sem", "rouge_l", "c_s", "c_p", "s_code", "acc_seq", "acc_param")


def aggregate(rows: list[dict[str, Any]]) -> dict[str, Any]:
    """Per-subset means, success %, loop-rate %; recomputable from rows."""
    out: dict[str, Any] = {}
    subsets = sorted({row["subset"] for row in rows})
    for subset in subsets + ["all"]:
        group = [r for r in rows if subset == "all" or r["subset"] == subset]
        if not group:
            continue
        n = len(group)
        entry: dict[str, Any] = {"tasks": n}
        for name in _MEAN_METRICS:
            entry[name] = round(sum(r["metrics"][name] for r in group) / n, 6)
        entry["success_pct"] = round(100.0 * sum(r["metrics"]["success"] for r in group) / n, 2)
        entry["loop_rate_pct"] = round(
            100.0 * sum(r["metrics"]["loop_rate_flag"] for r in group) / n, 2
        )
        entry["tokens_in"] = sum(r["metrics"]["tokens_in"] for r in group)
        entry["tokens_out"] = sum(r["metrics"]["tokens_out"] for r in group)
        out[subset] = entry
    return out


def write_report(report: dict[str, Any], out_path: str | Path) -> None:
    """Atomic write: temp file then rename."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            json.dump(report, handle, indent=2, sort_keys=True)
            handle.write("\n")
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_table(report: dict[str, Any]) -> str:
    """Plain-text result table for the console."""
    lines = []
    header = f"{'task':<28}{'subset':<8}{'succ':<6}{'loop':<6}{'s_code':<8}{'c_p':<8}{'s_sem':<8}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in report["tasks"]:
        m = row["metrics"]
        lines.append(
            f"{row['id']:<28}{row['subset']:<8}"
            f"{'yes' if m['success'] else 'NO':<6}"
            f"{'YES' if m['loop_rate_flag'] else 'no':<6}"
            f"{m['s_code']:<8.3f}{m['c_p']:<8.3f}{m['s_sem']:<8.3f}"
        )
    lines.append("")
    comp = report["compression"]
    lines.append(
        f"context compression: raw={comp['raw_payload_tokens']} tokens, "
        f"digest={comp['digest_tokens']} tokens, ratio={comp['ratio']}x "
        f"(kernels: {report['kernel_backend']})"
    )
    for subset, agg in report["aggregates"].items():
        lines.append(
            f"subset {subset}: success {agg['success_pct']}%, loop rate {agg['loop_rate_pct']}%, "
            f"mean s_code {agg['s_code']}"
        )
    return "\n".join(lines)


# --- compliance audit -------------------------------------------------------


def audit_executed_ops(
    event_log: list[dict[str, Any]],
    registry: HardwareRegistry,
    memory: WorkingMemory,
) -> list[Violation]:
    """Re-verify every committed op against the registry, independently of
    whatever the engine concluded during the run."""
    violations: list[Violation] = []
    for entry in event_log:
        raw = entry["op"] if "op" in entry else entry
        op = ProtocolOp(
            device_id=str(raw["device_id"]),
            op_name=str(raw["op_name"]),
            params={k: (v[0], v[1]) for k, v in raw.get("params", {}).items()},
            targets=tuple(raw.get("targets", [])),
        )
        report = verify_physical(ProtocolCode(ops=(op,)), registry, memory, world=None)
        violations.extend(report.violations)
    return violations


def audit_trace_gating(trace: list[dict[str, Any]]) -> list[str]:
    """Trace-level interlock audit.

    For every event that executed ops, there must be a passing physical
    verdict for the exact working revision: a VERIFY_CODE pass after the
    last code emission and before the dispatch, with no emission in
    between. Returns the defects found (empty means the gate held).
    """
    defects: list[str] = []
    last_emission_t = -1
    last_pass_t = -1
    for event in trace:
        action = event.get("action") or {}
        if event["state"] in ("DESIGN_CODE", "RECTIFY_CODE") and action.get("kind") == "EmitCode":
            last_emission_t = event["t"]
        verdict = event.get("verdict")
        if event["state"] == "VERIFY_CODE" and verdict is not None:
            if verdict.get("passed"):
                last_pass_t = event["t"]
        if event.get("executed"):
            if last_pass_t < 0:
                defects.append(f"t={event['t']}: execution with no physical pass on record")
            elif last_emission_t > last_pass_t:
                defects.append(
                    f"t={event['t']}: revision emitted at t={last_emission_t} "
                    f"executed with stale pass from t={last_pass_t}"
                )
    return defects


# --- adversarial episodes ---------------------------------------------------

_ADVERSARIAL_FIXTURE = {
    "labware": {
        "trough_1": {"type": "trough", "volume_ul": 10000.0},
        "plate_1": {"type": "plate", "wells": {"A1": 0.0, "B1": 0.0}},
    },
    "devices": ["pipettor_p300", "centrifuge_1", "plate_sealer_1", "incubator_37"],
}

_ADVERSARIAL_SYMBOLS = [
    {"key": "trough_1", "kind": "labware", "brief": "reagent trough", "payload": {"labware": "trough_1"}},
    {"key": "plate_1", "kind": "labware", "brief": "96 well plate", "payload": {"labware": "plate_1"}},
]


@dataclass
class AdversarialOutcome:
    episode: int
    fault_type: str
    outcome: str
    executed_ops: list[dict[str, Any]]
    audit_violations: list[Violation]
    rectify_steps: int
    trace: list[dict[str, Any]] = field(default_factory=list)
    runtime_failures: int = 0


def _compliant_ops(rng: random.Random, registry: HardwareRegistry) -> list[dict[str, Any]]:
    """A small protocol guaranteed compliant with the bundled registry."""
    volume = rng.randint(20, 300)
    speed = rng.randint(100, 15000)
    duration = rng.randint(10, 600)
    temp = rng.randint(20, 80)
    ops = [
        {
            "device_id": "pipettor_p300",
            "op_name": "transfer",
            "params": {
                "source": ["trough_1", ""],
                "dest": ["plate_1", ""],
                "volume": [volume, "uL"],
                "dest_well": ["A1", ""],
            },
            "targets": [],
        },
        {
            "device_id": "plate_sealer_1",
            "op_name": "seal_plate",
            "params": {"seal_type": ["foil", ""]},
            "targets": ["plate_1"],
        },
        {
            "device_id": "centrifuge_1",
            "op_name": "centrifuge",
            "params": {"speed": [speed, "g"], "duration": [duration, "s"]},
            "targets": ["plate_1"],
        },
        {
            "device_id": "incubator_37",
            "op_name": "incubate",
            "params": {"temperature": [temp, "C"], "duration": [duration, "s"]},
            "targets": ["plate_1"],
        },
    ]
    return ops


def _random_fault(rng: random.Random, kind: str) -> FaultSpec:
    if kind == "param_overrange":
        over = rng.choice(
            [
                ("speed", rng.randint(15001, 80000), "g"),
                ("volume", rng.randint(301, 5000), "uL"),
                ("temperature", rng.randint(81, 500), "C"),
            ]
        )
        return FaultSpec(step=2, type=kind, param=over[0], value=over[1], unit=over[2])
    if kind == "unknown_symbol":
        ghost = f"ghost_{rng.randint(1, 999)}"
        symbol = rng.choice(["plate_1", "trough_1"])
        return FaultSpec(step=2, type=kind, symbol=symbol, replacement=ghost)
    return FaultSpec(step=2, type="order_swap", swap=(0, 1))


def adversarial_episode(
    episode: int,
    registry: HardwareRegistry,
    seed: int = 0,
    matrix: DecisionMatrix | None = None,
) -> AdversarialOutcome:
    """One randomized fault-injection episode through the full engine."""
    rng = random.Random((seed << 20) ^ episode)
    fault_kind = ("param_overrange", "unknown_symbol", "order_swap")[episode % 3]
    fault = _random_fault(rng, fault_kind)

    ops = _compliant_ops(rng, registry)
    draft = {
        "title": "bench protocol",
        "steps": [
            {"title": "transfer sample", "rationale": "move liquid to the assay plate"},
            {"title": "seal and spin", "rationale": "seal then centrifuge to settle"},
        ],
    }
    code_payload = {"schema_version": "1", "ops": ops}
    script = PlannerScript(
        steps=(
            ScriptStep(SymbolicAction(kind=ActionKind.RETRIEVE_KNOWLEDGE, query="bench prep")),
            ScriptStep(SymbolicAction(kind=ActionKind.EMIT_DRAFT, draft=draft)),
            ScriptStep(SymbolicAction(kind=ActionKind.EMIT_CODE, code=code_payload)),
            ScriptStep(
                SymbolicAction(kind=ActionKind.EMIT_CODE, code=code_payload),
                expect_feedback=True,
            ),
        )
    )
    script = inject_fault(script, fault)

    engine = Engine(
        registry=registry,
        world=sim.LabWorld.from_fixture(_ADVERSARIAL_FIXTURE),
        planner=ScriptedPlanner(script),
        matrix=matrix,
        intent="adversarial bench episode",
        context_symbols=[
            SymbolEntry(
                key=raw["key"], payload=raw["payload"], kind=raw["kind"], brief=raw["brief"]
            )
            for raw in _ADVERSARIAL_SYMBOLS
        ],
        order_rules=(("transfer", "seal_plate"),),
    )
    result = engine.run()
    audit = audit_executed_ops(
        [e.to_json() for e in engine.world.event_log], registry, engine.memory
    )
    return AdversarialOutcome(
        episode=episode,
        fault_type=fault_kind,
        outcome=result.outcome,
        executed_ops=[e.to_json() for e in engine.world.event_log],
        audit_violations=audit,
        rectify_steps=engine.rectify_steps,
        trace=result.trace,
        runtime_failures=len(engine.world.failures),
    )


def run_adversarial_suite(
    episodes: int,
    registry: HardwareRegistry,
    seed: int = 0,
    matrix: DecisionMatrix | None = None,
) -> dict[str, Any]:
    """The randomized safety suite behind the interlock guarantee."""
    total_violations = 0
    violating_episodes = 0
    corrections = 0
    successes = 0
    runtime_failures = 0
    gating_defects = 0
    for episode in range(episodes):
        outcome = adversarial_episode(episode, registry, seed=seed, matrix=matrix)
        if outcome.audit_violations:
            violating_episodes += 1
            total_violations += len(outcome.audit_violations)
        if outcome.rectify_steps > 0 and outcome.outcome == "success":
            corrections += 1
        if outcome.outcome == "success":
            successes += 1
        runtime_failures += outcome.runtime_failures
        if matrix is None or matrix.enforce_gate:
            gating_defects += len(audit_trace_gating(outcome.trace))
    return {
        "episodes": episodes,
        "violating_executed_ops": total_violations,
        "violating_episodes": violating_episodes,
        "corrections": corrections,
        "successes": successes,
        "runtime_failures": runtime_failures,
        "trace_gating_defects": gating_defects,
    }
