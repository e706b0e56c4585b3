"""FSM-gated execution engine.

One engine instance drives one run: each step computes the state from the
signal vector via the decision matrix, lets the planner act where the
mask allows, verifies artifacts in the verify states, and only dispatches
physical execution from APPROVED through the interlock gate.

Rectification round-trips through design: a rectify step shows the
planner the violation report and takes its revised emission as a staged
proposal, retracting the rejected artifact; the following design step
commits the staged revision as the new working artifact. Traces therefore
reproduce the published correction trajectory
DESIGN_CODE -> RECTIFY_CODE -> DESIGN_CODE -> SUCCESS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

from . import simulator as sim
from .errors import LabgateError
from .fsm import (
    ActionKind,
    DecisionMatrix,
    ExecutionDecision,
    FsmState,
    SignalVector,
    TERMINAL_STATES,
    Verdict,
    allowed_actions,
    clear_artifact,
    default_matrix,
    gate_execution,
    transition,
)
from .grounding import (
    GroundedAction,
    GroundingError,
    SymbolEntry,
    WorkingMemory,
    count_tokens,
    project,
    resolve,
)
from .memory import KnowledgeDoc, KnowledgeStore, Trajectory, TrajectoryEntry
from .planners import (
    PlannerContext,
    PlannerError,
    PromptTemplate,
    SymbolicAction,
    render_prompt,
)
from .registry import HardwareRegistry, device_to_json
from .verify import (
    CodeParseError,
    ProtocolCode,
    ProtocolDraft,
    Rubric,
    RubricJudge,
    ScientificJudge,
    VerificationReport,
    Violation,
    parse_code,
    parse_draft,
    signals_from,
    verify_physical,
    verify_scientific,
)


class StepOutcome(str, Enum):
    CONTINUE = "continue"
    AWAITING_CLARIFY = "awaiting_clarify"
    TERMINAL = "terminal"


class EngineStateError(LabgateError):
    pass


@dataclass
class Clarification:
    clar_id: str
    question: str
    answer: str | None = None
    closed: bool = False  # run terminated before an answer arrived


@dataclass(frozen=True)
class EngineConfig:
    t_max: int = 50
    history_window: int = 10
    retrieve_k: int = 3
    clarify_enabled: bool = True
    skip_verification: bool = False  # the w/o-Verification ablation


@dataclass
class RunResult:
    outcome: str
    final_state: str
    steps: int
    protocol: list[dict[str, Any]]
    trace: list[dict[str, Any]]
    tokens_in: int
    tokens_out: int
    sim_clock_s: float
    error: str | None = None


class Engine:
    """Sequential, single-writer execution of one task episode."""

    def __init__(
        self,
        registry: HardwareRegistry,
        world: sim.LabWorld,
        planner: Any,
        rubric: Rubric | None = None,
        judge: ScientificJudge | None = None,
        matrix: DecisionMatrix | None = None,
        knowledge: KnowledgeStore | None = None,
        intent: str = "",
        context_symbols: list[SymbolEntry] | None = None,
        order_rules: tuple[tuple[str, str], ...] = (),
        config: EngineConfig | None = None,
        template: PromptTemplate | None = None,
    ):
        self.registry = registry
        self.world = world
        self.planner = planner
        self.rubric = rubric or Rubric()
        self.judge = judge or RubricJudge()
        self.matrix = matrix or default_matrix()
        self.knowledge_store = knowledge or KnowledgeStore()
        self.order_rules = order_rules
        self.config = config or EngineConfig()
        self.template = template or PromptTemplate()

        self.memory = bind_run_symbols(registry, intent, context_symbols or [])

        self.trajectory = Trajectory()
        self.signal = SignalVector()
        self.state = FsmState.INIT
        self.t = 0
        self.trace: list[dict[str, Any]] = []
        self.tokens_in = 0
        self.tokens_out = 0

        self._draft: ProtocolDraft | None = None
        self._code: ProtocolCode | None = None
        self._code_parse_failed = False
        self._last_code_payload: Any = None
        self._staged: SymbolicAction | None = None
        self._feedback: VerificationReport | None = None
        self._retrieved: tuple[KnowledgeDoc, ...] = ()
        self._executed: list[GroundedAction] = []
        self._halt_requested = False
        self._outcome: str | None = None
        self._error: str | None = None
        self._clar_seq = 0
        self.clarifications: list[Clarification] = []
        self.rectify_steps = 0

    # -- public surface ------------------------------------------------

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    @property
    def outcome(self) -> str | None:
        return self._outcome

    def request_halt(self) -> None:
        """Operator halt, honored at the next step boundary."""
        self._halt_requested = True

    def fail(self, message: str) -> None:
        """Record an external failure and close the run safely."""
        self._error = message
        if not self.terminal:
            self._terminate(FsmState.HALT, "failed")

    @property
    def error(self) -> str | None:
        return self._error

    @property
    def halt_requested(self) -> bool:
        return self._halt_requested

    def pending_clarification(self) -> Clarification | None:
        for clar in self.clarifications:
            if clar.answer is None and not clar.closed:
                return clar
        return None

    def answer_clarification(self, clar_id: str, answer: str) -> None:
        clar = next((c for c in self.clarifications if c.clar_id == clar_id), None)
        if clar is None:
            raise EngineStateError(f"unknown clarification {clar_id!r}")
        if clar.answer is not None:
            raise EngineStateError(f"clarification {clar_id!r} already answered")
        if clar.closed:
            raise EngineStateError(f"clarification {clar_id!r} was closed by run termination")
        clar.answer = answer
        self.memory.bind(
            SymbolEntry(
                key=f"clarify_{clar.clar_id}",
                payload={"question": clar.question, "answer": answer},
                kind="data",
                brief="operator clarification answer",
            )
        )
        self.signal = replace(self.signal, clarify_pending=False)

    def step(self) -> StepOutcome:
        """Execute exactly one loop iteration of the gated workflow."""
        if self.terminal:
            raise EngineStateError("engine is terminal")
        if self._halt_requested:
            return self._terminate(FsmState.HALT, "halt_operator")
        if self.t >= self.config.t_max:
            return self._terminate(FsmState.HALT, "halt_timeout")

        state = transition(self.matrix, self.signal)
        self.state = state

        if state is FsmState.AWAIT_CLARIFY:
            self._emit(state, note="awaiting operator answer")
            self._record(state, "await", "suspended for clarification")
            self.t += 1
            return StepOutcome.AWAITING_CLARIFY
        if state is FsmState.HALT:
            return self._terminate(FsmState.HALT, "halt_no_rule")
        if state is FsmState.SUCCESS:
            return self._terminate(FsmState.SUCCESS, "success")

        if state is FsmState.RETRIEVE_KNOWLEDGE:
            self._planner_step(state)
        elif state in (FsmState.DESIGN_DRAFT, FsmState.DESIGN_CODE):
            if self._staged is not None:
                self._commit_staged(state)
            else:
                self._planner_step(state)
        elif state in (FsmState.RECTIFY_DRAFT, FsmState.RECTIFY_CODE):
            self.rectify_steps += 1
            self._planner_step(state, feedback=self._feedback)
        elif state is FsmState.VERIFY_DRAFT:
            self._verify_draft()
        elif state is FsmState.VERIFY_CODE:
            self._verify_code()
        elif state is FsmState.APPROVED:
            return self._dispatch_execution()
        else:
            raise EngineStateError(f"unhandled state {state}")

        self.t += 1
        return StepOutcome.CONTINUE

    def run(self) -> RunResult:
        """Step to termination (or to the first unanswerable clarification)."""
        while not self.terminal:
            outcome = self.run_until_block()
            if outcome is StepOutcome.AWAITING_CLARIFY:
                # No transport can answer here: halting is the safe default.
                self._terminate(FsmState.HALT, "halt_unanswered_clarify")
        return self.result()

    def run_until_block(self) -> StepOutcome:
        """Step until terminal or suspended; planner failures halt the run."""
        outcome = StepOutcome.CONTINUE
        while not self.terminal:
            try:
                outcome = self.step()
            except PlannerError as exc:
                self._error = str(exc)
                self._terminate(FsmState.HALT, "failed")
                return StepOutcome.TERMINAL
            if outcome is not StepOutcome.CONTINUE:
                return outcome
        return outcome

    def result(self) -> RunResult:
        return RunResult(
            outcome=self._outcome or "unknown",
            final_state=self.state.value,
            steps=self.t,
            protocol=[op.to_json() for op in self._executed],
            trace=list(self.trace),
            tokens_in=self.tokens_in,
            tokens_out=self.tokens_out,
            sim_clock_s=self.world.clock,
            error=self._error,
        )

    def final_draft(self) -> ProtocolDraft | None:
        return self._draft

    def final_code(self) -> ProtocolCode | None:
        return self._code

    def code_parse_failed(self) -> bool:
        return self._code_parse_failed

    def trace_lines(self) -> str:
        return "".join(json.dumps(e, separators=(",", ":")) + "\n" for e in self.trace)

    # -- step internals --------------------------------------------------

    def _planner_step(self, state: FsmState, feedback: VerificationReport | None = None) -> None:
        allowed = allowed_actions(state, clarify_enabled=self.config.clarify_enabled)
        context = PlannerContext(
            state=state,
            digest=project(self.memory),
            history=tuple(self.trajectory.window(self.config.history_window)),
            feedback=feedback,
            allowed=allowed,
            knowledge=self._retrieved,
        )
        prompt = render_prompt(context, self.template)
        step_in = count_tokens(prompt)
        action = self.planner.propose(context)
        step_out = count_tokens(json.dumps(action.to_json(), separators=(",", ":")))
        self.tokens_in += step_in
        self.tokens_out += step_out
        tokens = {"in": step_in, "out": step_out}
        digest_keys = list(context.digest.keys())

        if action.kind not in allowed:
            self._emit(
                state,
                action=action.to_json(),
                tokens=tokens,
                note="mask_violation",
                digest=digest_keys,
            )
            self._record(state, f"{action.kind.value} (masked)", "action outside mask discarded")
            return

        if action.kind is ActionKind.RETRIEVE_KNOWLEDGE:
            docs = self.knowledge_store.retrieve(action.query or "", self.config.retrieve_k)
            self._retrieved = tuple(docs)
            self.signal = replace(self.signal, know=True)
            self._emit(state, action=action.to_json(), tokens=tokens, digest=digest_keys)
            self._record(state, "RetrieveKnowledge", f"retrieved {len(docs)} docs")
        elif action.kind is ActionKind.CLARIFY:
            self._clar_seq += 1
            clar = Clarification(clar_id=f"c{self._clar_seq}", question=action.question or "")
            self.clarifications.append(clar)
            self.signal = replace(self.signal, clarify_pending=True)
            self._emit(state, action=action.to_json(), tokens=tokens, digest=digest_keys)
            self._record(state, "Clarify", f"asked {clar.clar_id}")
        elif state in (FsmState.RECTIFY_DRAFT, FsmState.RECTIFY_CODE):
            # Stage the revision and retract the rejected artifact; the
            # next design step commits the staged proposal.
            layer = "draft" if state is FsmState.RECTIFY_DRAFT else "code"
            self._staged = action
            self._feedback = None
            self.signal = clear_artifact(self.signal, layer)
            feedback_msgs = "; ".join(feedback.messages()) if feedback else ""
            self._emit(
                state,
                tokens=tokens,
                feedback=feedback_msgs,
                note=f"staged {action.kind.value}",
                digest=digest_keys,
            )
            self._record(state, f"staged {action.kind.value}", feedback_msgs)
        else:
            self._apply_emission(state, action, tokens, digest=digest_keys)

    def _commit_staged(self, state: FsmState) -> None:
        action = self._staged
        self._staged = None
        assert action is not None
        self._apply_emission(state, action, tokens={"in": 0, "out": 0})

    def _apply_emission(
        self,
        state: FsmState,
        action: SymbolicAction,
        tokens: dict[str, int],
        digest: list[str] | None = None,
    ) -> None:
        if action.kind is ActionKind.EMIT_DRAFT:
            try:
                self._draft = parse_draft(action.draft)
                observation = f"draft with {len(self._draft.steps)} steps"
            except CodeParseError as exc:
                self._draft = ProtocolDraft(title="", steps=())
                observation = f"draft parse failed: {exc}"
            self.signal = replace(self.signal, draft=True, sci=Verdict.UNSET)
        else:
            self._last_code_payload = action.code
            try:
                self._code = parse_code(action.code)
                self._code_parse_failed = False
                observation = f"code with {len(self._code.ops)} ops"
            except CodeParseError as exc:
                self._code = None
                self._code_parse_failed = True
                observation = f"code parse failed: {exc}"
            self.signal = replace(self.signal, code=True, phys=Verdict.UNSET, interlock=False)
        self._emit(state, action=action.to_json(), tokens=tokens, digest=digest)
        self._record(state, action.kind.value, observation)

    def _verify_draft(self) -> None:
        assert self._draft is not None
        if self.config.skip_verification:
            report = VerificationReport(passed=True)
        else:
            report = verify_scientific(self._draft, self.rubric, self.judge)
        self.signal = signals_from(report, "scientific", self.signal)
        if not report.passed:
            self._feedback = report
        self._emit(FsmState.VERIFY_DRAFT, verdict=report.to_json("scientific"))
        self._record(
            FsmState.VERIFY_DRAFT,
            "verify_scientific",
            "pass" if report.passed else f"fail: {len(report.violations)} violations",
        )

    def _verify_code(self) -> None:
        if self.config.skip_verification:
            report = VerificationReport(passed=True)
        elif self._code is None:
            report = VerificationReport.from_violations(
                [
                    Violation(
                        op_index=0,
                        constraint_path="code",
                        kind="missing_param",
                        observed="unparseable",
                        limit="schema-valid code",
                        message="protocol code failed to parse",
                    )
                ],
                checked=1,
            )
        else:
            report = verify_physical(
                self._code, self.registry, self.memory, self.world, self.order_rules
            )
        self.signal = signals_from(report, "physical", self.signal)
        if not report.passed:
            self._feedback = report
        self._emit(FsmState.VERIFY_CODE, verdict=report.to_json("physical"))
        self._record(
            FsmState.VERIFY_CODE,
            "verify_physical",
            "pass" if report.passed else f"fail: {len(report.violations)} violations",
        )

    def _dispatch_execution(self) -> StepOutcome:
        """APPROVED: ground every op and push it through the interlock gate."""
        ops = self._code.ops if self._code is not None else ()
        committed = 0
        failure: sim.RuntimeFailure | None = None
        failed_op: str | None = None
        for op in ops:
            try:
                grounded = resolve(op, self.memory, self.registry)
            except GroundingError as exc:
                failure = sim.RuntimeFailure("UnknownLabware", str(exc))
                failed_op = f"{op.device_id}.{op.op_name}"
                break
            decision = gate_execution(self.state, self.signal, grounded, self.matrix)
            if decision is not ExecutionDecision.EXECUTE:
                failure = sim.RuntimeFailure("DeviceBusy", "execution withheld by interlock")
                failed_op = f"{op.device_id}.{op.op_name}"
                break
            result = sim.apply(self.world, grounded)
            if isinstance(result, sim.RuntimeFailure):
                failure = result
                failed_op = f"{op.device_id}.{op.op_name}"
                break
            self._executed.append(grounded)
            committed += 1

        if failure is None:
            self._emit(
                FsmState.APPROVED,
                action={"kind": "Execute", "payload": {"ops": committed}},
                executed=committed > 0,
            )
            self._record(FsmState.APPROVED, "Execute", f"executed {committed} ops")
            self.t += 1
            return self._terminate(FsmState.SUCCESS, "success")

        report = VerificationReport.from_violations(
            [
                Violation(
                    op_index=committed,
                    constraint_path=f"runtime.{failed_op}",
                    kind="guard",
                    observed=failure.kind,
                    limit="",
                    message=failure.message,
                )
            ],
            checked=1,
        )
        self._feedback = report
        self.signal = replace(self.signal, phys=Verdict.FAIL, interlock=True)
        self._emit(
            FsmState.APPROVED,
            verdict=report.to_json("physical"),
            executed=committed > 0,
            note="runtime failure",
        )
        self._record(FsmState.APPROVED, "Execute", f"runtime failure: {failure.message}")
        self.t += 1
        return StepOutcome.CONTINUE

    def _terminate(self, state: FsmState, outcome: str) -> StepOutcome:
        self.state = state
        self._outcome = outcome
        for clar in self.clarifications:
            if clar.answer is None:
                clar.closed = True
        self._emit(state, note=outcome)
        self._record(state, "terminal", outcome)
        self.t += 1
        return StepOutcome.TERMINAL

    # -- bookkeeping -------------------------------------------------------

    def _emit(
        self,
        state: FsmState,
        action: dict[str, Any] | None = None,
        verdict: dict[str, Any] | None = None,
        executed: bool = False,
        tokens: dict[str, int] | None = None,
        note: str | None = None,
        feedback: str | None = None,
        digest: list[str] | None = None,
    ) -> None:
        event: dict[str, Any] = {
            "t": self.t,
            "state": state.value,
            "signal": self.signal.to_json(),
            "action": action,
            "verdict": verdict,
            "executed": executed,
            "tokens": tokens or {"in": 0, "out": 0},
        }
        if digest is not None:
            event["digest"] = digest
        if note is not None:
            event["note"] = note
        if feedback:
            event["feedback"] = feedback
        self.trace.append(event)

    def _record(self, state: FsmState, action_summary: str, observation: str) -> None:
        self.trajectory.append(
            TrajectoryEntry(
                t=self.t,
                state=state.value,
                action_summary=action_summary,
                observation=observation,
                signal_after=self.signal.to_json(),
            )
        )


def bind_run_symbols(
    registry: HardwareRegistry, intent: str, context_symbols: list[SymbolEntry]
) -> WorkingMemory:
    """Initial working memory for a run: the parsed intent, one symbol per
    registry device carrying its full schema as payload, and whatever the
    task's environment description binds."""
    memory = WorkingMemory()
    memory.bind(
        SymbolEntry(key="intent", payload={"text": intent}, kind="data", brief="user task intent")
    )
    for device in registry.devices.values():
        memory.bind(
            SymbolEntry(
                key=device.id,
                payload=device_to_json(device),
                kind="device",
                brief=f"{device.category.value} device schema",
            )
        )
    for entry in context_symbols:
        memory.bind(entry)
    return memory
