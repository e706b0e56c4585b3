"""Deterministic control core: signal vector, priority decision matrix,
state transitions, and the physical-execution gate.

The matrix selects the next state as the lowest-priority-index rule whose
signal literals all hold; a pending clarification overrides every rule;
no match falls back to HALT. All of it is pure: the engine owns mutation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

from .errors import LabgateError


class FsmState(str, Enum):
    INIT = "INIT"
    RETRIEVE_KNOWLEDGE = "RETRIEVE_KNOWLEDGE"
    DESIGN_DRAFT = "DESIGN_DRAFT"
    VERIFY_DRAFT = "VERIFY_DRAFT"
    RECTIFY_DRAFT = "RECTIFY_DRAFT"
    DESIGN_CODE = "DESIGN_CODE"
    VERIFY_CODE = "VERIFY_CODE"
    RECTIFY_CODE = "RECTIFY_CODE"
    AWAIT_CLARIFY = "AWAIT_CLARIFY"
    APPROVED = "APPROVED"
    SUCCESS = "SUCCESS"
    HALT = "HALT"


TERMINAL_STATES = frozenset({FsmState.SUCCESS, FsmState.HALT})

# State classes, used for timeline rendering and the correction-trajectory
# golden tests: design/rectify states are where the planner shapes the
# artifact, verify/approved are engine-internal.
DESIGN_STATES = frozenset({FsmState.DESIGN_DRAFT, FsmState.DESIGN_CODE})
VERIFY_STATES = frozenset({FsmState.VERIFY_DRAFT, FsmState.VERIFY_CODE})
RECTIFY_STATES = frozenset({FsmState.RECTIFY_DRAFT, FsmState.RECTIFY_CODE})


class Verdict(str, Enum):
    UNSET = "unset"
    PASS = "pass"
    FAIL = "fail"


class ActionKind(str, Enum):
    EMIT_DRAFT = "EmitDraft"
    EMIT_CODE = "EmitCode"
    RETRIEVE_KNOWLEDGE = "RetrieveKnowledge"
    CLARIFY = "Clarify"


class TerminalState(LabgateError):
    def __init__(self, state: FsmState):
        self.state = state
        super().__init__(f"{state.value} is terminal")


@dataclass(frozen=True)
class SignalVector:
    """Compact context summary driving every transition.

    Invariants: interlock implies phys=fail; absent code implies
    phys=unset; absent draft implies sci=unset.
    """

    know: bool = False
    draft: bool = False
    code: bool = False
    sci: Verdict = Verdict.UNSET
    phys: Verdict = Verdict.UNSET
    interlock: bool = False
    clarify_pending: bool = False

    def check_invariants(self) -> None:
        if self.interlock and self.phys is not Verdict.FAIL:
            raise ValueError("interlock requires phys=fail")
        if not self.code and self.phys is not Verdict.UNSET:
            raise ValueError("phys verdict without code")
        if not self.draft and self.sci is not Verdict.UNSET:
            raise ValueError("sci verdict without draft")

    def to_json(self) -> dict[str, Any]:
        return {
            "know": self.know,
            "draft": self.draft,
            "code": self.code,
            "sci": self.sci.value,
            "phys": self.phys.value,
            "interlock": self.interlock,
            "clarify_pending": self.clarify_pending,
        }


@dataclass(frozen=True)
class PriorityRule:
    """One matrix row: fire when every literal in `condition` holds."""

    priority: int
    condition: dict[str, Any]
    target: FsmState

    def matches(self, signal: SignalVector) -> bool:
        return all(getattr(signal, name) == value for name, value in self.condition.items())

    def render_condition(self) -> str:
        parts = []
        for name, value in self.condition.items():
            if isinstance(value, bool):
                parts.append(name if value else f"!{name}")
            else:
                parts.append(f"{name}={value.value}")
        return " & ".join(parts) if parts else "always"


@dataclass(frozen=True)
class DecisionMatrix:
    rules: tuple[PriorityRule, ...]
    fallback: FsmState = FsmState.HALT
    # The w/o-FSM ablation: a pass-through matrix routes emissions straight
    # to APPROVED and releases the execution gate, removing the safety net.
    enforce_gate: bool = True

    def __post_init__(self) -> None:
        priorities = [r.priority for r in self.rules]
        if len(set(priorities)) != len(priorities):
            raise ValueError("rule priorities must be unique")
        object.__setattr__(self, "rules", tuple(sorted(self.rules, key=lambda r: r.priority)))

    def to_json(self) -> dict[str, Any]:
        return {
            "rules": [
                {
                    "priority": r.priority,
                    "condition": {
                        k: (v if isinstance(v, bool) else v.value) for k, v in r.condition.items()
                    },
                    "target": r.target.value,
                }
                for r in self.rules
            ],
            "fallback": self.fallback.value,
            "enforce_gate": self.enforce_gate,
        }


def default_matrix() -> DecisionMatrix:
    """The shipped priority decision matrix.

    Rows 1-6 follow the published priority ordering (rectify beats design
    beats verify beats success); rows 7-8 complete it so every signal
    combination resolves: unverified artifacts route to their verify
    state, a cold start routes to retrieval, anything else halts.
    """
    return DecisionMatrix(
        rules=(
            PriorityRule(1, {"code": True, "phys": Verdict.FAIL}, FsmState.RECTIFY_CODE),
            PriorityRule(2, {"draft": True, "sci": Verdict.FAIL}, FsmState.RECTIFY_DRAFT),
            PriorityRule(3, {"draft": False, "know": True}, FsmState.DESIGN_DRAFT),
            PriorityRule(
                4, {"draft": True, "sci": Verdict.PASS, "code": False}, FsmState.DESIGN_CODE
            ),
            PriorityRule(5, {"draft": True, "sci": Verdict.UNSET}, FsmState.VERIFY_DRAFT),
            PriorityRule(6, {"code": True, "phys": Verdict.PASS}, FsmState.APPROVED),
            PriorityRule(7, {"code": True, "phys": Verdict.UNSET}, FsmState.VERIFY_CODE),
            PriorityRule(8, {"draft": False, "know": False}, FsmState.RETRIEVE_KNOWLEDGE),
        ),
    )


def passthrough_matrix() -> DecisionMatrix:
    """Ablation matrix without the verify/rectify net or execution gate.

    Emissions go straight to APPROVED and the gate is released, so
    unverified actions reach the simulator: the configuration whose
    compliance collapses in the ablation suite.
    """
    return DecisionMatrix(
        rules=(
            PriorityRule(1, {"code": True}, FsmState.APPROVED),
            PriorityRule(2, {"draft": True}, FsmState.DESIGN_CODE),
            PriorityRule(3, {"know": True}, FsmState.DESIGN_DRAFT),
            PriorityRule(4, {"know": False}, FsmState.RETRIEVE_KNOWLEDGE),
        ),
        enforce_gate=False,
    )


def transition(matrix: DecisionMatrix, signal: SignalVector) -> FsmState:
    """Next state: clarify override, else lowest-priority match, else fallback."""
    if signal.clarify_pending:
        return FsmState.AWAIT_CLARIFY
    for rule in matrix.rules:
        if rule.matches(signal):
            return rule.target
    return matrix.fallback


class ExecutionDecision(str, Enum):
    EXECUTE = "Execute"
    WITHHELD = "Withheld"


def gate_execution(
    state: FsmState, signal: SignalVector, action: Any, matrix: DecisionMatrix | None = None
) -> ExecutionDecision:
    """The physical-execution interlock.

    Execute only in APPROVED with a passing physical verdict; everything
    else is withheld. A gate-released ablation matrix bypasses the check.
    """
    if matrix is not None and not matrix.enforce_gate:
        return ExecutionDecision.EXECUTE
    if state is FsmState.APPROVED and signal.phys is Verdict.PASS:
        return ExecutionDecision.EXECUTE
    return ExecutionDecision.WITHHELD


_ACTION_MASKS: dict[FsmState, frozenset[ActionKind]] = {
    FsmState.INIT: frozenset(),
    FsmState.RETRIEVE_KNOWLEDGE: frozenset({ActionKind.RETRIEVE_KNOWLEDGE}),
    FsmState.DESIGN_DRAFT: frozenset({ActionKind.EMIT_DRAFT, ActionKind.CLARIFY}),
    FsmState.RECTIFY_DRAFT: frozenset({ActionKind.EMIT_DRAFT, ActionKind.CLARIFY}),
    FsmState.DESIGN_CODE: frozenset({ActionKind.EMIT_CODE, ActionKind.CLARIFY}),
    FsmState.RECTIFY_CODE: frozenset({ActionKind.EMIT_CODE, ActionKind.CLARIFY}),
    FsmState.VERIFY_DRAFT: frozenset(),
    FsmState.VERIFY_CODE: frozenset(),
    FsmState.AWAIT_CLARIFY: frozenset(),
    FsmState.APPROVED: frozenset(),
}


def allowed_actions(state: FsmState, clarify_enabled: bool = True) -> frozenset[ActionKind]:
    """State-dependent action mask pruning the planner's choices."""
    if state in TERMINAL_STATES:
        raise TerminalState(state)
    mask = _ACTION_MASKS[state]
    if not clarify_enabled:
        mask = mask - {ActionKind.CLARIFY}
    return mask


def all_signal_combinations() -> list[SignalVector]:
    """Every (know, draft, code, interlock) x (sci, phys) combination.

    The clarify flag is excluded: it is a pre-matrix override, not a
    matrix input. 2^4 x 3^2 = 144 vectors, used by the totality suite.
    """
    combos = []
    for know in (False, True):
        for draft in (False, True):
            for code in (False, True):
                for interlock in (False, True):
                    for sci in Verdict:
                        for phys in Verdict:
                            combos.append(
                                SignalVector(
                                    know=know,
                                    draft=draft,
                                    code=code,
                                    sci=sci,
                                    phys=phys,
                                    interlock=interlock,
                                )
                            )
    return combos


def clear_artifact(signal: SignalVector, layer: str) -> SignalVector:
    """Retract a rejected artifact, restoring the signal invariants."""
    if layer == "code":
        return replace(signal, code=False, phys=Verdict.UNSET, interlock=False)
    if layer == "draft":
        return replace(signal, draft=False, sci=Verdict.UNSET)
    raise ValueError(f"unknown artifact layer {layer!r}")
