"""Pluggable planner policies behind one propose() interface.

Three implementations: a deterministic scripted planner (the workhorse of
every test and benchmark), a fault-injecting wrapper that perturbs a
compliant policy's output, and a generic remote chat-completion client
that keeps LLM vendors behind a single boundary.

The engine, not the policy, enforces action masking: a policy may return
anything, and out-of-mask actions become recorded mask violations
upstream.
"""

from __future__ import annotations

import copy
import json
import os
import string
from dataclasses import dataclass, field
from typing import Any, IO

from .errors import LabgateError
from .fsm import ActionKind, FsmState
from .grounding import ContextDigest
from .memory import KnowledgeDoc, TrajectoryEntry
from .violations import VerificationReport


class PlannerError(LabgateError):
    """Policy failure propagated with whatever context the policy had."""


class PolicyUnavailable(PlannerError):
    pass


class ScriptExhausted(PlannerError):
    pass


class StepOutOfRange(LabgateError):
    def __init__(self, step: int, length: int):
        super().__init__(f"fault step {step} outside script of {length} steps")


class UnknownPlaceholder(LabgateError):
    def __init__(self, name: str):
        super().__init__(f"template placeholder {name!r} is not recognized")


@dataclass(frozen=True)
class SymbolicAction:
    """One planner output; exactly one payload field is populated."""

    kind: ActionKind
    draft: Any = None
    code: Any = None
    query: str | None = None
    question: str | None = None

    def __post_init__(self) -> None:
        populated = [
            (self.draft, ActionKind.EMIT_DRAFT),
            (self.code, ActionKind.EMIT_CODE),
            (self.query, ActionKind.RETRIEVE_KNOWLEDGE),
            (self.question, ActionKind.CLARIFY),
        ]
        filled = [kind for value, kind in populated if value is not None]
        if filled != [self.kind]:
            raise ValueError(f"action payload does not match kind {self.kind.value}")

    @property
    def payload(self) -> Any:
        if self.kind is ActionKind.EMIT_DRAFT:
            return self.draft
        if self.kind is ActionKind.EMIT_CODE:
            return self.code
        if self.kind is ActionKind.RETRIEVE_KNOWLEDGE:
            return self.query
        return self.question

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "payload": self.payload}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "SymbolicAction":
        try:
            kind = ActionKind(data["kind"])
        except (KeyError, ValueError) as exc:
            raise PlannerError(f"malformed action: {data!r}") from exc
        payload = data.get("payload")
        if kind is ActionKind.EMIT_DRAFT:
            return cls(kind=kind, draft=payload)
        if kind is ActionKind.EMIT_CODE:
            return cls(kind=kind, code=payload)
        if kind is ActionKind.RETRIEVE_KNOWLEDGE:
            return cls(kind=kind, query=str(payload))
        return cls(kind=kind, question=str(payload))


@dataclass(frozen=True)
class PlannerContext:
    """Everything a policy may condition on for one proposal."""

    state: FsmState
    digest: ContextDigest
    history: tuple[TrajectoryEntry, ...] = ()
    feedback: VerificationReport | None = None
    allowed: frozenset[ActionKind] = frozenset()
    knowledge: tuple[KnowledgeDoc, ...] = ()

    def __post_init__(self) -> None:
        rectifying = self.state in (FsmState.RECTIFY_DRAFT, FsmState.RECTIFY_CODE)
        if rectifying != (self.feedback is not None):
            raise ValueError("feedback must be present exactly in rectify states")


# --- scripted policy -------------------------------------------------------


@dataclass(frozen=True)
class ScriptStep:
    action: SymbolicAction
    expect_feedback: bool = False


@dataclass(frozen=True)
class PlannerScript:
    steps: tuple[ScriptStep, ...]
    on_exhausted: str = "error"  # or "repeat_last"

    @classmethod
    def from_json(cls, data: dict[str, Any] | str | bytes | IO) -> "PlannerScript":
        if hasattr(data, "read"):
            data = data.read()
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        steps = tuple(
            ScriptStep(
                action=SymbolicAction.from_json(raw),
                expect_feedback=bool(raw.get("expect_feedback", False)),
            )
            for raw in data.get("steps", [])
        )
        return cls(steps=steps, on_exhausted=str(data.get("on_exhausted", "error")))

    def to_json(self) -> dict[str, Any]:
        steps = []
        for step in self.steps:
            raw = step.action.to_json()
            if step.expect_feedback:
                raw["expect_feedback"] = True
            steps.append(raw)
        out: dict[str, Any] = {"steps": steps}
        if self.on_exhausted != "error":
            out["on_exhausted"] = self.on_exhausted
        return out


class ScriptedPlanner:
    """Deterministic playback of a pre-authored action script.

    The cursor advances once per proposal. A step marked expect_feedback
    is only valid when the context carries a violation report: the
    mechanism that replays one-round corrections deterministically.
    """

    def __init__(self, script: PlannerScript):
        self.script = script
        self.cursor = 0

    def propose(self, context: PlannerContext) -> SymbolicAction:
        if self.cursor >= len(self.script.steps):
            if self.script.on_exhausted == "repeat_last" and self.script.steps:
                return self.script.steps[-1].action
            raise ScriptExhausted(f"script has no step {self.cursor}")
        step = self.script.steps[self.cursor]
        if step.expect_feedback and context.feedback is None:
            raise PlannerError(
                f"script step {self.cursor} expects violation feedback but none is present"
            )
        self.cursor += 1
        return step.action


# --- fault injection -------------------------------------------------------

FAULT_TYPES = ("param_overrange", "unknown_symbol", "order_swap")


@dataclass(frozen=True)
class FaultSpec:
    step: int
    type: str
    param: str = ""
    value: Any = None
    unit: str | None = None
    op_index: int | None = None
    symbol: str = ""
    replacement: str = ""
    swap: tuple[int, int] = (0, 1)

    def __post_init__(self) -> None:
        if self.type not in FAULT_TYPES:
            raise ValueError(f"unknown fault type {self.type!r}")

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "FaultSpec":
        return cls(
            step=int(data["step"]),
            type=str(data["type"]),
            param=str(data.get("param", "")),
            value=data.get("value"),
            unit=data.get("unit"),
            op_index=data.get("op_index"),
            symbol=str(data.get("symbol", "")),
            replacement=str(data.get("replacement", "")),
            swap=tuple(data.get("swap", (0, 1))),
        )


def _fault_code_payload(payload: Any, fault: FaultSpec) -> Any:
    """Perturb one emitted code payload according to the fault kind."""
    payload = copy.deepcopy(payload)
    if not isinstance(payload, dict):
        return payload
    ops = payload.get("ops") or []
    if fault.type == "param_overrange":
        indices = [fault.op_index] if fault.op_index is not None else range(len(ops))
        for i in indices:
            if 0 <= i < len(ops) and fault.param in (ops[i].get("params") or {}):
                value_unit = ops[i]["params"][fault.param]
                new_unit = fault.unit if fault.unit is not None else value_unit[1]
                ops[i]["params"][fault.param] = [fault.value, new_unit]
                break
    elif fault.type == "unknown_symbol":
        for op in ops:
            for name, pair in (op.get("params") or {}).items():
                if pair[0] == fault.symbol:
                    op["params"][name] = [fault.replacement, pair[1]]
            if "targets" in op:
                op["targets"] = [
                    fault.replacement if t == fault.symbol else t for t in op["targets"]
                ]
    elif fault.type == "order_swap":
        i, j = fault.swap
        if 0 <= i < len(ops) and 0 <= j < len(ops):
            ops[i], ops[j] = ops[j], ops[i]
    return payload


def inject_fault(script: PlannerScript, fault: FaultSpec) -> PlannerScript:
    """Return a script identical except for the perturbed step."""
    if not (0 <= fault.step < len(script.steps)):
        raise StepOutOfRange(fault.step, len(script.steps))
    steps = list(script.steps)
    target = steps[fault.step]
    action = target.action
    if action.kind is ActionKind.EMIT_CODE:
        action = SymbolicAction(
            kind=ActionKind.EMIT_CODE, code=_fault_code_payload(action.code, fault)
        )
    steps[fault.step] = ScriptStep(action=action, expect_feedback=target.expect_feedback)
    return PlannerScript(steps=tuple(steps), on_exhausted=script.on_exhausted)


class FaultInjectingPlanner:
    """Wrapper perturbing an inner policy's proposals at given step indices."""

    def __init__(self, inner: Any, faults: list[FaultSpec]):
        self.inner = inner
        self.faults = {f.step: f for f in faults}
        self.invocations = 0

    def propose(self, context: PlannerContext) -> SymbolicAction:
        action = self.inner.propose(context)
        fault = self.faults.get(self.invocations)
        self.invocations += 1
        if fault is not None and action.kind is ActionKind.EMIT_CODE:
            action = SymbolicAction(
                kind=ActionKind.EMIT_CODE, code=_fault_code_payload(action.code, fault)
            )
        return action


# --- prompt rendering ------------------------------------------------------

PLACEHOLDERS = ("state", "digest", "history", "feedback", "allowed", "knowledge")

DEFAULT_TEMPLATE = """You are the planner of a gated lab-automation agent.
Current state: {state}
Allowed action kinds (any other kind will be discarded): {allowed}

Grounded symbols (refer to resources by key only):
{digest}

Retrieved knowledge:
{knowledge}

Recent history:
{history}

Verifier feedback:
{feedback}

Respond with one JSON action: {{"kind": <allowed kind>, "payload": ...}}
"""


@dataclass(frozen=True)
class PromptTemplate:
    text: str = DEFAULT_TEMPLATE

    def placeholders(self) -> set[str]:
        names = set()
        for _, name, _, _ in string.Formatter().parse(self.text):
            if name:
                names.add(name)
        return names


def render_prompt(context: PlannerContext, template: PromptTemplate | None = None) -> str:
    """Deterministic prompt assembly: keys and briefs only, never payloads."""
    template = template or PromptTemplate()
    unknown = template.placeholders() - set(PLACEHOLDERS)
    if unknown:
        raise UnknownPlaceholder(sorted(unknown)[0])
    history_lines = [
        f"t={e.t} {e.state}: {e.action_summary} -> {e.observation}" for e in context.history
    ]
    knowledge_lines = [f"[{d.id}] {d.title}: {d.body}" for d in context.knowledge]
    feedback_lines = context.feedback.messages() if context.feedback is not None else []
    sections = {
        "state": context.state.value,
        "digest": context.digest.render(),
        "history": "\n".join(history_lines),
        "feedback": "\n".join(feedback_lines),
        "allowed": ", ".join(sorted(kind.value for kind in context.allowed)),
        "knowledge": "\n".join(knowledge_lines),
    }
    return template.text.format(**sections)


# --- remote policy ---------------------------------------------------------


@dataclass(frozen=True)
class RemotePlannerConfig:
    endpoint: str
    model: str = "default"
    auth_env: str = "LABGATE_PLANNER_TOKEN"
    timeout_s: float = 30.0
    # Opaque decoding knobs, forwarded verbatim; no determinism is claimed
    # for remote backends even with a seed.
    temperature: str = ""
    seed: str = ""


class RemotePlanner:
    """Minimal chat-completion client: one strict-parse retry, then fail.

    Speaks the role/content message-list wire shape over HTTP and expects
    a JSON-encoded action back.
    """

    def __init__(self, config: RemotePlannerConfig, template: PromptTemplate | None = None):
        self.config = config
        self.template = template or PromptTemplate()

    def _request(self, messages: list[dict[str, str]]) -> str:
        import httpx

        headers = {}
        token = os.environ.get(self.config.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body: dict[str, Any] = {"model": self.config.model, "messages": messages}
        if self.config.temperature:
            body["temperature"] = float(self.config.temperature)
        if self.config.seed:
            body["seed"] = int(self.config.seed)
        try:
            response = httpx.post(
                self.config.endpoint, json=body, headers=headers, timeout=self.config.timeout_s
            )
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except Exception as exc:
            raise PolicyUnavailable(f"remote planner failed: {exc}") from exc

    def propose(self, context: PlannerContext) -> SymbolicAction:
        prompt = render_prompt(context, self.template)
        messages = [{"role": "system", "content": prompt}]
        content = self._request(messages)
        for attempt in range(2):
            try:
                return SymbolicAction.from_json(json.loads(content))
            except (json.JSONDecodeError, PlannerError):
                if attempt == 1:
                    break
                messages.append({"role": "assistant", "content": content})
                messages.append(
                    {
                        "role": "user",
                        "content": "Reply with exactly one JSON object: "
                        '{"kind": ..., "payload": ...}',
                    }
                )
                content = self._request(messages)
        raise PolicyUnavailable("remote planner returned unparseable actions twice")
