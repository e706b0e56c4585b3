"""Two-layer verification: deterministic physical rule engine over the
hardware registry, and pluggable scientific judgment over drafts with a
deterministic rubric judge as the default.

Physical verification never short-circuits: every op is checked against
every applicable constraint and all violations are reported. Params a
device schema does not declare are ignored; the registry is the complete
constraint surface.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Protocol

from . import simulator as sim
from .errors import LabgateError
from .fsm import SignalVector, Verdict
from .grounding import GroundedAction, WorkingMemory
from .registry import HardwareRegistry, ParamKind, lookup, UnknownDevice, UnknownOperation
from .violations import VerificationReport, Violation

__all__ = [
    "ProtocolOp",
    "ProtocolCode",
    "ProtocolDraft",
    "DraftStep",
    "Violation",
    "VerificationReport",
    "CodeParseError",
    "JudgeUnavailable",
    "Rubric",
    "RubricJudge",
    "parse_code",
    "parse_draft",
    "verify_physical",
    "verify_scientific",
    "signals_from",
]

_TOKEN_RE = re.compile(r"[0-9a-z]+")


class CodeParseError(LabgateError):
    """Malformed protocol code; the metric gatekeeper zeroes these runs."""


class JudgeUnavailable(LabgateError):
    pass


@dataclass(frozen=True)
class ProtocolOp:
    device_id: str
    op_name: str
    params: dict[str, tuple[Any, str]] = field(default_factory=dict)
    targets: tuple[str, ...] = ()

    def to_json(self) -> dict[str, Any]:
        return {
            "device_id": self.device_id,
            "op_name": self.op_name,
            "params": {k: [v, u] for k, (v, u) in self.params.items()},
            "targets": list(self.targets),
        }


@dataclass(frozen=True)
class ProtocolCode:
    ops: tuple[ProtocolOp, ...]
    schema_version: str = "1"

    def to_json(self) -> dict[str, Any]:
        return {"schema_version": self.schema_version, "ops": [op.to_json() for op in self.ops]}


@dataclass(frozen=True)
class DraftStep:
    title: str
    rationale: str = ""


@dataclass(frozen=True)
class ProtocolDraft:
    title: str
    steps: tuple[DraftStep, ...] = ()

    def full_text(self) -> str:
        parts = [self.title]
        for step in self.steps:
            parts.append(step.title)
            parts.append(step.rationale)
        return "\n".join(parts)

    def to_json(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "steps": [{"title": s.title, "rationale": s.rationale} for s in self.steps],
        }


def parse_code(payload: Any) -> ProtocolCode:
    """Parse an emitted code payload; raises CodeParseError on any defect."""
    if isinstance(payload, (str, bytes)):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise CodeParseError(f"protocol code is not valid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise CodeParseError("protocol code must be an object")
    raw_ops = payload.get("ops")
    if not isinstance(raw_ops, list) or not raw_ops:
        raise CodeParseError("protocol code needs a non-empty ops list")
    ops = []
    for idx, raw in enumerate(raw_ops):
        if not isinstance(raw, dict):
            raise CodeParseError(f"ops[{idx}] must be an object")
        device_id = raw.get("device_id")
        op_name = raw.get("op_name")
        if not isinstance(device_id, str) or not isinstance(op_name, str):
            raise CodeParseError(f"ops[{idx}] needs string device_id and op_name")
        params: dict[str, tuple[Any, str]] = {}
        for name, pair in (raw.get("params") or {}).items():
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise CodeParseError(f"ops[{idx}].params[{name}] must be [value, unit]")
            params[str(name)] = (pair[0], str(pair[1]))
        if len(params) != len(raw.get("params") or {}):
            raise CodeParseError(f"ops[{idx}] has duplicate param names")
        targets = raw.get("targets") or []
        if not all(isinstance(t, str) for t in targets):
            raise CodeParseError(f"ops[{idx}].targets must be strings")
        ops.append(
            ProtocolOp(device_id=device_id, op_name=op_name, params=params, targets=tuple(targets))
        )
    return ProtocolCode(ops=tuple(ops), schema_version=str(payload.get("schema_version", "1")))


def parse_draft(payload: Any) -> ProtocolDraft:
    if isinstance(payload, (str, bytes)):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise CodeParseError(f"draft is not valid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise CodeParseError("draft must be an object")
    steps = tuple(
        DraftStep(title=str(s.get("title", "")), rationale=str(s.get("rationale", "")))
        for s in payload.get("steps", [])
    )
    return ProtocolDraft(title=str(payload.get("title", "")), steps=steps)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _fmt(value: Any) -> str:
    return json.dumps(value) if not isinstance(value, str) else value


# Runtime failure kinds mapped back to the guard predicate that predicts them.
_FAILURE_PREDICATES = {
    "SealedTarget": "target-unsealed",
    "UnknownLabware": "target-exists",
    "InsufficientVolume": "volume-available",
    "DeviceBusy": "device-idle",
}


def _symbolic_ground(op: ProtocolOp, ref_params: set[str]) -> GroundedAction:
    """Key-level grounding for guard previews: no payload expansion."""
    return GroundedAction(
        device_id=op.device_id,
        op_name=op.op_name,
        params=dict(op.params),
        param_keys={
            name: str(op.params[name][0]) for name in ref_params if name in op.params
        },
        target_keys=op.targets,
    )


def verify_physical(
    code: ProtocolCode,
    registry: HardwareRegistry,
    memory: WorkingMemory,
    world: sim.LabWorld | None = None,
    order_rules: Iterable[tuple[str, str]] = (),
) -> VerificationReport:
    """Check every op against every applicable registry constraint.

    Static checks: device/op existence, required params, numeric bounds
    with exact unit match, enumerated values, resolvable resource
    references. With a world, guards are evaluated by dry-running the
    protocol on a clone so each op sees its predecessors' effects.
    Ordering rules are (earlier, later) op-name pairs from the task
    rubric. Deterministic; reports all violations.
    """
    violations: list[Violation] = []
    checked = 0
    walk = world.clone() if world is not None else None

    for idx, op in enumerate(code.ops):
        path = f"ops[{idx}].{op.device_id}.{op.op_name}"
        checked += 1
        try:
            spec = lookup(registry, op.device_id, op.op_name)
        except UnknownDevice:
            violations.append(
                Violation(
                    op_index=idx,
                    constraint_path=path,
                    kind="unknown_device",
                    observed=op.device_id,
                    limit="",
                    message=f"device {op.device_id!r} is not in the hardware registry",
                )
            )
            continue
        except UnknownOperation:
            violations.append(
                Violation(
                    op_index=idx,
                    constraint_path=path,
                    kind="unknown_operation",
                    observed=op.op_name,
                    limit="",
                    message=f"operation {op.op_name!r} is not declared for {op.device_id!r}",
                )
            )
            continue

        ref_params: set[str] = set()
        for pspec in spec.params:
            p_path = f"{path}.{pspec.name}"
            if pspec.kind is ParamKind.RESOURCE_REF:
                ref_params.add(pspec.name)
            checked += 1
            if pspec.name not in op.params:
                if pspec.required:
                    violations.append(
                        Violation(
                            op_index=idx,
                            constraint_path=p_path,
                            kind="missing_param",
                            observed="absent",
                            limit="required",
                            message=f"required param {pspec.name!r} missing",
                        )
                    )
                continue
            value, unit = op.params[pspec.name]
            if unit != pspec.unit:
                violations.append(
                    Violation(
                        op_index=idx,
                        constraint_path=p_path,
                        kind="range",
                        observed=unit or "(none)",
                        limit=pspec.unit or "(none)",
                        message=(
                            f"unit mismatch for {pspec.name!r}: got {unit!r}, "
                            f"schema requires {pspec.unit!r}"
                        ),
                    )
                )
                continue
            if pspec.kind is ParamKind.NUMERIC:
                if not _is_number(value):
                    violations.append(
                        Violation(
                            op_index=idx,
                            constraint_path=p_path,
                            kind="range",
                            observed=_fmt(value),
                            limit="numeric",
                            message=f"param {pspec.name!r} must be numeric",
                        )
                    )
                    continue
                low = pspec.min if pspec.min is not None else float("-inf")
                high = pspec.max if pspec.max is not None else float("inf")
                if not (low <= float(value) <= high):
                    limit = f"{pspec.max} {pspec.unit}".strip() if float(value) > high else f"{pspec.min} {pspec.unit}".strip()
                    violations.append(
                        Violation(
                            op_index=idx,
                            constraint_path=p_path,
                            kind="range",
                            observed=f"{value} {pspec.unit}".strip(),
                            limit=limit,
                            message=(
                                f"{pspec.name} = {value} {pspec.unit} outside "
                                f"[{pspec.min}, {pspec.max}] {pspec.unit}"
                            ),
                        )
                    )
            elif pspec.kind is ParamKind.ENUMERATED:
                if not isinstance(value, str) or value not in (pspec.allowed or ()):
                    violations.append(
                        Violation(
                            op_index=idx,
                            constraint_path=p_path,
                            kind="enum",
                            observed=_fmt(value),
                            limit="|".join(pspec.allowed or ()),
                            message=f"param {pspec.name!r} value {_fmt(value)} not allowed",
                        )
                    )
            elif pspec.kind is ParamKind.RESOURCE_REF:
                if not isinstance(value, str) or value not in memory:
                    violations.append(
                        Violation(
                            op_index=idx,
                            constraint_path=p_path,
                            kind="grounding",
                            observed=_fmt(value),
                            limit="bound symbol",
                            message=f"reference {_fmt(value)} has no binding in working memory",
                        )
                    )
            elif pspec.kind is ParamKind.BOOLEAN:
                if not isinstance(value, bool):
                    violations.append(
                        Violation(
                            op_index=idx,
                            constraint_path=p_path,
                            kind="enum",
                            observed=_fmt(value),
                            limit="true|false",
                            message=f"param {pspec.name!r} must be boolean",
                        )
                    )

        for t_idx, target in enumerate(op.targets):
            checked += 1
            if target not in memory:
                violations.append(
                    Violation(
                        op_index=idx,
                        constraint_path=f"{path}.targets[{t_idx}]",
                        kind="grounding",
                        observed=target,
                        limit="bound symbol",
                        message=f"target {target!r} has no binding in working memory",
                    )
                )

        if walk is not None and spec.guards:
            grounded = _symbolic_ground(op, ref_params)
            declared = {g.predicate for g in spec.guards}
            checked += len(spec.guards)
            for guard_violation in sim.preview(walk, grounded):
                predicate = _FAILURE_PREDICATES.get(guard_violation.observed)
                if predicate not in declared:
                    continue
                violations.append(
                    Violation(
                        op_index=idx,
                        constraint_path=f"{path}.guards.{predicate}",
                        kind="guard",
                        observed=guard_violation.observed,
                        limit=predicate or "",
                        message=guard_violation.message,
                    )
                )
        if walk is not None:
            # Advance the dry-run world so later guards see this op's effects.
            sim.apply(walk, _symbolic_ground(op, ref_params))

    names = [op.op_name for op in code.ops]
    for earlier, later in order_rules:
        checked += 1
        earlier_idx = [i for i, n in enumerate(names) if n == earlier]
        for i, n in enumerate(names):
            if n != later:
                continue
            if not any(e < i for e in earlier_idx) and any(e > i for e in earlier_idx):
                violations.append(
                    Violation(
                        op_index=i,
                        constraint_path=f"ops[{i}].order",
                        kind="order",
                        observed=f"{later} before {earlier}",
                        limit=f"{earlier} before {later}",
                        message=f"{later!r} must come after {earlier!r}",
                    )
                )

    return VerificationReport.from_violations(violations, checked)


@dataclass(frozen=True)
class Rubric:
    """Deterministic scientific acceptance criteria carried by the task."""

    keyword_groups: tuple[tuple[str, ...], ...] = ()
    required_steps: tuple[str, ...] = ()
    forbidden_orders: tuple[tuple[str, str], ...] = ()

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Rubric":
        return cls(
            keyword_groups=tuple(tuple(g) for g in data.get("keyword_groups", [])),
            required_steps=tuple(data.get("required_steps", [])),
            forbidden_orders=tuple((a, b) for a, b in data.get("forbidden_orders", [])),
        )

    def total_checks(self) -> int:
        return len(self.keyword_groups) + len(self.required_steps) + len(self.forbidden_orders)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def contains_phrase(haystack_tokens: list[str], phrase: str) -> bool:
    """Whether the phrase's token sequence appears contiguously."""
    needle = tokenize(phrase)
    if not needle:
        return False
    n = len(needle)
    return any(haystack_tokens[i : i + n] == needle for i in range(len(haystack_tokens) - n + 1))


@dataclass(frozen=True)
class Critique:
    kind: str  # "missing_param" for coverage gaps, "order" for sequencing
    message: str


class ScientificJudge(Protocol):
    def evaluate(self, draft: ProtocolDraft, rubric: Rubric) -> tuple[bool, list[Critique], float]: ...


class RubricJudge:
    """Default deterministic reflector: checks the draft against the rubric.

    Returns pass/fail, the critiques, and the fraction of rubric checks
    satisfied (the scientific score of the metrics suite).
    """

    def evaluate(self, draft: ProtocolDraft, rubric: Rubric) -> tuple[bool, list[Critique], float]:
        critiques: list[Critique] = []
        total = rubric.total_checks()
        if total == 0:
            return True, [], 1.0
        satisfied = 0
        text_tokens = tokenize(draft.full_text())
        for group in rubric.keyword_groups:
            if any(contains_phrase(text_tokens, member) for member in group):
                satisfied += 1
            else:
                critiques.append(
                    Critique(
                        "missing_param",
                        f"draft covers none of the required keywords: {', '.join(group)}",
                    )
                )
        step_tokens = [tokenize(f"{s.title} {s.rationale}") for s in draft.steps]
        for requirement in rubric.required_steps:
            if any(contains_phrase(tokens, requirement) for tokens in step_tokens):
                satisfied += 1
            else:
                critiques.append(
                    Critique("missing_param", f"draft is missing a required step: {requirement!r}")
                )
        for first, second in rubric.forbidden_orders:
            first_idx = [i for i, tokens in enumerate(step_tokens) if contains_phrase(tokens, first)]
            second_idx = [i for i, tokens in enumerate(step_tokens) if contains_phrase(tokens, second)]
            if first_idx and second_idx and min(first_idx) < max(second_idx):
                critiques.append(
                    Critique("order", f"step order is unsound: {first!r} must not precede {second!r}")
                )
            else:
                satisfied += 1
        return not critiques, critiques, satisfied / total


def verify_scientific(
    draft: ProtocolDraft, rubric: Rubric, judge: ScientificJudge | None = None
) -> VerificationReport:
    """Layer-1 check of the design draft; default judge is the rubric."""
    judge = judge or RubricJudge()
    if not draft.steps and not draft.title:
        return VerificationReport.from_violations(
            [
                Violation(
                    op_index=0,
                    constraint_path="draft",
                    kind="missing_param",
                    observed="empty",
                    limit="non-empty draft",
                    message="draft is empty",
                )
            ],
            checked=1,
        )
    passed, critiques, _ = judge.evaluate(draft, rubric)
    violations = [
        Violation(
            op_index=0,
            constraint_path=f"rubric[{i}]",
            kind=critique.kind,
            observed="draft",
            limit="rubric",
            message=critique.message,
        )
        for i, critique in enumerate(critiques)
    ]
    if passed:
        violations = []
    return VerificationReport.from_violations(violations, checked=max(rubric.total_checks(), 1))


def signals_from(report: VerificationReport, layer: str, signal: SignalVector) -> SignalVector:
    """Map a verification report onto the signal vector.

    A failing physical report also raises the interlock; a passing one
    clears it. Scientific reports never touch the interlock.
    """
    verdict = Verdict.PASS if report.passed else Verdict.FAIL
    if layer == "scientific":
        return replace(signal, sci=verdict)
    if layer == "physical":
        return replace(signal, phys=verdict, interlock=not report.passed)
    raise ValueError(f"unknown verification layer {layer!r}")
