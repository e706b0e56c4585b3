"""Violation records shared by the verifier and the simulator.

Re-exported by labgate.verify, which owns the verification surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any


VIOLATION_KINDS = (
    "range",
    "enum",
    "missing_param",
    "unknown_device",
    "unknown_operation",
    "grounding",
    "guard",
    "order",
)


@dataclass(frozen=True)
class Violation:
    op_index: int
    constraint_path: str
    kind: str
    observed: str
    limit: str
    message: str

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("violation message must be non-empty")
        if self.kind not in VIOLATION_KINDS:
            raise ValueError(f"unknown violation kind {self.kind!r}")

    def to_json(self) -> dict[str, Any]:
        return {
            "op_index": self.op_index,
            "constraint_path": self.constraint_path,
            "kind": self.kind,
            "observed": self.observed,
            "limit": self.limit,
            "message": self.message,
        }


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    violations: tuple[Violation, ...] = ()
    checked_constraints: int = 0

    def __post_init__(self) -> None:
        if self.passed != (len(self.violations) == 0):
            raise ValueError("passed must equal violations-empty")

    @classmethod
    def from_violations(
        cls, violations: list[Violation], checked: int = 0
    ) -> "VerificationReport":
        ordered = tuple(sorted(violations, key=lambda v: v.op_index))
        return cls(passed=not ordered, violations=ordered, checked_constraints=checked)

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]

    def to_json(self, layer: str) -> dict[str, Any]:
        return {
            "layer": layer,
            "passed": self.passed,
            "violations": [v.to_json() for v in self.violations],
            "checked_constraints": self.checked_constraints,
        }
