"""Hardware registry: the machine-readable catalog of device constraints.

The registry is the ground truth for physical verification. It is parsed
once, validated against the structural invariants below, and then shared
immutably across runs. Unknown device or operation ids are verification
failures at runtime, never parse failures here.

Registry file format (JSON):

    {
      "version": str,
      "devices": [
        {
          "id": str,
          "category": "LH" | "TC" | "CF" | "OTHER",
          "operations": [
            {
              "name": str,
              "params": [
                {"name": str, "kind": str, "unit": str,
                 "min"?: num, "max"?: num, "allowed"?: [str],
                 "required": bool}
              ],
              "guards": [{"predicate": str, "message": str}]
            }
          ]
        }
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, IO

from .errors import LabgateError


class ParseError(LabgateError):
    """Malformed registry syntax; carries line/column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class SchemaError(LabgateError):
    """A structural invariant violation, with the path that violates it."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class UnknownDevice(LabgateError):
    def __init__(self, device_id: str):
        self.device_id = device_id
        super().__init__(f"unknown device: {device_id!r}")


class UnknownOperation(LabgateError):
    def __init__(self, device_id: str, op_name: str):
        self.device_id = device_id
        self.op_name = op_name
        super().__init__(f"unknown operation {op_name!r} on device {device_id!r}")


class ParamKind(str, Enum):
    NUMERIC = "numeric"
    ENUMERATED = "enumerated"
    RESOURCE_REF = "resource-reference"
    BOOLEAN = "boolean"


class DeviceCategory(str, Enum):
    LH = "LH"
    TC = "TC"
    CF = "CF"
    OTHER = "OTHER"


GUARD_PREDICATES = ("target-unsealed", "target-exists", "volume-available", "device-idle")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: ParamKind
    unit: str = ""
    min: float | None = None
    max: float | None = None
    allowed: tuple[str, ...] | None = None
    required: bool = True


@dataclass(frozen=True)
class GuardRule:
    predicate: str
    message: str


@dataclass(frozen=True)
class OperationSpec:
    name: str
    params: tuple[ParamSpec, ...] = ()
    guards: tuple[GuardRule, ...] = ()

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class DeviceSchema:
    id: str
    category: DeviceCategory
    operations: tuple[OperationSpec, ...] = ()

    def operation(self, name: str) -> OperationSpec | None:
        for op in self.operations:
            if op.name == name:
                return op
        return None


@dataclass(frozen=True)
class HardwareRegistry:
    devices: dict[str, DeviceSchema] = field(default_factory=dict)
    version: str = "0"


def _build_param(raw: dict[str, Any], path: str) -> ParamSpec:
    try:
        kind = ParamKind(raw.get("kind"))
    except ValueError:
        raise SchemaError(path, f"unknown param kind {raw.get('kind')!r}")
    allowed = raw.get("allowed")
    return ParamSpec(
        name=str(raw.get("name", "")),
        kind=kind,
        unit=str(raw.get("unit", "")),
        min=raw.get("min"),
        max=raw.get("max"),
        allowed=tuple(allowed) if allowed is not None else None,
        required=bool(raw.get("required", True)),
    )


def _build_registry(data: Any) -> HardwareRegistry:
    if not isinstance(data, dict):
        raise SchemaError("$", "registry root must be an object")
    devices: dict[str, DeviceSchema] = {}
    for d_idx, raw_dev in enumerate(data.get("devices", [])):
        path = f"devices[{d_idx}]"
        dev_id = str(raw_dev.get("id", ""))
        try:
            category = DeviceCategory(raw_dev.get("category", "OTHER"))
        except ValueError:
            raise SchemaError(path, f"unknown category {raw_dev.get('category')!r}")
        ops = []
        for o_idx, raw_op in enumerate(raw_dev.get("operations", [])):
            op_path = f"{path}.operations[{o_idx}]"
            params = tuple(
                _build_param(raw_p, f"{op_path}.params[{p_idx}]")
                for p_idx, raw_p in enumerate(raw_op.get("params", []))
            )
            guards = tuple(
                GuardRule(predicate=str(g.get("predicate", "")), message=str(g.get("message", "")))
                for g in raw_op.get("guards", [])
            )
            ops.append(OperationSpec(name=str(raw_op.get("name", "")), params=params, guards=guards))
        if dev_id in devices:
            raise SchemaError(path, f"duplicate device id {dev_id!r}")
        devices[dev_id] = DeviceSchema(id=dev_id, category=category, operations=tuple(ops))
    return HardwareRegistry(devices=devices, version=str(data.get("version", "0")))


def load_registry(source: str | bytes | IO) -> HardwareRegistry:
    """Parse and validate a registry file; rejects any invariant violation."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    registry = _build_registry(data)
    errors = validate_registry(registry)
    if errors:
        raise errors[0]
    return registry


def lookup(registry: HardwareRegistry, device_id: str, op_name: str) -> OperationSpec:
    """Retrieve the constraint spec for one device operation.

    Pure and total over arbitrary id strings: absent ids raise the typed
    errors that drive the physical-verification Fail signal downstream.
    """
    device = registry.devices.get(device_id)
    if device is None:
        raise UnknownDevice(device_id)
    op = device.operation(op_name)
    if op is None:
        raise UnknownOperation(device_id, op_name)
    return op


def _validate_param(param: ParamSpec, path: str, errors: list[SchemaError]) -> None:
    if not param.name:
        errors.append(SchemaError(path, "param name must be non-empty"))
    if param.kind is ParamKind.NUMERIC:
        if param.min is None and param.max is None:
            errors.append(SchemaError(path, "numeric param needs min and/or max"))
        elif param.min is not None and param.max is not None and param.min > param.max:
            errors.append(SchemaError(path, f"min {param.min} exceeds max {param.max}"))
        if param.allowed is not None:
            errors.append(SchemaError(path, "numeric param cannot declare allowed values"))
    elif param.kind is ParamKind.ENUMERATED:
        if not param.allowed:
            errors.append(SchemaError(path, "enumerated param needs non-empty allowed list"))
        if param.min is not None or param.max is not None:
            errors.append(SchemaError(path, "enumerated param cannot declare min/max"))
    elif param.kind is ParamKind.RESOURCE_REF:
        if param.min is not None or param.max is not None or param.allowed is not None:
            errors.append(SchemaError(path, "resource-reference param cannot declare bounds"))


def validate_registry(registry: HardwareRegistry) -> list[SchemaError]:
    """Check every structural invariant; empty result means the registry is valid."""
    errors: list[SchemaError] = []
    if not registry.devices:
        errors.append(SchemaError("devices", "registry must declare at least one device"))
    for dev_id, device in registry.devices.items():
        dev_path = f"devices[{dev_id}]"
        if not dev_id:
            errors.append(SchemaError(dev_path, "device id must be non-empty"))
        seen_ops: set[str] = set()
        for op in device.operations:
            op_path = f"{dev_path}.{op.name}"
            if not op.name:
                errors.append(SchemaError(op_path, "operation name must be non-empty"))
            if op.name in seen_ops:
                errors.append(SchemaError(op_path, f"duplicate operation name {op.name!r}"))
            seen_ops.add(op.name)
            seen_params: set[str] = set()
            for param in op.params:
                p_path = f"{op_path}.{param.name}"
                if param.name in seen_params:
                    errors.append(SchemaError(p_path, f"duplicate param name {param.name!r}"))
                seen_params.add(param.name)
                _validate_param(param, p_path, errors)
            for guard in op.guards:
                if guard.predicate not in GUARD_PREDICATES:
                    errors.append(
                        SchemaError(f"{op_path}.guards", f"unknown guard predicate {guard.predicate!r}")
                    )
    return errors


def device_to_json(device: DeviceSchema) -> dict[str, Any]:
    """One device schema as plain JSON; also the payload bound behind the
    device's symbol in working memory."""
    ops = []
    for op in device.operations:
        params = []
        for p in op.params:
            raw: dict[str, Any] = {"name": p.name, "kind": p.kind.value, "unit": p.unit}
            if p.min is not None:
                raw["min"] = p.min
            if p.max is not None:
                raw["max"] = p.max
            if p.allowed is not None:
                raw["allowed"] = list(p.allowed)
            raw["required"] = p.required
            params.append(raw)
        ops.append(
            {
                "name": op.name,
                "params": params,
                "guards": [{"predicate": g.predicate, "message": g.message} for g in op.guards],
            }
        )
    return {"id": device.id, "category": device.category.value, "operations": ops}


def serialize(registry: HardwareRegistry) -> str:
    """Canonical JSON serialization; load_registry(serialize(r)) == r."""
    devices = [device_to_json(device) for device in registry.devices.values()]
    return json.dumps({"version": registry.version, "devices": devices}, indent=2)
