"""Semantic symbol grounding: working memory, projection, and resolution.

Physical payloads (device schemas, labware descriptions, data blobs) are
bound to short symbolic keys. Planners only ever see the projected digest
(keys, kinds, one-line briefs); execution re-expands keys to payloads via
resolution. The working memory never parses payload internals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterator

from ._kernels import count_tokens
from .errors import LabgateError

__all__ = [
    "SymbolEntry",
    "WorkingMemory",
    "ContextDigest",
    "GroundingError",
    "DuplicateKey",
    "project",
    "resolve",
    "count_tokens",
]

SYMBOL_KINDS = ("reagent", "labware", "device", "data", "derived")


class DuplicateKey(LabgateError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"key already bound: {key!r} (pass overwrite=True to rebind)")


class GroundingError(LabgateError):
    """A symbolic reference with no binding: a hallucinated resource."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"unresolved symbol: {key!r}")


@dataclass(frozen=True)
class SymbolEntry:
    key: str
    payload: Any
    kind: str = "data"
    brief: str = ""

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("symbol key must be non-empty")
        if self.payload is None:
            raise ValueError(f"payload for {self.key!r} must be non-null")
        if self.kind not in SYMBOL_KINDS:
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if len(self.brief.split()) > 8:
            raise ValueError(f"brief for {self.key!r} exceeds 8 words")


@dataclass
class WorkingMemory:
    """Insertion-ordered symbol table; rebinding requires an explicit flag."""

    entries: dict[str, SymbolEntry] = field(default_factory=dict)
    revision: int = 0

    def bind(self, entry: SymbolEntry, overwrite: bool = False) -> None:
        if entry.key in self.entries and not overwrite:
            raise DuplicateKey(entry.key)
        self.entries[entry.key] = entry
        self.revision += 1

    def get(self, key: str) -> SymbolEntry:
        entry = self.entries.get(key)
        if entry is None:
            raise GroundingError(key)
        return entry

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[SymbolEntry]:
        return iter(self.entries.values())

    def snapshot(self) -> dict[str, Any]:
        """Exportable memory snapshot for traces."""
        return {
            "revision": self.revision,
            "entries": [
                {"key": e.key, "kind": e.kind, "brief": e.brief, "payload": e.payload}
                for e in self.entries.values()
            ],
        }


def bind(memory: WorkingMemory, entry: SymbolEntry, overwrite: bool = False) -> None:
    memory.bind(entry, overwrite=overwrite)


@dataclass(frozen=True)
class ContextDigest:
    """Compressed context: every key with kind and brief, zero payload bytes."""

    items: tuple[tuple[str, str, str], ...]
    token_count: int

    def render(self) -> str:
        return "\n".join(f"{key} [{kind}] {brief}".rstrip() for key, kind, brief in self.items)

    def keys(self) -> tuple[str, ...]:
        return tuple(key for key, _, _ in self.items)


def project(memory: WorkingMemory) -> ContextDigest:
    """Compress the working memory to planner-visible pointers.

    Pure function of the key/kind/brief triples: payload bytes never
    influence the digest.
    """
    items = tuple((e.key, e.kind, e.brief) for e in memory.entries.values())
    digest = ContextDigest(items=items, token_count=0)
    return replace(digest, token_count=count_tokens(digest.render()))


def payload_tokens(memory: WorkingMemory) -> int:
    """Token size of the raw payloads: the cost projection avoids."""
    return sum(
        count_tokens(json.dumps(e.payload, sort_keys=True, separators=(",", ":")))
        for e in memory.entries.values()
    )


def resolve(action: Any, memory: WorkingMemory, registry: Any = None) -> Any:
    """Ground a symbolic operation: expand resource references to payloads.

    Every target key and every parameter of resource-reference kind is
    replaced by the referenced payload; all other parameters pass through
    unchanged. Raises GroundingError naming the first unresolved key.

    The registry identifies which params are references; without it only
    targets are resolved. Works on any object with device_id / op_name /
    params / targets attributes (see verify.ProtocolOp) and returns a
    GroundedAction.
    """
    ref_params: set[str] = set()
    if registry is not None:
        device = registry.devices.get(action.device_id)
        if device is not None:
            op_spec = device.operation(action.op_name)
            if op_spec is not None:
                ref_params = {
                    p.name for p in op_spec.params if p.kind.value == "resource-reference"
                }
    params: dict[str, Any] = {}
    param_keys: dict[str, str] = {}
    for name, (value, unit) in action.params.items():
        if name in ref_params:
            key = str(value)
            params[name] = (memory.get(key).payload, unit)
            param_keys[name] = key
        else:
            params[name] = (value, unit)
    targets = tuple(memory.get(key).payload for key in action.targets)
    return GroundedAction(
        device_id=action.device_id,
        op_name=action.op_name,
        params=params,
        param_keys=param_keys,
        targets=targets,
        target_keys=tuple(action.targets),
    )


@dataclass(frozen=True)
class GroundedAction:
    """A device operation with every symbolic pointer expanded.

    param_keys / target_keys retain the symbol keys each payload came from;
    the simulator addresses world state by key, so even execution never has
    to look inside a payload.
    """

    device_id: str
    op_name: str
    params: dict[str, tuple[Any, str]]
    param_keys: dict[str, str] = field(default_factory=dict)
    targets: tuple[Any, ...] = ()
    target_keys: tuple[str, ...] = ()

    def numeric(self, name: str, default: float = 0.0) -> float:
        value_unit = self.params.get(name)
        if value_unit is None:
            return default
        value = value_unit[0]
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        return default

    def labware_key(self, name: str) -> str | None:
        """Symbol key behind a resource param, falling back to a raw string value."""
        if name in self.param_keys:
            return self.param_keys[name]
        value_unit = self.params.get(name)
        if value_unit is not None and isinstance(value_unit[0], str):
            return value_unit[0]
        return None

    def to_json(self) -> dict[str, Any]:
        """Symbolic serialization: resource params revert to their keys.

        Keys, not payloads, are what replay and the compliance audit need
        to re-ground and re-verify the executed record.
        """
        params = {}
        for name, (value, unit) in self.params.items():
            params[name] = [self.param_keys.get(name, value), unit]
        return {
            "device_id": self.device_id,
            "op_name": self.op_name,
            "params": params,
            "targets": list(self.target_keys),
        }
