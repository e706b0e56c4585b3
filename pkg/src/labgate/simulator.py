"""Virtual wet-lab world: the execution target the interlock protects.

Volumes are tracked as integer nanoliters so transfer conservation is
exact; fixtures and snapshots speak microliters. Op semantics cover the
operations the bundled registry declares (transfer, seal/unseal,
centrifuge, thermocycle, incubate); anything else advances the clock by
its duration param and touches nothing.

Physics is enforced here regardless of what the verifier concluded:
sealed labware rejects transfers, volumes cannot go negative, busy
devices refuse work. The engine never relies on this defense in depth,
but it exists.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, IO

from .errors import LabgateError
from .grounding import GroundedAction
from .violations import Violation

NL_PER_UL = 1000

FAILURE_KINDS = ("SealedTarget", "InsufficientVolume", "UnknownLabware", "DeviceBusy")


class FixtureError(LabgateError):
    pass


@dataclass
class Labware:
    key: str
    type: str  # "plate" | "trough"
    sealed: bool = False
    volume_nl: int = 0  # troughs
    wells: dict[str, int] = field(default_factory=dict)  # plates, nl per well

    def total_nl(self) -> int:
        return self.volume_nl + sum(self.wells.values())


@dataclass
class DeviceState:
    id: str
    busy: bool = False
    temp_c: float = 20.0
    last_speed_g: float = 0.0


@dataclass(frozen=True)
class ExecutedOp:
    seq: int
    op: dict[str, Any]  # grounded action JSON
    world_delta: dict[str, Any]
    timestamp: float  # simulated clock at commit

    def to_json(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "op": self.op,
            "world_delta": self.world_delta,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class RuntimeFailure:
    kind: str
    message: str

    def __post_init__(self) -> None:
        if self.kind not in FAILURE_KINDS:
            raise ValueError(f"unknown failure kind {self.kind!r}")


@dataclass(frozen=True)
class Observation:
    summary: str
    clock: float


class LabWorld:
    """Single-writer mutable world; snapshots are immutable values."""

    def __init__(
        self,
        labware: dict[str, Labware] | None = None,
        devices: dict[str, DeviceState] | None = None,
    ):
        self.labware: dict[str, Labware] = labware or {}
        self.devices: dict[str, DeviceState] = devices or {}
        self.clock: float = 0.0
        self.event_log: list[ExecutedOp] = []
        self.failures: list[RuntimeFailure] = []

    @classmethod
    def from_fixture(cls, source: str | bytes | IO | dict) -> "LabWorld":
        if hasattr(source, "read"):
            source = source.read()
        if isinstance(source, (str, bytes)):
            data = json.loads(source)
        else:
            data = source
        labware: dict[str, Labware] = {}
        for key, raw in data.get("labware", {}).items():
            lw_type = raw.get("type", "trough")
            if lw_type not in ("plate", "trough"):
                raise FixtureError(f"labware {key!r}: unknown type {lw_type!r}")
            wells = {
                well: round(float(v) * NL_PER_UL) for well, v in raw.get("wells", {}).items()
            }
            labware[key] = Labware(
                key=key,
                type=lw_type,
                sealed=bool(raw.get("sealed", False)),
                volume_nl=round(float(raw.get("volume_ul", 0.0)) * NL_PER_UL),
                wells=wells,
            )
        devices = {dev_id: DeviceState(id=dev_id) for dev_id in data.get("devices", [])}
        return cls(labware=labware, devices=devices)

    def clone(self) -> "LabWorld":
        """Scratch copy for dry-runs; starts with an empty event log."""
        other = LabWorld(
            labware=copy.deepcopy(self.labware),
            devices=copy.deepcopy(self.devices),
        )
        other.clock = self.clock
        return other

    def total_volume_nl(self) -> int:
        return sum(lw.total_nl() for lw in self.labware.values())


def _addressed_labware(action: GroundedAction) -> list[str]:
    keys = list(action.target_keys)
    for name in ("source", "dest", "target"):
        key = action.labware_key(name)
        if key is not None and key not in keys:
            keys.append(key)
    return keys


def _well_volume(lw: Labware, well: str | None) -> int:
    if lw.type == "trough":
        return lw.volume_nl
    return lw.wells.get(well or "A1", 0)


def _check(world: LabWorld, action: GroundedAction) -> RuntimeFailure | None:
    """The physical feasibility check shared by preview and apply."""
    op = action.op_name
    for key in _addressed_labware(action):
        if key not in world.labware:
            return RuntimeFailure("UnknownLabware", f"labware {key!r} not present in world")
    if op == "transfer":
        src_key = action.labware_key("source")
        dst_key = action.labware_key("dest")
        for key in (src_key, dst_key):
            if key is not None and world.labware[key].sealed:
                return RuntimeFailure("SealedTarget", f"labware {key!r} is sealed")
        if src_key is not None:
            volume_nl = round(action.numeric("volume") * NL_PER_UL)
            src = world.labware[src_key]
            well = action.params.get("source_well", (None, ""))[0]
            available = _well_volume(src, well if isinstance(well, str) else None)
            if available < volume_nl:
                return RuntimeFailure(
                    "InsufficientVolume",
                    f"{src_key!r} holds {available / NL_PER_UL} uL, need {volume_nl / NL_PER_UL} uL",
                )
    if action.device_id in world.devices and world.devices[action.device_id].busy:
        return RuntimeFailure("DeviceBusy", f"device {action.device_id!r} is busy")
    return None


def _move_volume(world: LabWorld, key: str, well: str | None, delta_nl: int) -> None:
    lw = world.labware[key]
    if lw.type == "trough":
        lw.volume_nl += delta_nl
    else:
        well = well or "A1"
        lw.wells[well] = lw.wells.get(well, 0) + delta_nl


def apply(world: LabWorld, action: GroundedAction) -> Observation | RuntimeFailure:
    """Execute one grounded op, mutating the world, or fail with it untouched.

    Failures are appended to the failure log; committed ops are appended
    to the (irreversible) event log with their world delta.
    """
    failure = _check(world, action)
    if failure is not None:
        world.failures.append(failure)
        return failure

    delta: dict[str, Any] = {}
    op = action.op_name
    if op == "transfer":
        src_key = action.labware_key("source")
        dst_key = action.labware_key("dest")
        volume_nl = round(action.numeric("volume") * NL_PER_UL)
        src_well = action.params.get("source_well", (None, ""))[0]
        dst_well = action.params.get("dest_well", (None, ""))[0]
        if src_key is not None:
            _move_volume(world, src_key, src_well if isinstance(src_well, str) else None, -volume_nl)
        if dst_key is not None:
            _move_volume(world, dst_key, dst_well if isinstance(dst_well, str) else None, +volume_nl)
        delta["moved_ul"] = volume_nl / NL_PER_UL
        summary = f"transferred {volume_nl / NL_PER_UL} uL {src_key} -> {dst_key}"
    elif op in ("seal_plate", "seal"):
        for key in _addressed_labware(action):
            world.labware[key].sealed = True
        delta["sealed"] = _addressed_labware(action)
        summary = f"sealed {', '.join(_addressed_labware(action))}"
    elif op in ("unseal_plate", "unseal", "peel_seal"):
        for key in _addressed_labware(action):
            world.labware[key].sealed = False
        delta["unsealed"] = _addressed_labware(action)
        summary = f"unsealed {', '.join(_addressed_labware(action))}"
    elif op == "centrifuge":
        speed = action.numeric("speed")
        duration = action.numeric("duration")
        if action.device_id in world.devices:
            world.devices[action.device_id].last_speed_g = speed
        world.clock += duration
        delta["speed_g"] = speed
        summary = f"centrifuged at {speed} g for {duration} s"
    elif op in ("incubate", "thermocycle", "heat", "cool"):
        temp = action.numeric("temperature", default=20.0)
        duration = action.numeric("duration")
        if action.device_id in world.devices:
            world.devices[action.device_id].temp_c = temp
        world.clock += duration
        delta["temp_c"] = temp
        summary = f"{op} at {temp} C for {duration} s"
    else:
        duration = action.numeric("duration")
        world.clock += duration
        summary = f"{op} completed"

    executed = ExecutedOp(
        seq=len(world.event_log),
        op=action.to_json(),
        world_delta=delta,
        timestamp=world.clock,
    )
    world.event_log.append(executed)
    return Observation(summary=summary, clock=world.clock)


def preview(world: LabWorld, action: GroundedAction) -> list[Violation]:
    """Violations apply() would raise, with zero state change."""
    failure = _check(world, action)
    if failure is None:
        return []
    return [
        Violation(
            op_index=0,
            constraint_path=f"world.{action.device_id}.{action.op_name}",
            kind="guard",
            observed=failure.kind,
            limit="",
            message=failure.message,
        )
    ]


def snapshot(world: LabWorld) -> tuple[str, str]:
    """Canonical sorted-key serialization of physical state plus its hash."""
    state = {
        "clock": world.clock,
        "labware": {
            key: {
                "type": lw.type,
                "sealed": lw.sealed,
                "volume_ul": lw.volume_nl / NL_PER_UL,
                "wells": {w: v / NL_PER_UL for w, v in sorted(lw.wells.items())},
            }
            for key, lw in sorted(world.labware.items())
        },
        "devices": {
            dev_id: {"busy": d.busy, "temp_c": d.temp_c, "last_speed_g": d.last_speed_g}
            for dev_id, d in sorted(world.devices.items())
        },
    }
    serialized = json.dumps(state, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(serialized.encode("utf-8")).hexdigest()
    return serialized, digest


def replay(fixture: dict | str | bytes, event_log: list[dict[str, Any]]) -> LabWorld:
    """Rebuild a world by re-applying a recorded event log to its fixture."""
    world = LabWorld.from_fixture(fixture)
    for raw in event_log:
        op = raw["op"]
        action = GroundedAction(
            device_id=op["device_id"],
            op_name=op["op_name"],
            params={k: (v[0], v[1]) for k, v in op["params"].items()},
            target_keys=tuple(op["targets"]),
        )
        result = apply(world, action)
        if isinstance(result, RuntimeFailure):
            raise LabgateError(f"replay diverged at seq {raw['seq']}: {result.message}")
    return world
