from __future__ import annotations

import json
import random

import pytest

from labgate.fsm import SignalVector, Verdict
from labgate.grounding import SymbolEntry, WorkingMemory
from labgate.registry import load_registry
from labgate.simulator import LabWorld
from labgate.verify import (
    CodeParseError,
    ProtocolCode,
    ProtocolDraft,
    DraftStep,
    Rubric,
    RubricJudge,
    parse_code,
    parse_draft,
    signals_from,
    verify_physical,
    verify_scientific,
)
from oracles import verify_oracle


def _memory(*keys: str) -> WorkingMemory:
    memory = WorkingMemory()
    for key in keys:
        memory.bind(SymbolEntry(key=key, payload={"labware": key}, kind="labware", brief="bench item"))
    return memory


BENCH_FIXTURE = {
    "labware": {
        "trough_1": {"type": "trough", "volume_ul": 1000.0},
        "plate_1": {"type": "plate", "wells": {"A1": 0.0}},
    },
    "devices": ["centrifuge_1", "pipettor_p300", "plate_sealer_1"],
}


def _code(*ops) -> ProtocolCode:
    return parse_code({"schema_version": "1", "ops": list(ops)})


def _centrifuge(speed, unit="g"):
    return {
        "device_id": "centrifuge_1",
        "op_name": "centrifuge",
        "params": {"speed": [speed, unit], "duration": [300, "s"]},
        "targets": ["plate_1"],
    }


def _transfer(source="trough_1", dest="plate_1", volume=50):
    return {
        "device_id": "pipettor_p300",
        "op_name": "transfer",
        "params": {
            "source": [source, ""],
            "dest": [dest, ""],
            "volume": [volume, "uL"],
            "dest_well": ["A1", ""],
        },
        "targets": [],
    }


def _seal(target="plate_1"):
    return {
        "device_id": "plate_sealer_1",
        "op_name": "seal_plate",
        "params": {"seal_type": ["foil", ""]},
        "targets": [target],
    }


class TestPhysicalExamples:
    def test_overrange_speed_names_the_limit(self, registry):
        report = verify_physical(_code(_centrifuge(25000)), registry, _memory("plate_1"))
        assert not report.passed
        assert len(report.violations) == 1
        violation = report.violations[0]
        assert violation.kind == "range"
        assert violation.limit == "15000 g"
        assert "25000" in violation.observed

    def test_maximum_speed_passes(self, registry):
        report = verify_physical(_code(_centrifuge(15000)), registry, _memory("plate_1"))
        assert report.passed
        assert report.violations == ()

    def test_unresolved_source_is_grounding_violation(self, registry):
        report = verify_physical(
            _code(_transfer(source="buffer_x")), registry, _memory("plate_1", "trough_1")
        )
        kinds = [v.kind for v in report.violations]
        assert kinds == ["grounding"]
        assert "buffer_x" in report.violations[0].message

    def test_seal_then_transfer_raises_guard_at_op_1(self, registry):
        world = LabWorld.from_fixture(BENCH_FIXTURE)
        report = verify_physical(
            _code(_seal(), _transfer()),
            registry,
            _memory("plate_1", "trough_1"),
            world=world,
        )
        guards = [v for v in report.violations if v.kind == "guard"]
        assert len(guards) == 1
        assert guards[0].op_index == 1
        assert "sealed" in guards[0].message.lower() or "seal" in guards[0].message.lower()

    def test_order_rule_flags_reordered_dependency(self, registry):
        report = verify_physical(
            _code(_seal(), _transfer()),
            registry,
            _memory("plate_1", "trough_1"),
            order_rules=(("transfer", "seal_plate"),),
        )
        orders = [v for v in report.violations if v.kind == "order"]
        assert len(orders) == 1
        assert orders[0].op_index == 0

    def test_unit_mismatch_is_range_violation(self, registry):
        report = verify_physical(_code(_centrifuge(5000, unit="rpm")), registry, _memory("plate_1"))
        assert [v.kind for v in report.violations] == ["range"]
        assert "unit mismatch" in report.violations[0].message

    def test_missing_required_param(self, registry):
        op = _centrifuge(5000)
        del op["params"]["duration"]
        report = verify_physical(_code(op), registry, _memory("plate_1"))
        assert [v.kind for v in report.violations] == ["missing_param"]

    def test_unknown_device_and_operation(self, registry):
        ghost = {"device_id": "ghost", "op_name": "x", "params": {}, "targets": []}
        teleport = {"device_id": "centrifuge_1", "op_name": "teleport", "params": {}, "targets": []}
        report = verify_physical(_code(ghost, teleport), registry, _memory())
        assert [v.kind for v in report.violations] == ["unknown_device", "unknown_operation"]

    def test_enum_violation(self, registry):
        op = _seal()
        op["params"]["seal_type"] = ["duct_tape", ""]
        report = verify_physical(_code(op), registry, _memory("plate_1"))
        assert [v.kind for v in report.violations] == ["enum"]

    def test_no_short_circuit_reports_all(self, registry):
        report = verify_physical(
            _code(_centrifuge(99999), _transfer(source="nowhere")),
            registry,
            _memory("plate_1"),
        )
        # over-range speed, unresolved source, unresolved dest is bound so
        # only the ghost source fails
        assert len(report.violations) == 2
        assert {v.op_index for v in report.violations} == {0, 1}

    def test_deterministic_reports(self, registry):
        code = _code(_centrifuge(99999), _seal("ghost"))
        memory = _memory("plate_1")
        first = verify_physical(code, registry, memory)
        for _ in range(3):
            again = verify_physical(code, registry, memory)
            assert again == first


class TestMonotonicity:
    def test_adding_constraint_never_rescues_failure(self):
        base = {
            "version": "1",
            "devices": [
                {
                    "id": "dev",
                    "category": "OTHER",
                    "operations": [
                        {
                            "name": "op",
                            "params": [
                                {"name": "x", "kind": "numeric", "unit": "u", "min": 0, "max": 10, "required": True}
                            ],
                            "guards": [],
                        }
                    ],
                }
            ],
        }
        code = _code({"device_id": "dev", "op_name": "op", "params": {"x": [20, "u"]}, "targets": []})
        memory = _memory()
        assert not verify_physical(code, load_registry(json.dumps(base)), memory).passed
        rng = random.Random(3)
        for _ in range(50):
            extended = json.loads(json.dumps(base))
            extended["devices"][0]["operations"][0]["params"].append(
                {
                    "name": f"extra_{rng.randrange(1000)}",
                    "kind": "numeric",
                    "unit": "u",
                    "min": 0,
                    "max": rng.randrange(1, 100),
                    "required": rng.random() < 0.5,
                }
            )
            report = verify_physical(code, load_registry(json.dumps(extended)), memory)
            assert not report.passed


class TestParsing:
    def test_parse_round_trip(self):
        code = _code(_centrifuge(1000), _transfer())
        assert parse_code(code.to_json()) == code

    @pytest.mark.parametrize(
        "payload",
        [
            "not json {",
            {"ops": []},
            {"ops": "nope"},
            {"ops": [{"device_id": 5, "op_name": "x"}]},
            {"ops": [{"device_id": "d", "op_name": "o", "params": {"p": [1]}}]},
            42,
        ],
    )
    def test_parse_failures(self, payload):
        with pytest.raises(CodeParseError):
            parse_code(payload)


DRAFT = ProtocolDraft(
    title="Pellet and hold",
    steps=(
        DraftStep("Transfer the lysate", "Move sample into the spin plate."),
        DraftStep("Include a negative control", "A no template control well guards contamination."),
        DraftStep("Centrifuge within the rotor limit", "Spin below the rated maximum."),
    ),
)

RUBRIC = Rubric(
    keyword_groups=(("centrifuge", "spin"), ("negative control",)),
    required_steps=("negative control",),
    forbidden_orders=(),
)


class TestScientific:
    def test_satisfying_draft_passes(self):
        report = verify_scientific(DRAFT, RUBRIC)
        assert report.passed

    def test_missing_control_fails_naming_it(self):
        gutted = ProtocolDraft(title=DRAFT.title, steps=(DRAFT.steps[0], DRAFT.steps[2]))
        report = verify_scientific(gutted, RUBRIC)
        assert not report.passed
        assert any("negative control" in v.message for v in report.violations)

    def test_empty_draft_fails(self):
        report = verify_scientific(ProtocolDraft(title="", steps=()), RUBRIC)
        assert not report.passed

    def test_forbidden_order_detected(self):
        rubric = Rubric(forbidden_orders=(("seal the plate", "transfer"),))
        out_of_order = ProtocolDraft(
            title="",
            steps=(DraftStep("Seal the plate", ""), DraftStep("Transfer samples", "")),
        )
        report = verify_scientific(out_of_order, rubric)
        assert not report.passed
        assert report.violations[0].kind == "order"
        fixed = ProtocolDraft(
            title="",
            steps=(DraftStep("Transfer samples", ""), DraftStep("Seal the plate", "")),
        )
        assert verify_scientific(fixed, rubric).passed

    def test_rubric_satisfaction_fraction(self):
        gutted = ProtocolDraft(title=DRAFT.title, steps=(DRAFT.steps[0], DRAFT.steps[2]))
        _, _, score = RubricJudge().evaluate(gutted, RUBRIC)
        # keyword group "centrifuge" holds, "negative control" and the
        # required step both fail: 1 of 3
        assert score == pytest.approx(1 / 3)

    def test_draft_parse(self):
        draft = parse_draft({"title": "t", "steps": [{"title": "s", "rationale": "r"}]})
        assert draft.steps[0].title == "s"


class TestSignalsFrom:
    def test_physical_failure_raises_interlock(self, registry):
        report = verify_physical(_code(_centrifuge(25000)), registry, _memory("plate_1"))
        signal = signals_from(report, "physical", SignalVector(code=True))
        assert signal.phys is Verdict.FAIL and signal.interlock

    def test_physical_pass_clears_interlock(self, registry):
        report = verify_physical(_code(_centrifuge(15000)), registry, _memory("plate_1"))
        signal = signals_from(report, "physical", SignalVector(code=True))
        assert signal.phys is Verdict.PASS and not signal.interlock

    def test_scientific_pass_leaves_interlock_alone(self):
        report = verify_scientific(DRAFT, RUBRIC)
        base = SignalVector(draft=True, code=True, phys=Verdict.FAIL, interlock=True)
        signal = signals_from(report, "scientific", base)
        assert signal.sci is Verdict.PASS and signal.interlock


# --- randomized oracle equivalence -------------------------------------------

UNITS = ["g", "uL", "C", "s", ""]
KINDS = ["numeric", "enumerated", "resource-reference", "boolean"]


def random_registry(rng: random.Random) -> dict:
    devices = []
    for d in range(rng.randint(1, 3)):
        ops = []
        for o in range(rng.randint(1, 3)):
            params = []
            for p in range(rng.randint(0, 4)):
                kind = rng.choice(KINDS)
                param = {
                    "name": f"p{p}",
                    "kind": kind,
                    "unit": rng.choice(UNITS),
                    "required": rng.random() < 0.7,
                }
                if kind == "numeric":
                    lo = rng.randint(-5, 50)
                    param["min"] = lo
                    param["max"] = lo + rng.randint(0, 100)
                elif kind == "enumerated":
                    param["allowed"] = [f"v{i}" for i in range(rng.randint(1, 3))]
                params.append(param)
            name = rng.choice(["transfer", "seal_plate", "unseal_plate", "centrifuge", "op_misc"])
            if any(op["name"] == name for op in ops):
                continue
            guards = []
            if rng.random() < 0.6:
                guards = [
                    {"predicate": p, "message": f"guard {p}"}
                    for p in rng.sample(
                        ["target-exists", "target-unsealed", "volume-available", "device-idle"],
                        k=rng.randint(1, 3),
                    )
                ]
            ops.append({"name": name, "params": params, "guards": guards})
        devices.append({"id": f"dev{d}", "category": rng.choice(["LH", "TC", "CF", "OTHER"]), "operations": ops})
    return {"version": "1", "devices": devices}


def random_value(rng: random.Random, pspec: dict | None, memory_keys: list[str]):
    """Sometimes compliant, sometimes violating, sometimes nonsense."""
    roll = rng.random()
    if pspec is None or roll < 0.15:
        return rng.choice([1, "x", True, 3.5, "plate_1"])
    kind = pspec["kind"]
    if kind == "numeric":
        if roll < 0.6:
            return rng.randint(pspec["min"], pspec["max"])
        return pspec["max"] + rng.randint(1, 50)
    if kind == "enumerated":
        if roll < 0.6:
            return rng.choice(pspec["allowed"])
        return "not_allowed"
    if kind == "resource-reference":
        if roll < 0.6 and memory_keys:
            return rng.choice(memory_keys)
        return f"ghost_{rng.randrange(100)}"
    return rng.choice([True, False, "yes"])


def random_case(rng: random.Random):
    registry = random_registry(rng)
    memory_keys = ["plate_1", "trough_1", "tube_1"][: rng.randint(0, 3)]
    fixture = {
        "labware": {
            "plate_1": {"type": "plate", "wells": {"A1": 100.0}, "sealed": rng.random() < 0.3},
            "trough_1": {"type": "trough", "volume_ul": rng.choice([0.0, 20.0, 1000.0])},
        },
        "devices": [d["id"] for d in registry["devices"]],
    }
    protocol = []
    for _ in range(rng.randint(1, 6)):
        if rng.random() < 0.1:
            protocol.append(
                {"device_id": "ghost_dev", "op_name": "x", "params": {}, "targets": []}
            )
            continue
        device = rng.choice(registry["devices"])
        if rng.random() < 0.1 or not device["operations"]:
            protocol.append(
                {"device_id": device["id"], "op_name": "missing_op", "params": {}, "targets": []}
            )
            continue
        op_spec = rng.choice(device["operations"])
        params = {}
        for pspec in op_spec["params"]:
            if not pspec.get("required", True) and rng.random() < 0.3:
                continue
            if rng.random() < 0.08:
                continue  # drop a required param sometimes
            unit = pspec["unit"] if rng.random() < 0.85 else rng.choice(UNITS)
            params[pspec["name"]] = [random_value(rng, pspec, memory_keys), unit]
        op = {
            "device_id": device["id"],
            "op_name": op_spec["name"],
            "params": params,
            "targets": rng.sample(["plate_1", "trough_1", "nowhere"], k=rng.randint(0, 2)),
        }
        if op_spec["name"] == "transfer" and rng.random() < 0.7:
            op["params"].setdefault("source", ["trough_1", ""])
            op["params"].setdefault("dest", ["plate_1", ""])
            op["params"].setdefault("volume", [rng.choice([5, 50, 5000]), "uL"])
        protocol.append(op)
    order_rules = []
    if rng.random() < 0.4:
        order_rules.append(("transfer", "seal_plate"))
    return registry, memory_keys, fixture, protocol, order_rules


def run_oracle_comparison(cases: int, seed: int, with_world: bool) -> None:
    rng = random.Random(seed)
    for case in range(cases):
        registry_doc, memory_keys, fixture, protocol, order_rules = random_case(rng)
        registry = load_registry(json.dumps(registry_doc))
        memory = _memory(*memory_keys)
        world = LabWorld.from_fixture(fixture) if with_world else None
        code = parse_code({"ops": protocol})
        report = verify_physical(
            code, registry, memory, world=world, order_rules=tuple(order_rules)
        )
        expected = verify_oracle(
            protocol,
            registry_doc,
            set(memory_keys),
            fixture=fixture if with_world else None,
            order_rules=order_rules,
        )
        got = sorted((v.op_index, v.kind) for v in report.violations)
        assert got == sorted(expected), f"case {case} (seed {seed}) diverged"
        assert report.passed == (not expected)


def test_oracle_equivalence_static():
    run_oracle_comparison(1500, seed=11, with_world=False)


def test_oracle_equivalence_with_guard_walk():
    run_oracle_comparison(1500, seed=29, with_world=True)
