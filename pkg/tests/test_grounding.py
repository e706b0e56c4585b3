from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labgate.engine import bind_run_symbols
from labgate.grounding import (
    DuplicateKey,
    GroundingError,
    SymbolEntry,
    WorkingMemory,
    count_tokens,
    payload_tokens,
    project,
    resolve,
)
from labgate.verify import ProtocolOp


def _memory(*entries: SymbolEntry) -> WorkingMemory:
    memory = WorkingMemory()
    for entry in entries:
        memory.bind(entry)
    return memory


def _entry(key: str, payload=None, kind="labware", brief="a labware item") -> SymbolEntry:
    return SymbolEntry(key=key, payload=payload or {"labware": key}, kind=kind, brief=brief)


def test_bind_and_resolve_round_trip():
    memory = _memory(_entry("plate_1"))
    op = ProtocolOp(device_id="d", op_name="o", params={}, targets=("plate_1",))
    grounded = resolve(op, memory)
    assert grounded.targets == ({"labware": "plate_1"},)
    assert grounded.target_keys == ("plate_1",)


def test_bind_twice_without_overwrite_is_duplicate():
    memory = _memory(_entry("plate_1"))
    with pytest.raises(DuplicateKey):
        memory.bind(_entry("plate_1"))


def test_rebind_with_overwrite_bumps_revision():
    memory = _memory(_entry("plate_1"))
    before = memory.revision
    memory.bind(_entry("plate_1", payload={"labware": "plate_1", "v": 2}), overwrite=True)
    assert memory.revision == before + 1
    assert memory.get("plate_1").payload["v"] == 2


def test_unresolved_target_names_the_key():
    memory = _memory(_entry("plate_1"))
    op = ProtocolOp(device_id="d", op_name="o", params={}, targets=("new_plate",))
    with pytest.raises(GroundingError) as excinfo:
        resolve(op, memory)
    assert excinfo.value.key == "new_plate"


def test_resolve_expands_reference_params_via_registry(registry):
    memory = _memory(_entry("trough_1"), _entry("plate_1"))
    op = ProtocolOp(
        device_id="pipettor_p300",
        op_name="transfer",
        params={"source": ("trough_1", ""), "dest": ("plate_1", ""), "volume": (50, "uL")},
    )
    grounded = resolve(op, memory, registry)
    assert grounded.params["source"][0] == {"labware": "trough_1"}
    assert grounded.param_keys["source"] == "trough_1"
    assert grounded.params["volume"] == (50, "uL")  # non-reference passes through
    # serialization reverts references to their keys
    assert grounded.to_json()["params"]["source"] == ["trough_1", ""]


def test_resolve_without_refs_is_identity():
    memory = _memory(_entry("plate_1"))
    op = ProtocolOp(device_id="d", op_name="o", params={"speed": (100, "g")}, targets=())
    grounded = resolve(op, memory)
    assert grounded.params == {"speed": (100, "g")}
    assert grounded.targets == ()


def test_238_entries_bind_and_preserve_order():
    memory = WorkingMemory()
    for i in range(238):
        memory.bind(_entry(f"item_{i:03d}"))
    assert len(memory) == 238
    keys = [e.key for e in memory]
    assert keys == [f"item_{i:03d}" for i in range(238)]
    for i in range(238):
        assert memory.get(f"item_{i:03d}").key == f"item_{i:03d}"


def test_project_lists_every_key_without_payload_bytes():
    memory = _memory(
        _entry("plate_1"),
        _entry("trough_1", payload={"labware": "trough_1", "secret": "UNIQUEPAYLOADBYTES"}),
        _entry("centrifuge_1", kind="device", brief="CF device schema"),
    )
    digest = project(memory)
    assert digest.keys() == ("plate_1", "trough_1", "centrifuge_1")
    assert "UNIQUEPAYLOADBYTES" not in digest.render()


def test_project_empty_memory():
    digest = project(WorkingMemory())
    assert digest.items == ()
    assert digest.token_count == 0


def test_projection_ignores_payload_changes():
    base = _memory(_entry("plate_1"), _entry("trough_1"))
    changed = _memory(
        _entry("plate_1", payload={"labware": "plate_1", "extra": "x" * 5000}),
        _entry("trough_1", payload={"totally": ["different", {"nested": 1}]}),
    )
    assert project(base) == project(changed)


@settings(max_examples=200)
@given(
    keys=st.lists(
        st.text(alphabet="abcdefgh_123", min_size=1, max_size=10), min_size=1, max_size=12, unique=True
    ),
    data=st.data(),
)
def test_losslessness_property(keys, data):
    payload_strategy = st.recursive(
        st.one_of(st.integers(), st.text(max_size=8), st.booleans()),
        lambda children: st.lists(children, max_size=3)
        | st.dictionaries(st.text(max_size=4), children, max_size=3),
        max_leaves=6,
    )
    memory = WorkingMemory()
    payloads = {}
    for key in keys:
        payload = data.draw(payload_strategy)
        if payload is None:
            payload = 0
        payloads[key] = payload
        memory.bind(SymbolEntry(key=key, payload=payload, kind="data", brief="generated"))
    for key in keys:
        op = ProtocolOp(device_id="d", op_name="o", params={}, targets=(key,))
        grounded = resolve(op, memory)
        assert grounded.targets[0] == payloads[key]


def test_compression_on_bundled_device_payloads(registry):
    memory = bind_run_symbols(registry, "compression check", [])
    raw = payload_tokens(memory)
    digest = project(memory)
    assert raw > 10_000
    assert digest.token_count <= raw / 5


def test_brief_longer_than_eight_words_rejected():
    with pytest.raises(ValueError):
        SymbolEntry(key="k", payload={}, kind="data", brief="one two three four five six seven eight nine")


def test_null_payload_rejected():
    with pytest.raises(ValueError):
        SymbolEntry(key="k", payload=None, kind="data", brief="x")


def test_snapshot_export_shape():
    memory = _memory(_entry("plate_1"))
    snap = memory.snapshot()
    assert snap["revision"] == 1
    assert snap["entries"][0] == {
        "key": "plate_1",
        "kind": "labware",
        "brief": "a labware item",
        "payload": {"labware": "plate_1"},
    }
    json.dumps(snap)  # serializable


def test_count_tokens_exported_from_grounding():
    assert count_tokens("transfer(50, plate_1)") == 8
