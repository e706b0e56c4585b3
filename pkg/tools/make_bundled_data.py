#!/usr/bin/env python3
"""Regenerate the bundled desk-scale data under src/labgate/data/.

Authoring tool only; the generated JSON files are the artifacts shipped
with the package. Run from the repo root:

    PYTHONPATH=src python tools/make_bundled_data.py
"""

from __future__ import annotations

import json
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "src" / "labgate" / "data"

WELLS = [f"{row}{col}" for row in "ABCDEFGH" for col in range(1, 13)]

TRANSFER_GUARDS = [
    {"predicate": "target-exists", "message": "source and destination labware must be on deck"},
    {"predicate": "target-unsealed", "message": "cannot pipette through a seal; unseal the labware first"},
    {"predicate": "volume-available", "message": "source does not hold the requested volume"},
]


def num(name, unit, lo=None, hi=None, required=True):
    out = {"name": name, "kind": "numeric", "unit": unit}
    if lo is not None:
        out["min"] = lo
    if hi is not None:
        out["max"] = hi
    out["required"] = required
    return out


def ref(name, required=True):
    return {"name": name, "kind": "resource-reference", "unit": "", "required": required}


def enum(name, allowed, required=True):
    return {"name": name, "kind": "enumerated", "unit": "", "allowed": allowed, "required": required}


def well_param(name):
    return enum(name, WELLS, required=False)


def transfer_op(lo, hi):
    return {
        "name": "transfer",
        "params": [
            ref("source"),
            ref("dest"),
            num("volume", "uL", lo, hi),
            well_param("source_well"),
            well_param("dest_well"),
        ],
        "guards": TRANSFER_GUARDS,
    }


def mix_op(lo, hi):
    return {
        "name": "mix",
        "params": [ref("target"), num("volume", "uL", lo, hi), num("cycles", "", 1, 20)],
        "guards": [
            {"predicate": "target-exists", "message": "mix target must be on deck"},
            {"predicate": "target-unsealed", "message": "cannot mix through a seal"},
        ],
    }


def centrifuge_op(lo, hi, dlo, dhi, with_temp=False):
    params = [num("speed", "g", lo, hi), num("duration", "s", dlo, dhi)]
    if with_temp:
        params.append(num("temperature", "C", 4, 40, required=False))
    return {
        "name": "centrifuge",
        "params": params,
        "guards": [
            {"predicate": "target-exists", "message": "rotor load must reference labware on deck"},
            {"predicate": "device-idle", "message": "rotor is already spinning"},
        ],
    }


def build_registry():
    devices = [
        # --- liquid handling ---
        {"id": "pipettor_p20", "category": "LH", "operations": [transfer_op(1, 20), mix_op(1, 20)]},
        {"id": "pipettor_p300", "category": "LH", "operations": [transfer_op(20, 300), mix_op(20, 300)]},
        {"id": "pipettor_p1000", "category": "LH", "operations": [transfer_op(100, 1000), mix_op(100, 1000)]},
        {
            "id": "multichannel_96",
            "category": "LH",
            "operations": [
                transfer_op(5, 200),
                {
                    "name": "transfer_column",
                    "params": [
                        ref("source"),
                        ref("dest"),
                        num("volume", "uL", 5, 200),
                        enum("column", [str(c) for c in range(1, 13)]),
                    ],
                    "guards": TRANSFER_GUARDS,
                },
                {
                    "name": "wash_tips",
                    "params": [num("cycles", "", 1, 10)],
                    "guards": [],
                },
            ],
        },
        {
            "id": "bulk_dispenser_1",
            "category": "LH",
            "operations": [
                {
                    "name": "dispense",
                    "params": [ref("dest"), num("volume", "uL", 50, 5000), well_param("dest_well")],
                    "guards": TRANSFER_GUARDS[:2],
                }
            ],
        },
        {
            "id": "liquid_handler_deck",
            "category": "LH",
            "operations": [
                transfer_op(1, 1000),
                {
                    "name": "spot",
                    "params": [ref("dest"), num("volume", "uL", 0.1, 10), well_param("dest_well")],
                    "guards": TRANSFER_GUARDS[:2],
                },
                {"name": "wash_tips", "params": [num("cycles", "", 1, 5)], "guards": []},
            ],
        },
        # --- thermal control ---
        {
            "id": "thermocycler_1",
            "category": "TC",
            "operations": [
                {
                    "name": "thermocycle",
                    "params": [
                        num("temperature", "C", 4, 99),
                        num("duration", "s", 1, 14400),
                        num("cycles", "", 1, 99),
                    ],
                    "guards": [
                        {"predicate": "target-exists", "message": "block load must be on deck"},
                        {"predicate": "device-idle", "message": "a program is already running"},
                    ],
                },
                {
                    "name": "set_lid",
                    "params": [num("temperature", "C", 30, 110)],
                    "guards": [],
                },
            ],
        },
        {
            "id": "incubator_37",
            "category": "TC",
            "operations": [
                {
                    "name": "incubate",
                    "params": [
                        num("temperature", "C", 20, 80),
                        num("duration", "s", 1, 604800),
                        num("shaking_rpm", "rpm", 0, 1200, required=False),
                    ],
                    "guards": [{"predicate": "target-exists", "message": "incubation load must be on deck"}],
                }
            ],
        },
        {
            "id": "heat_block_1",
            "category": "TC",
            "operations": [
                {
                    "name": "heat",
                    "params": [num("temperature", "C", 25, 150), num("duration", "s", 1, 86400)],
                    "guards": [{"predicate": "target-exists", "message": "block load must be on deck"}],
                }
            ],
        },
        {
            "id": "chill_block_1",
            "category": "TC",
            "operations": [
                {
                    "name": "cool",
                    "params": [num("temperature", "C", -20, 25), num("duration", "s", 1, 86400)],
                    "guards": [{"predicate": "target-exists", "message": "block load must be on deck"}],
                }
            ],
        },
        {
            "id": "water_bath_1",
            "category": "TC",
            "operations": [
                {
                    "name": "incubate",
                    "params": [num("temperature", "C", 20, 100), num("duration", "s", 1, 86400)],
                    "guards": [{"predicate": "target-exists", "message": "bath load must be registered"}],
                }
            ],
        },
        {
            "id": "cryo_freezer_1",
            "category": "TC",
            "operations": [
                {
                    "name": "store",
                    "params": [num("temperature", "C", -196, -70), num("duration", "s", 60, 31536000)],
                    "guards": [{"predicate": "target-exists", "message": "stored labware must be registered"}],
                }
            ],
        },
        # --- centrifugation ---
        {
            "id": "centrifuge_1",
            "category": "CF",
            "operations": [centrifuge_op(100, 15000, 10, 3600, with_temp=True)],
        },
        {"id": "microfuge_1", "category": "CF", "operations": [centrifuge_op(500, 21000, 5, 1800)]},
        {"id": "plate_spinner_1", "category": "CF", "operations": [centrifuge_op(50, 4000, 5, 600)]},
        {
            "id": "ultracentrifuge_1",
            "category": "CF",
            "operations": [centrifuge_op(10000, 150000, 60, 43200, with_temp=True)],
        },
        # --- other bench instruments ---
        {
            "id": "plate_sealer_1",
            "category": "OTHER",
            "operations": [
                {
                    "name": "seal_plate",
                    "params": [enum("seal_type", ["foil", "clear_film", "breathable"])],
                    "guards": [{"predicate": "target-exists", "message": "plate to seal must be on deck"}],
                }
            ],
        },
        {
            "id": "seal_peeler_1",
            "category": "OTHER",
            "operations": [
                {
                    "name": "unseal_plate",
                    "params": [],
                    "guards": [{"predicate": "target-exists", "message": "plate to peel must be on deck"}],
                }
            ],
        },
        {
            "id": "plate_reader_1",
            "category": "OTHER",
            "operations": [
                {
                    "name": "read_absorbance",
                    "params": [num("wavelength", "nm", 200, 1000)],
                    "guards": [{"predicate": "target-exists", "message": "read target must be on deck"}],
                },
                {
                    "name": "read_fluorescence",
                    "params": [num("excitation", "nm", 200, 900), num("emission", "nm", 250, 900)],
                    "guards": [{"predicate": "target-exists", "message": "read target must be on deck"}],
                },
            ],
        },
        {
            "id": "orbital_shaker_1",
            "category": "OTHER",
            "operations": [
                {
                    "name": "shake",
                    "params": [num("speed", "rpm", 10, 3000), num("duration", "s", 1, 86400)],
                    "guards": [{"predicate": "target-exists", "message": "shaker load must be on deck"}],
                }
            ],
        },
        {
            "id": "mag_separator_1",
            "category": "OTHER",
            "operations": [
                {
                    "name": "separate",
                    "params": [num("duration", "s", 10, 3600)],
                    "guards": [{"predicate": "target-exists", "message": "separation target must be on deck"}],
                }
            ],
        },
        {
            "id": "vortexer_1",
            "category": "OTHER",
            "operations": [
                {
                    "name": "vortex",
                    "params": [num("speed", "rpm", 100, 3200), num("duration", "s", 1, 600)],
                    "guards": [{"predicate": "target-exists", "message": "vortex target must be secured"}],
                }
            ],
        },
    ]
    return {"version": "1.0", "devices": devices}


def build_knowledge():
    docs = [
        {
            "id": "kb_pcr",
            "title": "PCR amplification essentials",
            "tags": ["pcr", "thermocycling", "amplification"],
            "body": "Polymerase chain reaction cycles through denaturation near 95 C, primer "
            "annealing near 55-65 C, and extension at 72 C. Always run a no-template negative "
            "control alongside reactions, and keep master mix on ice until dispensed.",
        },
        {
            "id": "kb_centrifugation",
            "title": "Centrifugation speed limits",
            "tags": ["centrifuge", "rotor", "speed"],
            "body": "Relative centrifugal force must stay within the rotor rating. Benchtop "
            "plate rotors commonly cap at 15000 g; exceeding the rating risks rotor failure. "
            "Balance loads symmetrically before every spin.",
        },
        {
            "id": "kb_sealing",
            "title": "Plate sealing practice",
            "tags": ["seal", "plate", "evaporation"],
            "body": "Seal plates after all liquid handling is complete: a sealed plate cannot "
            "accept transfers. Foil seals suit storage and thermocycling; breathable seals suit "
            "growth. Peel seals before any further pipetting.",
        },
        {
            "id": "kb_lysis",
            "title": "Cell lysis and clarification",
            "tags": ["lysis", "buffer", "clarification"],
            "body": "Resuspend pellets in lysis buffer, incubate to complete lysis, then "
            "clarify by centrifugation and recover the supernatant without disturbing the "
            "pellet.",
        },
        {
            "id": "kb_dilution",
            "title": "Serial dilution technique",
            "tags": ["dilution", "series", "mixing"],
            "body": "A serial dilution transfers a fixed volume between wells pre-filled with "
            "diluent, mixing thoroughly at each step before the next transfer so the series "
            "stays accurate.",
        },
        {
            "id": "kb_beads",
            "title": "Magnetic bead cleanup",
            "tags": ["beads", "magnet", "purification"],
            "body": "Bind sample to beads, capture on the magnet until the suspension clears, "
            "wash while on the magnet, then elute off the magnet. Over-drying beads lowers "
            "yield.",
        },
    ]
    return {"docs": docs}


def build_fixtures():
    bench = {
        "labware": {
            "trough_1": {"type": "trough", "volume_ul": 10000.0},
            "trough_2": {"type": "trough", "volume_ul": 5000.0},
            "plate_1": {"type": "plate", "wells": {"A1": 0.0, "B1": 0.0}},
            "plate_2": {"type": "plate", "wells": {}},
            "tube_1": {"type": "trough", "volume_ul": 1500.0},
        },
        "devices": [d["id"] for d in build_registry()["devices"]],
    }
    long_bench = {
        "labware": {
            "trough_1": {"type": "trough", "volume_ul": 50000.0},
            "trough_2": {"type": "trough", "volume_ul": 50000.0},
            "trough_3": {"type": "trough", "volume_ul": 50000.0},
            "plate_1": {"type": "plate", "wells": {}},
            "plate_2": {"type": "plate", "wells": {}},
            "plate_3": {"type": "plate", "wells": {}},
        },
        "devices": [d["id"] for d in build_registry()["devices"]],
    }
    return {"bench_basic.json": bench, "bench_long.json": long_bench}


# --- task helpers ------------------------------------------------------------


def sym(key, kind, brief, **payload):
    return {"key": key, "kind": kind, "brief": brief, "payload": payload or {"labware": key}}


def op(device, name, params=None, targets=None):
    return {
        "device_id": device,
        "op_name": name,
        "params": {k: list(v) for k, v in (params or {}).items()},
        "targets": targets or [],
    }


def transfer(volume, dest_well, source="trough_1", dest="plate_1", device="pipettor_p300"):
    return op(
        device,
        "transfer",
        {
            "source": (source, ""),
            "dest": (dest, ""),
            "volume": (volume, "uL"),
            "dest_well": (dest_well, ""),
        },
    )


def code(ops):
    return {"schema_version": "1", "ops": ops}


def script(steps):
    return {"steps": steps}


def retrieve(query):
    return {"kind": "RetrieveKnowledge", "payload": query}


def emit_draft(draft):
    return {"kind": "EmitDraft", "payload": draft}


def emit_code(payload, expect_feedback=False):
    out = {"kind": "EmitCode", "payload": payload}
    if expect_feedback:
        out["expect_feedback"] = True
    return out


BENCH_SYMBOLS = [
    sym("trough_1", "labware", "buffer trough"),
    sym("trough_2", "labware", "water trough"),
    sym("plate_1", "labware", "96 well assay plate"),
    sym("plate_2", "labware", "96 well backup plate"),
    sym("tube_1", "labware", "sample tube"),
    sym("master_mix", "reagent", "PCR master mix aliquot", reagent="master_mix", location="trough_2"),
    sym("lysate_1", "reagent", "cleared cell lysate", reagent="lysate_1", location="tube_1"),
]


def build_tasks():
    tasks = {}

    # ---- Subset A: protocol drafting ----
    pcr_draft = {
        "title": "PCR amplification with controls",
        "steps": [
            {"title": "Prepare reactions", "rationale": "Dispense master mix and template into plate_1 wells on ice."},
            {"title": "Include a negative control", "rationale": "A no template control well detects contamination."},
            {"title": "Program thermocycling", "rationale": "Initial denaturation 95 C, then 30 cycles of denaturation, annealing at 58 C, and extension at 72 C."},
            {"title": "Hold and store", "rationale": "Cool the block and hold at 4 C until retrieval."},
        ],
    }
    tasks["a1_pcr_draft"] = {
        "task": {
            "id": "a1_pcr_draft",
            "subset": "A",
            "intent": "Draft a PCR amplification protocol for 50 uL reactions with appropriate controls.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_pcr"],
            "rubric": {
                "keyword_groups": [
                    ["denaturation", "denature"],
                    ["annealing", "anneal"],
                    ["extension", "elongation"],
                    ["negative control", "no template control"],
                ],
                "required_steps": ["thermocycling", "negative control"],
                "forbidden_orders": [],
            },
            "ground_truth": {
                "draft_reference": "Prepare PCR reactions with master mix and template, include a no "
                "template negative control, run thermocycling with denaturation annealing and "
                "extension steps, then hold at 4 C.",
                "code_ops": code(
                    [
                        transfer(45, "A1", source="trough_2"),
                        transfer(45, "B1", source="trough_2"),
                        op(
                            "thermocycler_1",
                            "thermocycle",
                            {"temperature": (95, "C"), "duration": (5400, "s"), "cycles": (30, "")},
                            targets=["plate_1"],
                        ),
                    ]
                ),
            },
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [
                retrieve("PCR thermocycling negative control"),
                emit_draft(pcr_draft),
                emit_code(
                    code(
                        [
                            transfer(45, "A1", source="trough_2"),
                            transfer(45, "B1", source="trough_2"),
                            op(
                                "thermocycler_1",
                                "thermocycle",
                                {"temperature": (95, "C"), "duration": (5400, "s"), "cycles": (30, "")},
                                targets=["plate_1"],
                            ),
                        ]
                    )
                ),
            ]
        ),
    }

    lysis_draft = {
        "title": "Cell lysis and clarification",
        "steps": [
            {"title": "Resuspend pellet in lysis buffer", "rationale": "Complete resuspension ensures uniform lysis."},
            {"title": "Incubate the suspension", "rationale": "Hold at 37 C so lysis runs to completion."},
            {"title": "Clarify by centrifugation", "rationale": "A hard spin pellets debris below the rotor limit."},
            {"title": "Recover supernatant", "rationale": "Transfer cleared lysate without disturbing the pellet."},
        ],
    }
    tasks["a2_lysis_draft"] = {
        "task": {
            "id": "a2_lysis_draft",
            "subset": "A",
            "intent": "Draft a bacterial cell lysis and clarification protocol.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_lysis", "kb_centrifugation"],
            "rubric": {
                "keyword_groups": [
                    ["lysis buffer"],
                    ["incubate", "incubation"],
                    ["centrifugation", "centrifuge", "spin"],
                    ["supernatant"],
                ],
                "required_steps": ["lysis buffer", "centrifugation"],
                "forbidden_orders": [],
            },
            "ground_truth": {
                "draft_reference": "Resuspend cells in lysis buffer, incubate until lysis completes, "
                "clarify by centrifugation within the rotor limit, and recover the supernatant.",
                "code_ops": code(
                    [
                        transfer(200, "A1", source="trough_1"),
                        op(
                            "incubator_37",
                            "incubate",
                            {"temperature": (37, "C"), "duration": (600, "s")},
                            targets=["plate_1"],
                        ),
                        op(
                            "centrifuge_1",
                            "centrifuge",
                            {"speed": (12000, "g"), "duration": (300, "s")},
                            targets=["plate_1"],
                        ),
                    ]
                ),
            },
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [
                retrieve("cell lysis clarification spin"),
                emit_draft(lysis_draft),
                emit_code(
                    code(
                        [
                            transfer(200, "A1", source="trough_1"),
                            op(
                                "incubator_37",
                                "incubate",
                                {"temperature": (37, "C"), "duration": (600, "s")},
                                targets=["plate_1"],
                            ),
                            op(
                                "centrifuge_1",
                                "centrifuge",
                                {"speed": (12000, "g"), "duration": (300, "s")},
                                targets=["plate_1"],
                            ),
                        ]
                    )
                ),
            ]
        ),
    }

    dilution_draft = {
        "title": "Twofold serial dilution across a row",
        "steps": [
            {"title": "Fill wells with diluent", "rationale": "Pre-fill the dilution series wells with equal diluent volume."},
            {"title": "Perform the serial dilution", "rationale": "Transfer a fixed volume well to well down the series."},
            {"title": "Mix at every step", "rationale": "Thorough mixing keeps each dilution factor accurate."},
        ],
    }
    tasks["a3_dilution_draft"] = {
        "task": {
            "id": "a3_dilution_draft",
            "subset": "A",
            "intent": "Draft a serial dilution protocol across one plate row.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_dilution"],
            "rubric": {
                "keyword_groups": [
                    ["serial dilution"],
                    ["diluent"],
                    ["mix", "mixing"],
                ],
                "required_steps": ["serial dilution", "mix"],
                "forbidden_orders": [],
            },
            "ground_truth": {
                "draft_reference": "Pre-fill wells with diluent, then serially transfer a fixed "
                "volume down the row, mixing thoroughly at each step of the serial dilution.",
                "code_ops": code(
                    [
                        transfer(100, "A1", source="trough_2"),
                        transfer(100, "A2", source="trough_2"),
                        op(
                            "pipettor_p300",
                            "mix",
                            {"target": ("plate_1", ""), "volume": (50, "uL"), "cycles": (5, "")},
                        ),
                    ]
                ),
            },
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [
                retrieve("serial dilution mixing"),
                emit_draft(dilution_draft),
                emit_code(
                    code(
                        [
                            transfer(100, "A1", source="trough_2"),
                            transfer(100, "A2", source="trough_2"),
                            op(
                                "pipettor_p300",
                                "mix",
                                {"target": ("plate_1", ""), "volume": (50, "uL"), "cycles": (5, "")},
                            ),
                        ]
                    )
                ),
            ]
        ),
    }

    # ---- Subset B: code generation ----
    def bench_draft(title, lines):
        return {
            "title": title,
            "steps": [{"title": t, "rationale": r} for t, r in lines],
        }

    b1_draft = bench_draft(
        "Fill and seal",
        [
            ("Transfer buffer into wells", "Move 50 uL per well from the trough."),
            ("Seal the plate", "Apply a foil seal once transfers finish."),
        ],
    )
    b2_draft = bench_draft(
        "Reaction setup and cycling",
        [
            ("Dispense master mix", "Each reaction receives master mix from the trough."),
            ("Run thermocycling", "Standard cycling program on the block."),
        ],
    )
    b3_draft = bench_draft(
        "Bead capture",
        [
            ("Bind sample to beads", "Load the bead suspension into the plate."),
            ("Capture on the magnetic rack", "Hold until the suspension clears."),
            ("Settle with a spin", "Gentle centrifugation collects droplets."),
        ],
    )

    b1_ops = [
        transfer(50, "A1"),
        transfer(50, "B1"),
        op("plate_sealer_1", "seal_plate", {"seal_type": ("foil", "")}, targets=["plate_1"]),
    ]
    tasks["b1_transfer_seal"] = {
        "task": {
            "id": "b1_transfer_seal",
            "subset": "B",
            "intent": "Fill two wells with 50 uL of buffer and seal the plate.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_sealing"],
            "rubric": {
                "keyword_groups": [["transfer"], ["seal"]],
                "required_steps": [],
                "forbidden_orders": [],
                "code_order_rules": [["transfer", "seal_plate"]],
            },
            "ground_truth": {
                "draft_reference": "Transfer buffer into the wells and seal the plate afterwards.",
                "code_ops": code(b1_ops),
            },
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [retrieve("fill and seal"), emit_draft(b1_draft), emit_code(code(b1_ops))]
        ),
    }

    b2_gt = [
        transfer(45, "A1", source="trough_2"),
        transfer(45, "B1", source="trough_2"),
        transfer(5, "A1", source="tube_1", device="pipettor_p20"),
        op(
            "thermocycler_1",
            "thermocycle",
            {"temperature": (95, "C"), "duration": (5400, "s"), "cycles": (30, "")},
            targets=["plate_1"],
        ),
    ]
    b2_pred = [b2_gt[0], b2_gt[1], b2_gt[3]]  # planner omits the template spike
    tasks["b2_pcr_setup"] = {
        "task": {
            "id": "b2_pcr_setup",
            "subset": "B",
            "intent": "Set up two PCR reactions and run the cycling program.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_pcr"],
            "rubric": {
                "keyword_groups": [["master mix", "reaction"], ["thermocycling", "cycling"]],
                "required_steps": [],
                "forbidden_orders": [],
            },
            "ground_truth": {
                "draft_reference": "Dispense master mix, spike template, and run the cycling program.",
                "code_ops": code(b2_gt),
            },
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [retrieve("pcr setup"), emit_draft(b2_draft), emit_code(code(b2_pred))]
        ),
    }

    b3_gt = [
        transfer(100, "A1"),
        op("mag_separator_1", "separate", {"duration": (120, "s")}, targets=["plate_1"]),
        op(
            "centrifuge_1",
            "centrifuge",
            {"speed": (2500, "g"), "duration": (60, "s")},
            targets=["plate_1"],
        ),
    ]
    b3_pred = [
        b3_gt[0],
        b3_gt[1],
        op(
            "centrifuge_1",
            "centrifuge",
            {"speed": (2000, "g"), "duration": (60, "s")},  # slower spin than reference
            targets=["plate_1"],
        ),
    ]
    tasks["b3_bead_cleanup"] = {
        "task": {
            "id": "b3_bead_cleanup",
            "subset": "B",
            "intent": "Capture beads on the magnet and follow with a settling spin.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_beads"],
            "rubric": {
                "keyword_groups": [["bead", "beads"], ["magnet", "magnetic"]],
                "required_steps": [],
                "forbidden_orders": [],
            },
            "ground_truth": {
                "draft_reference": "Bind the beads, separate on the magnet, then settle with a spin.",
                "code_ops": code(b3_gt),
            },
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [retrieve("bead cleanup"), emit_draft(b3_draft), emit_code(code(b3_pred))]
        ),
    }

    # ---- Subset C: long horizon ----
    def block(i, plate):
        wells = WELLS[(3 * i) % 96], WELLS[(3 * i + 1) % 96], WELLS[(3 * i + 2) % 96]
        return [
            transfer(120 + i, wells[0], source="trough_1", dest=plate),
            transfer(80 + i, wells[1], source="trough_2", dest=plate),
            transfer(60 + i, wells[2], source="trough_3", dest=plate),
            op(
                "incubator_37",
                "incubate",
                {"temperature": (37, "C"), "duration": (300 + 10 * i, "s")},
                targets=[plate],
            ),
            op(
                "plate_spinner_1",
                "centrifuge",
                {"speed": (1000 + 50 * i, "g"), "duration": (60, "s")},
                targets=[plate],
            ),
        ]

    c1_ops = []
    for i in range(12):
        c1_ops.extend(block(i, f"plate_{(i % 3) + 1}"))
    assert len(c1_ops) == 60

    long_symbols = [
        sym("trough_1", "labware", "media trough"),
        sym("trough_2", "labware", "buffer trough"),
        sym("trough_3", "labware", "standards trough"),
        sym("plate_1", "labware", "prep plate one"),
        sym("plate_2", "labware", "prep plate two"),
        sym("plate_3", "labware", "prep plate three"),
    ]
    tasks["c1_metabolomics_prep"] = {
        "task": {
            "id": "c1_metabolomics_prep",
            "subset": "C",
            "intent": "Execute the 60-step metabolomics sample preparation chain across three plates.",
            "context": {"symbols": long_symbols},
            "knowledge_refs": ["kb_dilution", "kb_centrifugation"],
            "rubric": {
                "keyword_groups": [["sample preparation", "preparation"], ["plate", "plates"]],
                "required_steps": [],
                "forbidden_orders": [],
            },
            "ground_truth": {
                "draft_reference": "Stage media buffer and standards, then run the preparation "
                "blocks across three plates with incubation and settling spins.",
                "code_ops": code(c1_ops),
            },
            "fixture": "../fixtures/bench_long.json",
        },
        "script": script(
            [
                retrieve("metabolomics preparation chain"),
                emit_draft(
                    {
                        "title": "Sample preparation across plates",
                        "steps": [
                            {"title": "Stage plates", "rationale": "All three prep plates on deck."},
                            {"title": "Run preparation blocks", "rationale": "Each block fills, incubates, and spins one plate."},
                        ],
                    }
                ),
                emit_code(code(c1_ops)),
            ]
        ),
    }

    c2_ops = [transfer(50, WELLS[i], source="trough_1", dest="plate_1") for i in range(24)]
    c2_ops.append(op("plate_sealer_1", "seal_plate", {"seal_type": ("foil", "")}, targets=["plate_1"]))
    tasks["c2_plate_fill"] = {
        "task": {
            "id": "c2_plate_fill",
            "subset": "C",
            "intent": "Fill the first 24 wells with media and seal the plate.",
            "context": {"symbols": long_symbols},
            "knowledge_refs": ["kb_sealing"],
            "rubric": {
                "keyword_groups": [["fill", "transfer"], ["seal"]],
                "required_steps": [],
                "forbidden_orders": [],
                "code_order_rules": [["transfer", "seal_plate"]],
            },
            "ground_truth": {
                "draft_reference": "Fill the wells with media and seal the plate once filling is done.",
                "code_ops": code(c2_ops),
            },
            "fixture": "../fixtures/bench_long.json",
        },
        "script": script(
            [
                retrieve("plate filling"),
                emit_draft(bench_draft(
                    "Fill and seal for storage",
                    [
                        ("Transfer media into the wells", "Fill the first 24 wells from the trough."),
                        ("Seal the plate", "Foil seal after the fill completes."),
                    ],
                )),
                emit_code(code(c2_ops)),
            ]
        ),
    }

    c3_ops = []
    for i in range(12):
        c3_ops.append(transfer(45, WELLS[i], source="trough_2", dest="plate_2"))
        c3_ops.append(transfer(5, WELLS[i], source="trough_3", dest="plate_2", device="pipettor_p20"))
    c3_ops.append(
        op(
            "thermocycler_1",
            "thermocycle",
            {"temperature": (95, "C"), "duration": (7200, "s"), "cycles": (35, "")},
            targets=["plate_2"],
        )
    )
    c3_ops.append(op("plate_sealer_1", "seal_plate", {"seal_type": ("foil", "")}, targets=["plate_2"]))
    # Seal goes on before cycling in the reference protocol; keep the emitted
    # order identical so the long plan stays a pure scaling test.
    c3_ops[-1], c3_ops[-2] = c3_ops[-2], c3_ops[-1]
    tasks["c3_pcr_plate"] = {
        "task": {
            "id": "c3_pcr_plate",
            "subset": "C",
            "intent": "Assemble 12 PCR reactions, seal, and run the cycling program.",
            "context": {"symbols": long_symbols},
            "knowledge_refs": ["kb_pcr", "kb_sealing"],
            "rubric": {
                "keyword_groups": [["reaction", "reactions"], ["seal"], ["cycling", "thermocycling"]],
                "required_steps": [],
                "forbidden_orders": [],
                "code_order_rules": [["transfer", "seal_plate"]],
            },
            "ground_truth": {
                "draft_reference": "Assemble reactions across the plate, seal it, and run cycling.",
                "code_ops": code(c3_ops),
            },
            "fixture": "../fixtures/bench_long.json",
        },
        "script": script(
            [
                retrieve("pcr plate assembly"),
                emit_draft(bench_draft(
                    "Plate reactions, seal, and cycle",
                    [
                        ("Assemble the reactions", "Master mix plus template across twelve wells."),
                        ("Seal the plate", "Foil seal before thermal steps."),
                        ("Run thermocycling", "Cycling program after sealing."),
                    ],
                )),
                emit_code(code(c3_ops)),
            ]
        ),
    }

    # ---- Subset D: error correction (the published correction scenarios) ----
    d_draft = {
        "title": "Pellet and hold",
        "steps": [
            {"title": "Load the plate", "rationale": "Transfer lysate into the spin plate."},
            {"title": "Seal before the spin", "rationale": "A foil seal prevents aerosol loss in the rotor."},
            {"title": "Centrifuge within the rotor limit", "rationale": "Spin hard but inside the rotor rating."},
        ],
    }

    d1_clean = [
        transfer(150, "A1", source="tube_1", dest="plate_1"),
        op("plate_sealer_1", "seal_plate", {"seal_type": ("foil", "")}, targets=["plate_1"]),
        op(
            "centrifuge_1",
            "centrifuge",
            {"speed": (15000, "g"), "duration": (300, "s")},
            targets=["plate_1"],
        ),
    ]
    tasks["d1_overrange"] = {
        "task": {
            "id": "d1_overrange",
            "subset": "D",
            "intent": "Pellet debris with a hard spin, staying inside the rotor rating.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_centrifugation"],
            "rubric": {
                "keyword_groups": [["centrifuge", "spin"], ["rotor limit", "rotor rating"]],
                "required_steps": [],
                "forbidden_orders": [],
                "code_order_rules": [["transfer", "seal_plate"]],
            },
            "ground_truth": {
                "draft_reference": "Load the plate, seal it, and centrifuge at the rotor maximum.",
                "code_ops": code(d1_clean),
            },
            "faults": [
                {"step": 2, "type": "param_overrange", "param": "speed", "value": 25000, "unit": "g"}
            ],
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [
                retrieve("rotor speed limit"),
                emit_draft(d_draft),
                emit_code(code(d1_clean)),
                emit_code(code(d1_clean), expect_feedback=True),
            ]
        ),
    }

    d2_clean = [
        transfer(60, "A1", source="trough_1", dest="plate_1"),
        transfer(60, "B1", source="trough_1", dest="plate_1"),
        op("plate_sealer_1", "seal_plate", {"seal_type": ("foil", "")}, targets=["plate_1"]),
    ]
    tasks["d2_grounding"] = {
        "task": {
            "id": "d2_grounding",
            "subset": "D",
            "intent": "Aliquot wash buffer into the assay plate and seal it.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_sealing"],
            "rubric": {
                "keyword_groups": [["buffer"], ["seal"]],
                "required_steps": [],
                "forbidden_orders": [],
                "code_order_rules": [["transfer", "seal_plate"]],
            },
            "ground_truth": {
                "draft_reference": "Aliquot buffer into the plate wells and seal the plate.",
                "code_ops": code(d2_clean),
            },
            "faults": [
                {"step": 2, "type": "unknown_symbol", "symbol": "plate_1", "replacement": "new_plate"}
            ],
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [
                retrieve("aliquot and seal"),
                emit_draft(
                    bench_draft(
                        "Buffer aliquots",
                        [
                            ("Aliquot wash buffer", "Dispense buffer into the assay wells."),
                            ("Seal the plate", "Seal once aliquoting is complete."),
                        ],
                    )
                ),
                emit_code(code(d2_clean)),
                emit_code(code(d2_clean), expect_feedback=True),
            ]
        ),
    }

    d3_clean = [
        transfer(80, "A1", source="trough_2", dest="plate_2"),
        op("plate_sealer_1", "seal_plate", {"seal_type": ("clear_film", "")}, targets=["plate_2"]),
    ]
    tasks["d3_seal_order"] = {
        "task": {
            "id": "d3_seal_order",
            "subset": "D",
            "intent": "Fill the storage plate and seal it for the freezer.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_sealing"],
            "rubric": {
                "keyword_groups": [["seal"], ["transfer", "fill"]],
                "required_steps": [],
                "forbidden_orders": [["seal the plate", "fill the wells"]],
                "code_order_rules": [["transfer", "seal_plate"]],
            },
            "ground_truth": {
                "draft_reference": "Fill the wells first and seal the plate afterwards for storage.",
                "code_ops": code(d3_clean),
            },
            "faults": [{"step": 2, "type": "order_swap", "swap": [0, 1]}],
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [
                retrieve("sealing order"),
                emit_draft(
                    {
                        "title": "Fill then seal",
                        "steps": [
                            {"title": "Fill the wells", "rationale": "Dispense buffer into the storage wells."},
                            {"title": "Seal the plate", "rationale": "Seal only after all liquid handling is done."},
                        ],
                    }
                ),
                emit_code(code(d3_clean)),
                emit_code(code(d3_clean), expect_feedback=True),
            ]
        ),
    }

    # ---- clarify demo (service/console flows; not part of the eval suite) ----
    tasks["demo_clarify"] = {
        "task": {
            "id": "demo_clarify",
            "subset": "A",
            "intent": "Wash the plate with the appropriate buffer.",
            "context": {"symbols": BENCH_SYMBOLS},
            "knowledge_refs": ["kb_beads"],
            "rubric": {
                "keyword_groups": [["wash"]],
                "required_steps": [],
                "forbidden_orders": [],
            },
            "ground_truth": {
                "draft_reference": "Wash the plate with the confirmed buffer.",
                "code_ops": code([transfer(100, "A1", source="trough_1", dest="plate_1")]),
            },
            "fixture": "../fixtures/bench_basic.json",
        },
        "script": script(
            [
                retrieve("wash buffer choice"),
                {"kind": "Clarify", "payload": "Which trough holds the wash buffer?"},
                emit_draft(
                    {
                        "title": "Plate wash",
                        "steps": [
                            {"title": "Wash the wells", "rationale": "Use the buffer confirmed by the operator."}
                        ],
                    }
                ),
                emit_code(code([transfer(100, "A1", source="trough_1", dest="plate_1")])),
            ]
        ),
    }

    return tasks


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "fixtures").mkdir(exist_ok=True)
    (DATA / "tasks").mkdir(exist_ok=True)
    (DATA / "scripts").mkdir(exist_ok=True)

    registry = build_registry()
    (DATA / "registry.json").write_text(json.dumps(registry, indent=2) + "\n")
    (DATA / "knowledge.json").write_text(json.dumps(build_knowledge(), indent=2) + "\n")
    for name, fixture in build_fixtures().items():
        (DATA / "fixtures" / name).write_text(json.dumps(fixture, indent=2) + "\n")

    tasks = build_tasks()
    suite_tasks = []
    suite_scripts = {}
    for task_id, bundle in tasks.items():
        (DATA / "tasks" / f"{task_id}.json").write_text(json.dumps(bundle["task"], indent=2) + "\n")
        (DATA / "scripts" / f"{task_id}.json").write_text(
            json.dumps(bundle["script"], indent=2) + "\n"
        )
        if task_id != "demo_clarify":
            suite_tasks.append(f"tasks/{task_id}.json")
            suite_scripts[task_id] = f"scripts/{task_id}.json"

    suite = {
        "name": "desk-suite",
        "registry": "registry.json",
        "knowledge": "knowledge.json",
        "tasks": suite_tasks,
        "scripts": suite_scripts,
    }
    (DATA / "suite.json").write_text(json.dumps(suite, indent=2) + "\n")
    print(f"wrote bundled data to {DATA}")


if __name__ == "__main__":
    main()
