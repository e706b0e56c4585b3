"""Task and suite formats for the benchmark subsets A-D.

A task bundles the user intent, the grounded environment description, the
scientific rubric, ground truth for scoring, fault injections (subset D),
and a world fixture reference. A suite is a directory with a suite.json
manifest naming the registry, the knowledge store, the task files, and a
planner script per task.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import LabgateError
from .grounding import SymbolEntry
from .memory import KnowledgeStore
from .planners import FaultSpec, PlannerScript
from .registry import HardwareRegistry, load_registry
from .verify import ProtocolCode, Rubric, parse_code

SUBSETS = ("A", "B", "C", "D")


class TaskLoadError(LabgateError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    draft_reference: str = ""
    code_ops: ProtocolCode | None = None


@dataclass(frozen=True)
class TaskSpec:
    id: str
    subset: str
    intent: str
    context_symbols: tuple[SymbolEntry, ...] = ()
    knowledge_refs: tuple[str, ...] = ()
    rubric: Rubric = field(default_factory=Rubric)
    code_order_rules: tuple[tuple[str, str], ...] = ()
    ground_truth: GroundTruth = field(default_factory=GroundTruth)
    faults: tuple[FaultSpec, ...] = ()
    fixture: str = ""

    def validate(self) -> None:
        if self.subset not in SUBSETS:
            raise TaskLoadError(f"task {self.id!r}: unknown subset {self.subset!r}")
        if self.subset == "D" and not self.faults:
            raise TaskLoadError(f"task {self.id!r}: subset D requires injected faults")
        if self.subset in ("B", "C", "D") and self.ground_truth.code_ops is None:
            raise TaskLoadError(f"task {self.id!r}: subset {self.subset} requires code ground truth")


def load_task(path: str | Path) -> TaskSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TaskLoadError(f"cannot load task {path}: {exc}") from exc
    try:
        task = task_from_json(data)
    except (KeyError, ValueError, LabgateError) as exc:
        raise TaskLoadError(f"malformed task {path}: {exc}") from exc
    task.validate()
    return task


def task_from_json(data: dict[str, Any]) -> TaskSpec:
    symbols = tuple(
        SymbolEntry(
            key=str(raw["key"]),
            payload=raw["payload"],
            kind=str(raw.get("kind", "data")),
            brief=str(raw.get("brief", "")),
        )
        for raw in (data.get("context") or {}).get("symbols", [])
    )
    gt_raw = data.get("ground_truth") or {}
    code_ops = None
    if gt_raw.get("code_ops") is not None:
        code_ops = parse_code(gt_raw["code_ops"])
    rubric_raw = data.get("rubric") or {}
    return TaskSpec(
        id=str(data["id"]),
        subset=str(data.get("subset", "A")),
        intent=str(data.get("intent", "")),
        context_symbols=symbols,
        knowledge_refs=tuple(data.get("knowledge_refs", [])),
        rubric=Rubric.from_json(rubric_raw),
        code_order_rules=tuple((a, b) for a, b in rubric_raw.get("code_order_rules", [])),
        ground_truth=GroundTruth(
            draft_reference=str(gt_raw.get("draft_reference", "")), code_ops=code_ops
        ),
        faults=tuple(FaultSpec.from_json(raw) for raw in data.get("faults", [])),
        fixture=str(data.get("fixture", "")),
    )


def resolve_fixture(task: TaskSpec, task_path: Path) -> dict[str, Any]:
    """Fixture refs are resolved relative to the task file's directory."""
    if not task.fixture:
        return {"labware": {}, "devices": []}
    fixture_path = (task_path.parent / task.fixture).resolve()
    try:
        return json.loads(fixture_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TaskLoadError(f"cannot load fixture {fixture_path}: {exc}") from exc


@dataclass(frozen=True)
class LoadedTask:
    task: TaskSpec
    path: Path
    fixture: dict[str, Any]
    script: PlannerScript | None = None


@dataclass
class Suite:
    name: str
    root: Path
    registry: HardwareRegistry
    knowledge: KnowledgeStore
    tasks: list[LoadedTask]

    def task_ids(self) -> list[str]:
        return [lt.task.id for lt in self.tasks]


def load_suite(root: str | Path, scripts_dir: str | Path | None = None) -> Suite:
    """Load a suite directory via its suite.json manifest.

    scripts_dir optionally overrides where per-task scripts are read from
    (same file names), which is how degenerate-planner variants run.
    """
    root = Path(root)
    manifest_path = root / "suite.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TaskLoadError(f"cannot load suite manifest {manifest_path}: {exc}") from exc

    registry_path = root / manifest.get("registry", "registry.json")
    try:
        registry = load_registry(registry_path.read_text())
    except OSError as exc:
        raise TaskLoadError(f"cannot load registry {registry_path}: {exc}") from exc

    knowledge_path = manifest.get("knowledge")
    knowledge = KnowledgeStore()
    if knowledge_path:
        try:
            knowledge = KnowledgeStore.load((root / knowledge_path).read_text())
        except OSError as exc:
            raise TaskLoadError(f"cannot load knowledge {knowledge_path}: {exc}") from exc

    scripts = manifest.get("scripts", {})
    tasks: list[LoadedTask] = []
    for rel in manifest.get("tasks", []):
        task_path = root / rel
        task = load_task(task_path)
        fixture = resolve_fixture(task, task_path)
        script = None
        script_rel = scripts.get(task.id)
        if script_rel:
            if scripts_dir is not None:
                script_path = Path(scripts_dir) / Path(script_rel).name
            else:
                script_path = root / script_rel
            try:
                script = PlannerScript.from_json(script_path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise TaskLoadError(f"cannot load script {script_path}: {exc}") from exc
        tasks.append(LoadedTask(task=task, path=task_path, fixture=fixture, script=script))
    return Suite(
        name=str(manifest.get("name", root.name)),
        root=root,
        registry=registry,
        knowledge=knowledge,
        tasks=tasks,
    )


def bundled_suite_path() -> Path:
    """The packaged desk-scale suite."""
    return Path(__file__).parent / "data"
