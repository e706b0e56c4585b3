"""Command-line entry point.

Exit codes: 0 on success, 1 when task failures are present, 2 on
configuration errors (bad files, bad flags).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .engine import StepOutcome
from .errors import LabgateError
from .fsm import default_matrix, passthrough_matrix
from .harness import build_engine, render_table, run_benchmark, task_planner
from .memory import KnowledgeStore
from .metrics import detect_loop
from .planners import PlannerScript, RemotePlanner, RemotePlannerConfig
from .registry import load_registry, validate_registry
from .tasks import LoadedTask, Suite, bundled_suite_path, load_suite, load_task, resolve_fixture


@click.group()
def main() -> None:
    """Safety-interlocked protocol execution engine."""


def _fail_config(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _single_task_suite(task_path: Path, registry_path: Path | None, knowledge_path: Path | None) -> tuple[Suite, LoadedTask]:
    bundled = bundled_suite_path()
    registry_file = registry_path or bundled / "registry.json"
    knowledge_file = knowledge_path or bundled / "knowledge.json"
    try:
        registry = load_registry(registry_file.read_text())
        knowledge = KnowledgeStore.load(knowledge_file.read_text())
        task = load_task(task_path)
        fixture = resolve_fixture(task, task_path)
    except (OSError, LabgateError) as exc:
        _fail_config(str(exc))
        raise AssertionError  # unreachable
    suite = Suite(name="adhoc", root=task_path.parent, registry=registry, knowledge=knowledge, tasks=[])
    return suite, LoadedTask(task=task, path=task_path, fixture=fixture)


@main.command()
@click.argument("task_file", type=click.Path(exists=True, path_type=Path))
@click.option("--planner", "planner_kind", type=click.Choice(["scripted", "remote"]), default="scripted")
@click.option("--script", "script_file", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--registry", "registry_file", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--knowledge", "knowledge_file", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--endpoint", default="", help="Remote planner endpoint URL.")
@click.option("--model", default="default", help="Remote planner model name.")
@click.option("--trace-out", type=click.Path(path_type=Path), default=None)
@click.option("--interactive-clarify", is_flag=True, default=False)
@click.option("--no-fsm", is_flag=True, default=False, help="Pass-through ablation matrix.")
def run(
    task_file: Path,
    planner_kind: str,
    script_file: Path | None,
    registry_file: Path | None,
    knowledge_file: Path | None,
    endpoint: str,
    model: str,
    trace_out: Path | None,
    interactive_clarify: bool,
    no_fsm: bool,
) -> None:
    """Execute one task and print the outcome."""
    suite, loaded = _single_task_suite(task_file, registry_file, knowledge_file)

    if planner_kind == "remote":
        if not endpoint:
            _fail_config("remote planner requires --endpoint")
        planner = RemotePlanner(RemotePlannerConfig(endpoint=endpoint, model=model))
    else:
        if script_file is None:
            _fail_config("scripted planner requires --script")
        try:
            loaded = LoadedTask(
                task=loaded.task,
                path=loaded.path,
                fixture=loaded.fixture,
                script=PlannerScript.from_json(script_file.read_text()),
            )
            planner = task_planner(loaded)
        except (OSError, LabgateError, ValueError) as exc:
            _fail_config(str(exc))

    matrix = passthrough_matrix() if no_fsm else default_matrix()
    engine = build_engine(loaded, suite, planner, matrix=matrix)

    while not engine.terminal:
        outcome = engine.run_until_block()
        if outcome is StepOutcome.AWAITING_CLARIFY:
            clar = engine.pending_clarification()
            if clar is None:
                continue
            if interactive_clarify:
                click.echo(f"clarification requested: {clar.question}")
                answer = click.prompt("answer")
                engine.answer_clarification(clar.clar_id, answer)
            else:
                click.echo("clarification requested but no operator channel; halting", err=True)
                engine.request_halt()

    result = engine.result()
    if trace_out is not None:
        trace_out.write_text(engine.trace_lines())
    click.echo(f"outcome: {result.outcome} (state {result.final_state}, {result.steps} steps)")
    click.echo(f"executed ops: {len(result.protocol)}")
    click.echo(f"tokens: in={result.tokens_in} out={result.tokens_out}")
    sys.exit(0 if result.outcome == "success" else 1)


@main.command("eval")
@click.argument("suite_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
@click.option("--scripts", "scripts_dir", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--no-rectify", is_flag=True, default=False, help="Degenerate planners that never correct.")
@click.option("--no-fsm", is_flag=True, default=False, help="Pass-through ablation matrix.")
def eval_cmd(
    suite_dir: Path,
    out_file: Path | None,
    scripts_dir: Path | None,
    no_rectify: bool,
    no_fsm: bool,
) -> None:
    """Run a benchmark suite and write the metrics report."""
    try:
        suite = load_suite(suite_dir, scripts_dir=scripts_dir)
    except LabgateError as exc:
        _fail_config(str(exc))
    matrix = passthrough_matrix() if no_fsm else None
    report = run_benchmark(suite, rectify=not no_rectify, matrix=matrix, out_path=out_file)
    click.echo(render_table(report))
    if out_file is not None:
        click.echo(f"report written to {out_file}")
    failures = [row for row in report["tasks"] if not row["metrics"]["success"]]
    sys.exit(1 if failures else 0)


@main.command()
@click.argument("trace_file", type=click.Path(exists=True, path_type=Path))
@click.option("--loop-threshold", type=int, default=3)
def replay(trace_file: Path, loop_threshold: int) -> None:
    """Summarize a recorded trace: states, interlocks, loop verdict."""
    events = []
    try:
        for line in trace_file.read_text().splitlines():
            if line.strip():
                events.append(json.loads(line))
    except json.JSONDecodeError as exc:
        _fail_config(f"malformed trace line: {exc}")
    states = [e["state"] for e in events]
    interlocks = sum(1 for e in events if e.get("signal", {}).get("interlock"))
    executed = sum(1 for e in events if e.get("executed"))
    click.echo(f"{len(events)} events: {' -> '.join(states)}")
    click.echo(f"interlock steps: {interlocks}; steps with execution: {executed}")
    click.echo(f"loop detected: {detect_loop(events, loop_threshold)}")


@main.group()
def registry() -> None:
    """Hardware registry tools."""


@registry.command("validate")
@click.argument("registry_file", type=click.Path(exists=True, path_type=Path))
def registry_validate(registry_file: Path) -> None:
    """Validate a registry file against every structural invariant."""
    try:
        reg = load_registry(registry_file.read_text())
    except LabgateError as exc:
        click.echo(f"invalid: {exc}", err=True)
        sys.exit(2)
    errors = validate_registry(reg)
    if errors:
        for error in errors:
            click.echo(f"invalid: {error}", err=True)
        sys.exit(2)
    click.echo(f"ok: {len(reg.devices)} devices, version {reg.version}")


@main.group()
def fsm() -> None:
    """Decision-matrix tools."""


@fsm.command("export-matrix")
@click.option("--ablated", is_flag=True, default=False, help="Export the pass-through matrix.")
def fsm_export_matrix(ablated: bool) -> None:
    """Print the compiled-in priority decision matrix as JSON."""
    matrix = passthrough_matrix() if ablated else default_matrix()
    click.echo(json.dumps(matrix.to_json(), indent=2))


@main.command()
@click.option("--host", default="127.0.0.1", envvar="LABGATE_HOST")
@click.option("--port", type=int, default=8000, envvar="LABGATE_PORT")
@click.option("--suite-dir", type=click.Path(exists=True, file_okay=False, path_type=Path), default=None)
@click.option("--max-runs", type=int, default=8, envvar="LABGATE_MAX_RUNS")
@click.option("--planner", "planner_backend", type=click.Choice(["scripted", "remote"]), default="scripted")
@click.option("--static-dir", type=click.Path(path_type=Path), default=None, help="Operator console build to serve.")
@click.option("--trace-dir", type=click.Path(path_type=Path), default=None, help="Directory for per-run trace files.")
def serve(
    host: str,
    port: int,
    suite_dir: Path | None,
    max_runs: int,
    planner_backend: str,
    static_dir: Path | None,
    trace_dir: Path | None,
) -> None:
    """Start the HTTP control service."""
    import uvicorn

    from .service import create_app

    try:
        suite = load_suite(suite_dir or bundled_suite_path())
    except LabgateError as exc:
        _fail_config(str(exc))
    app = create_app(
        suite=suite,
        max_runs=max_runs,
        planner_backend=planner_backend,
        static_dir=static_dir,
        trace_dir=trace_dir,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--episodes", type=int, default=1000)
@click.option("--seed", type=int, default=0)
@click.option("--no-fsm", is_flag=True, default=False)
def audit(episodes: int, seed: int, no_fsm: bool) -> None:
    """Run the randomized adversarial suite and audit every executed op."""
    from .harness import run_adversarial_suite

    registry_file = bundled_suite_path() / "registry.json"
    reg = load_registry(registry_file.read_text())
    matrix = passthrough_matrix() if no_fsm else None
    stats = run_adversarial_suite(episodes, reg, seed=seed, matrix=matrix)
    click.echo(json.dumps(stats, indent=2))
    sys.exit(0 if stats["violating_executed_ops"] == 0 else 1)


if __name__ == "__main__":
    main()
