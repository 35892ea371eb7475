"""Command-line entry points: run, analyze-graph, theory, serve.

Every command takes a JSON config (see config.py for the schema) except
theory, which is parameterized directly. Config and dataset problems exit
with code 2 and a one-line reason; partial results are never deleted.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import ConfigError, ExperimentPlan, load_config
from .data import DatasetError
from .engine import ActiveRun, EngineError, ExperimentConfig
from .graphs import GraphError, analyze_concepts, write_structure_csv
from .runner import (
    RunnerError,
    build_index,
    execute_plan,
    open_dataset,
    plan_concepts,
)
from .service import LabelingSession, make_server
from .theory import (
    TheoryError,
    make_two_phase_instance,
    run_modified_seals,
    write_trace_csv,
)

_CONFIG_OPT = click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="JSON experiment config.",
)
_DATA_DIR_OPT = click.option(
    "--data-dir",
    envvar="SEALS_DATA_DIR",
    default=None,
    help="Root for relative dataset paths (env: SEALS_DATA_DIR).",
)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug-level logging.")
def main(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_plan(config_path: str) -> ExperimentPlan:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc


@main.command()
@_CONFIG_OPT
@click.option(
    "--out",
    "out_dir",
    required=True,
    type=click.Path(file_okay=False),
    help="Output directory (results/, progress.json, summary.json).",
)
@_DATA_DIR_OPT
def run(config_path: str, out_dir: str, data_dir: str | None) -> None:
    """Run every experiment cell in the config, resuming finished work."""
    plan = _load_plan(config_path)
    if not plan.runs:
        raise click.UsageError("config: 'runs' must be a non-empty list")
    try:
        summary = execute_plan(plan, out_dir, data_dir)
    except (DatasetError, RunnerError) as exc:
        raise click.UsageError(str(exc)) from exc
    click.echo(json.dumps(summary["cells"], indent=2, sort_keys=True))


@main.command("analyze-graph")
@_CONFIG_OPT
@click.option(
    "--out",
    "out_path",
    default="structure.csv",
    type=click.Path(dir_okay=False),
    show_default=True,
    help="Per-concept structure CSV.",
)
@click.option(
    "--k",
    default=10,
    show_default=True,
    help="Neighbors per positive when building concept graphs.",
)
@_DATA_DIR_OPT
def analyze_graph(
    config_path: str, out_path: str, k: int, data_dir: str | None
) -> None:
    """Measure neighbor-graph structure of each concept's positives."""
    plan = _load_plan(config_path)
    try:
        dataset, _ = open_dataset(plan, data_dir)
        concepts = plan_concepts(plan, dataset)
        rows = analyze_concepts(dataset, k, concepts=list(concepts))
    except (DatasetError, RunnerError, GraphError) as exc:
        raise click.UsageError(str(exc)) from exc
    write_structure_csv(rows, out_path)
    click.echo(f"wrote {out_path} ({len(rows)} concepts)")


@main.command()
@click.option("--d", "dim", default=2, show_default=True, help="Ambient dimension.")
@click.option("--gamma", default=1.0, show_default=True, help="Seed offset from the boundary.")
@click.option("--delta", default=0.05, show_default=True, help="Step radius.")
@click.option("--epsilon", default=0.01, show_default=True, help="Target separator error.")
@click.option(
    "--variant",
    type=click.Choice(["nn-graph", "project-anywhere"]),
    default="nn-graph",
    show_default=True,
)
@click.option("--max-rounds", default=1000, show_default=True)
@click.option(
    "--out",
    "out_path",
    default="trace.csv",
    type=click.Path(dir_okay=False),
    show_default=True,
    help="Trace CSV of (round, chain, rho, w_err, queries_total).",
)
def theory(
    dim: int,
    gamma: float,
    delta: float,
    epsilon: float,
    variant: str,
    max_rounds: int,
    out_path: str,
) -> None:
    """Simulate the boundary walk and write its per-round trace."""
    try:
        instance = make_two_phase_instance(
            d=dim, gamma=gamma, delta=delta, epsilon=epsilon
        )
        trace = run_modified_seals(instance, variant, max_rounds=max_rounds)
    except TheoryError as exc:
        raise click.UsageError(str(exc)) from exc
    write_trace_csv(trace, out_path)
    click.echo(
        f"converged={trace.converged} rounds={trace.rounds} "
        f"queries={trace.queries_total} wrote {out_path}"
    )


def _default_static() -> Path | None:
    bundled = Path(__file__).parent / "static"
    return bundled if bundled.is_dir() else None


@main.command()
@_CONFIG_OPT
@click.option(
    "--out",
    "out_dir",
    required=True,
    type=click.Path(file_okay=False),
    help="Session directory (results/, checkpoint.json).",
)
@click.option("--port", default=8080, show_default=True, help="0 picks a free port.")
@click.option(
    "--static-dir",
    default=None,
    type=click.Path(file_okay=False, exists=True),
    help="UI assets to serve at /; defaults to the bundled UI if present.",
)
@click.option(
    "--payload-template",
    default=None,
    help="Format string for payload_uri, e.g. 'https://img/{external_id}.jpg'.",
)
@_DATA_DIR_OPT
def serve(
    config_path: str,
    out_dir: str,
    port: int,
    static_dir: str | None,
    payload_template: str | None,
    data_dir: str | None,
) -> None:
    """Serve one human labeling session over HTTP."""
    plan = _load_plan(config_path)
    if len(plan.runs) != 1:
        raise click.UsageError("serve: config must contain exactly one run entry")
    try:
        dataset, eval_dataset = open_dataset(plan, data_dir)
        concepts = plan_concepts(plan, dataset)
    except (DatasetError, RunnerError) as exc:
        raise click.UsageError(str(exc)) from exc
    if len(concepts) != 1:
        raise click.UsageError(
            f"serve: config must pin exactly one concept, got {len(concepts)}"
        )
    concept = concepts[0]
    spec = plan.runs[0]
    index = build_index(plan, dataset)
    config = ExperimentConfig(
        concept=concept,
        strategy=spec.strategy_instance(plan.child_seed(spec.name, concept, 0)),
        mode=spec.mode_instance(),
        batch_size=plan.batch_size,
        budget=plan.budget,
        seed=plan.seed_spec(spec.name, concept, 0),
        train=plan.train,
    )
    out = Path(out_dir)
    checkpoint = out / "checkpoint.json"
    resumed = checkpoint.exists()
    try:
        if resumed:
            state = json.loads(checkpoint.read_text(encoding="utf-8"))
            active = ActiveRun.from_state(
                state, config, dataset, index=index, eval_dataset=eval_dataset
            )
            click.echo(f"resumed session from {checkpoint}")
        else:
            active = ActiveRun(
                config, dataset, index=index, eval_dataset=eval_dataset
            )
    except (EngineError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot resume {checkpoint}: {exc}") from exc
    session = LabelingSession(
        active,
        dataset,
        spec.name,
        out,
        payload_template=payload_template,
        record_timings=plan.record_timings,
        resumed=resumed,
    )
    chosen = Path(static_dir) if static_dir is not None else _default_static()
    server = make_server(session, port, chosen)
    print(f"SERVING port={server.server_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


if __name__ == "__main__":
    main()
