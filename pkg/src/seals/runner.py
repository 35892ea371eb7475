"""Grid execution: every (cell x concept x repetition), resumable.

Results land under the output directory:

    results/<cell>.jsonl   one line per round per (concept, rep)
    progress.json          finished (cell, concept, rep) triples
    summary.json           per-cell aggregates, rewritten after every call

A killed process never leaves a half-written run behind: a run's rows are
buffered and appended in a single write only after it completes, and
progress.json is replaced atomically. Re-invoking with the same config and
output directory skips finished triples and fills in the rest.
"""

from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path

from .config import ExperimentPlan
from .data import EmbeddingDataset, load_dataset
from .engine import ExperimentConfig, OracleLabeler, run_experiment
from .index import ExactIndex, LshIndex
from .metrics import summarize_cell
from .synthetic import make_corpus

logger = logging.getLogger("seals.runner")


class RunnerError(RuntimeError):
    """Output directory state that cannot be safely continued."""


def open_dataset(
    plan: ExperimentPlan, data_dir: str | None = None
) -> tuple[EmbeddingDataset, EmbeddingDataset | None]:
    if plan.synthetic is not None:
        return make_corpus(plan.synthetic)
    return load_dataset(plan.manifest, data_dir=data_dir), None


def plan_concepts(plan: ExperimentPlan, dataset: EmbeddingDataset) -> tuple[str, ...]:
    available = tuple(sorted(dataset.concepts))
    if plan.concepts is None:
        return available
    missing = sorted(set(plan.concepts) - set(available))
    if missing:
        raise RunnerError(f"concepts not in dataset: {missing}")
    return plan.concepts


def build_index(plan: ExperimentPlan, dataset: EmbeddingDataset):
    """Index for the plan's neighbor queries; None when no run needs one."""
    ks = [run.k for run in plan.runs if run.mode == "seals"]
    if not ks:
        return None
    if plan.lsh is not None:
        return LshIndex(dataset.vectors, plan.lsh)
    index = ExactIndex(dataset.vectors)
    if plan.precompute:
        index.precompute_table(max(ks))
    return index


def _write_json_atomic(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


_PROGRESS_KEYS = ("rng_seed", "budget", "batch_size", "repetitions")


def _load_progress(path: Path, plan: ExperimentPlan) -> set[tuple[str, str, int]]:
    if not path.exists():
        return set()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        stamp = {key: raw[key] for key in _PROGRESS_KEYS}
        done = {(c, n, int(r)) for c, n, r in raw["done"]}
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise RunnerError(f"corrupt progress file {path}: {exc}") from exc
    expected = {key: getattr(plan, key) for key in _PROGRESS_KEYS}
    if stamp != expected:
        raise RunnerError(
            f"progress file {path} belongs to a different config "
            f"({stamp} != {expected}); use a fresh output directory"
        )
    return done


def _save_progress(
    path: Path, plan: ExperimentPlan, done: set[tuple[str, str, int]]
) -> None:
    obj = {key: getattr(plan, key) for key in _PROGRESS_KEYS}
    obj["done"] = sorted([c, n, r] for c, n, r in done)
    _write_json_atomic(path, obj)


def read_results(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _final_rows(rows: list[dict]) -> list[dict]:
    last: dict[tuple[str, int], dict] = {}
    for row in rows:
        key = (row["concept"], row["rep"])
        prev = last.get(key)
        if prev is None or row["round"] > prev["round"]:
            last[key] = row
    return [last[key] for key in sorted(last)]


def write_summary(
    plan: ExperimentPlan,
    out_dir: Path,
    concepts: tuple[str, ...],
    total_positives: dict[str, int],
) -> dict:
    cells = {}
    for run in plan.runs:
        path = out_dir / "results" / f"{run.name}.jsonl"
        if not path.exists():
            continue
        finals = _final_rows(read_results(path))
        cells[run.name] = {
            "strategy": run.strategy,
            "mode": run.mode,
            "completed_runs": len(finals),
            **summarize_cell(finals, total_positives),
        }
    summary = {
        "schema_version": 1,
        "concepts": list(concepts),
        "repetitions": plan.repetitions,
        "batch_size": plan.batch_size,
        "budget": plan.budget,
        "cells": cells,
    }
    _write_json_atomic(out_dir / "summary.json", summary)
    return summary


def execute_plan(
    plan: ExperimentPlan, out_dir: str | Path, data_dir: str | None = None
) -> dict:
    """Run every missing (cell, concept, rep) and return the summary."""
    out_dir = Path(out_dir)
    results_dir = out_dir / "results"
    results_dir.mkdir(parents=True, exist_ok=True)
    progress_path = out_dir / "progress.json"
    done = _load_progress(progress_path, plan)

    dataset, eval_dataset = open_dataset(plan, data_dir)
    concepts = plan_concepts(plan, dataset)
    index = build_index(plan, dataset)
    total_positives = {c: int(dataset.positives(c).size) for c in concepts}

    total = len(plan.runs) * len(concepts) * plan.repetitions
    finished = len(done)
    for run in plan.runs:
        cell_path = results_dir / f"{run.name}.jsonl"
        for concept in concepts:
            for rep in range(plan.repetitions):
                key = (run.name, concept, rep)
                if key in done:
                    continue
                child = plan.child_seed(run.name, concept, rep)
                config = ExperimentConfig(
                    concept=concept,
                    strategy=run.strategy_instance(child),
                    mode=run.mode_instance(),
                    batch_size=plan.batch_size,
                    budget=plan.budget,
                    seed=plan.seed_spec(run.name, concept, rep),
                    train=plan.train,
                )
                started = time.perf_counter()
                records = run_experiment(
                    config,
                    dataset,
                    OracleLabeler(dataset, concept),
                    index=index,
                    eval_dataset=eval_dataset,
                )
                lines = "".join(
                    json.dumps(r.to_row(concept, rep, timings=plan.record_timings))
                    + "\n"
                    for r in records
                )
                with open(cell_path, "a", encoding="utf-8") as fh:
                    fh.write(lines)
                done.add(key)
                _save_progress(progress_path, plan, done)
                finished += 1
                logger.info(
                    "%s %s rep=%d done in %.1fs (%d/%d)",
                    run.name,
                    concept,
                    rep,
                    time.perf_counter() - started,
                    finished,
                    total,
                )
    return write_summary(plan, out_dir, concepts, total_positives)
