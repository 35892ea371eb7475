"""Experiment configuration: JSON schema, validation, plan construction.

A config file fully determines an experiment grid: the dataset (an on-disk
manifest or a synthetic corpus spec), which concepts to run and how many
repetitions, the shared selection settings, and one entry per strategy/mode
cell. Every RNG stream derives from the single top-level rng_seed, so the
same config always replays to the same results files.

Unknown keys anywhere are rejected rather than ignored: a typo in a config
should fail loudly, not silently run a different experiment.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

from .classifier import TrainConfig
from .data import SeedSpec
from .engine import PoolAll, PoolMode, PoolRandom, PoolSeals
from .index import LshParams
from .strategies import (
    InfoDensity,
    MaxEntropy,
    MostLikelyPositive,
    RandomScore,
    StrategyKind,
    derive_seed,
)
from .synthetic import SyntheticSpec

SCHEMA_VERSION = 1

# canonical names plus the short forms people actually type
STRATEGY_ALIASES = {
    "max-entropy": "max-entropy",
    "entropy": "max-entropy",
    "most-likely-positive": "most-likely-positive",
    "mlp": "most-likely-positive",
    "information-density": "information-density",
    "info-density": "information-density",
    "random": "random",
}

MODE_NAMES = ("all", "seals", "rand-pool")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _reject_unknown(mapping: dict, allowed: tuple[str, ...], context: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}")


def _get(mapping: dict, key: str, kind, default, context: str):
    value = mapping.get(key, default)
    if value is default and key not in mapping:
        return default
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{context}: {key!r} must be {kind.__name__}")
    return value


@dataclass(frozen=True)
class RunSpec:
    """One strategy/mode cell of the grid."""

    name: str
    strategy: str
    mode: str
    k: int = 100
    fraction: float = 0.05
    beta: float = 1.0

    def strategy_instance(self, rng_seed: int) -> StrategyKind:
        if self.strategy == "max-entropy":
            return MaxEntropy()
        if self.strategy == "most-likely-positive":
            return MostLikelyPositive()
        if self.strategy == "information-density":
            return InfoDensity(beta=self.beta)
        return RandomScore(rng_seed=rng_seed)

    def mode_instance(self) -> PoolMode:
        if self.mode == "seals":
            return PoolSeals(k=self.k)
        if self.mode == "rand-pool":
            return PoolRandom(fraction=self.fraction)
        return PoolAll()


@dataclass(frozen=True)
class ExperimentPlan:
    """Validated form of a config file, ready to execute."""

    rng_seed: int
    manifest: Path | None
    synthetic: SyntheticSpec | None
    concepts: tuple[str, ...] | None  # None means every dataset concept
    repetitions: int
    batch_size: int
    budget: int
    seed_positives: int
    seed_negative_ratio: int
    lsh: LshParams | None  # None means the exact index
    precompute: bool
    record_timings: bool
    train: TrainConfig
    runs: tuple[RunSpec, ...]

    def seed_spec(self, cell: str, concept: str, rep: int) -> SeedSpec:
        return SeedSpec(
            num_positives=self.seed_positives,
            negative_ratio=self.seed_negative_ratio,
            rng_seed=self.child_seed(cell, concept, rep),
        )

    def child_seed(self, cell: str, concept: str, rep: int) -> int:
        # crc32 of the names keeps streams stable under grid reordering
        return derive_seed(
            self.rng_seed,
            zlib.crc32(cell.encode()),
            zlib.crc32(concept.encode()),
            rep,
        )


def _parse_run(entry, used_names: set[str], position: int) -> RunSpec:
    context = f"runs[{position}]"
    if not isinstance(entry, dict):
        raise ConfigError(f"{context}: each run must be an object")
    _reject_unknown(
        entry, ("name", "strategy", "mode", "k", "fraction", "beta"), context
    )
    raw_strategy = _get(entry, "strategy", str, None, context)
    if raw_strategy is None:
        raise ConfigError(f"{context}: 'strategy' is required")
    strategy = STRATEGY_ALIASES.get(raw_strategy)
    if strategy is None:
        known = sorted(STRATEGY_ALIASES)
        raise ConfigError(
            f"{context}: unknown strategy {raw_strategy!r}; known: {known}"
        )
    mode = _get(entry, "mode", str, "all", context)
    if mode not in MODE_NAMES:
        raise ConfigError(f"{context}: unknown mode {mode!r}; known: {MODE_NAMES}")
    if "k" in entry and mode != "seals":
        raise ConfigError(f"{context}: 'k' is only valid for mode 'seals'")
    if "fraction" in entry and mode != "rand-pool":
        raise ConfigError(f"{context}: 'fraction' is only valid for mode 'rand-pool'")
    if "beta" in entry and strategy != "information-density":
        raise ConfigError(
            f"{context}: 'beta' is only valid for strategy 'information-density'"
        )
    k = _get(entry, "k", int, 100, context)
    fraction = _get(entry, "fraction", float, 0.05, context)
    beta = _get(entry, "beta", float, 1.0, context)
    name = _get(entry, "name", str, None, context)
    if name is None:
        name = f"{strategy}-{mode}"
        if mode == "seals":
            name += f"-k{k}"
        elif mode == "rand-pool":
            name += f"-f{fraction:g}"
    if not name or "/" in name or name != name.strip():
        raise ConfigError(f"{context}: run name {name!r} is not a valid file stem")
    if name in used_names:
        raise ConfigError(f"{context}: duplicate run name {name!r}")
    used_names.add(name)
    try:
        spec = RunSpec(
            name=name, strategy=strategy, mode=mode, k=k, fraction=fraction, beta=beta
        )
        spec.mode_instance()
        spec.strategy_instance(0)
    except (ValueError, RuntimeError) as exc:  # pool modes raise EngineError
        raise ConfigError(f"{context}: {exc}") from exc
    return spec


def _parse_dataset(raw, context: str) -> tuple[Path | None, SyntheticSpec | None]:
    if not isinstance(raw, dict):
        raise ConfigError(f"{context}: 'dataset' must be an object")
    _reject_unknown(raw, ("manifest", "synthetic"), context)
    has_manifest = "manifest" in raw
    has_synthetic = "synthetic" in raw
    if has_manifest == has_synthetic:
        raise ConfigError(
            f"{context}: provide exactly one of 'manifest' or 'synthetic'"
        )
    if has_manifest:
        manifest = _get(raw, "manifest", str, None, context)
        return Path(manifest), None
    spec = raw["synthetic"]
    if not isinstance(spec, dict):
        raise ConfigError(f"{context}: 'synthetic' must be an object")
    allowed = (
        "n",
        "dim",
        "num_concepts",
        "prevalence",
        "cluster_sigma",
        "cluster_fraction",
        "rng_seed",
        "eval_n",
    )
    _reject_unknown(spec, allowed, f"{context}.synthetic")
    try:
        return None, SyntheticSpec(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}.synthetic: {exc}") from exc


def _parse_index(raw, rng_seed: int, context: str) -> tuple[LshParams | None, bool]:
    if not isinstance(raw, dict):
        raise ConfigError(f"{context}: 'index' must be an object")
    kind = _get(raw, "kind", str, "exact", context)
    if kind == "exact":
        _reject_unknown(raw, ("kind", "precompute"), context)
        return None, _get(raw, "precompute", bool, True, context)
    if kind != "lsh":
        raise ConfigError(f"{context}: index kind must be 'exact' or 'lsh'")
    _reject_unknown(
        raw, ("kind", "num_tables", "bits_per_table", "probe_radius"), context
    )
    probe = raw.get("probe_radius")
    if probe is not None and not isinstance(probe, int):
        raise ConfigError(f"{context}: 'probe_radius' must be int or null")
    try:
        params = LshParams(
            num_tables=_get(raw, "num_tables", int, 16, context),
            bits_per_table=_get(raw, "bits_per_table", int, 12, context),
            probe_radius=probe,
            rng_seed=derive_seed(rng_seed, zlib.crc32(b"lsh-index")),
        )
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    return params, False


def parse_config(raw: dict) -> ExperimentPlan:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    allowed = (
        "schema_version",
        "rng_seed",
        "dataset",
        "concepts",
        "repetitions",
        "batch_size",
        "budget",
        "seed",
        "index",
        "record_timings",
        "train",
        "runs",
    )
    _reject_unknown(raw, allowed, "config")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"config: schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )
    if "dataset" not in raw:
        raise ConfigError("config: 'dataset' is required")
    manifest, synthetic = _parse_dataset(raw["dataset"], "dataset")
    rng_seed = _get(raw, "rng_seed", int, 0, "config")

    concepts = raw.get("concepts")
    if concepts is not None:
        if not isinstance(concepts, list) or not all(
            isinstance(c, str) for c in concepts
        ):
            raise ConfigError("config: 'concepts' must be a list of strings or null")
        if len(set(concepts)) != len(concepts):
            raise ConfigError("config: 'concepts' contains duplicates")
        concepts = tuple(concepts)

    seed_raw = raw.get("seed", {})
    if not isinstance(seed_raw, dict):
        raise ConfigError("config: 'seed' must be an object")
    _reject_unknown(seed_raw, ("positives", "negative_ratio"), "seed")
    train_raw = raw.get("train", {})
    if not isinstance(train_raw, dict):
        raise ConfigError("config: 'train' must be an object")
    _reject_unknown(train_raw, ("l2", "tol", "max_iters"), "train")

    runs_raw = raw.get("runs", [])
    if not isinstance(runs_raw, list):
        raise ConfigError("config: 'runs' must be a list")
    used_names: set[str] = set()
    runs = tuple(
        _parse_run(entry, used_names, i) for i, entry in enumerate(runs_raw)
    )

    lsh, precompute = _parse_index(raw.get("index", {}), rng_seed, "index")
    try:
        train = TrainConfig(
            l2=_get(train_raw, "l2", float, 1e-4, "train"),
            tol=_get(train_raw, "tol", float, 1e-6, "train"),
            max_iters=_get(train_raw, "max_iters", int, 1000, "train"),
        )
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc

    plan = ExperimentPlan(
        rng_seed=rng_seed,
        manifest=manifest,
        synthetic=synthetic,
        concepts=concepts,
        repetitions=_get(raw, "repetitions", int, 1, "config"),
        batch_size=_get(raw, "batch_size", int, 100, "config"),
        budget=_get(raw, "budget", int, 2000, "config"),
        seed_positives=_get(seed_raw, "positives", int, 5, "seed"),
        seed_negative_ratio=_get(seed_raw, "negative_ratio", int, 19, "seed"),
        lsh=lsh,
        precompute=precompute,
        record_timings=_get(raw, "record_timings", bool, True, "config"),
        train=train,
        runs=runs,
    )
    if plan.repetitions < 1:
        raise ConfigError("config: 'repetitions' must be >= 1")
    if plan.batch_size < 1 or plan.budget < 1:
        raise ConfigError("config: 'batch_size' and 'budget' must be >= 1")
    if plan.seed_positives < 1 or plan.seed_negative_ratio < 0:
        raise ConfigError(
            "seed: 'positives' must be >= 1 and 'negative_ratio' >= 0"
        )
    return plan


def load_config(path: str | Path) -> ExperimentPlan:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)
