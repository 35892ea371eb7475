"""Active search engine.

Two pool regimes around one selection loop:

  * run_baseline scans a fixed pool each round: the full unlabeled corpus
    (PoolAll) or a uniform subsample of it (PoolRandom).
  * run_seals keeps the pool restricted to the k nearest neighbors of the
    labeled set: it starts from the neighbors of the seed and, after each
    selected example is labeled, merges that example's neighbors back in. The
    model stays fixed within a batch, so |pool| <= k * |labeled| always holds.

The engine itself is an explicit state machine (pending / submit) so that a
human labeler over HTTP and an in-process oracle drive exactly the same code,
and so that a checkpoint taken mid-round resumes bit-for-bit.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import ClassifierModel, TrainConfig, train_classifier
from .data import DatasetError, EmbeddingDataset, LabeledSet, SeedSpec, build_seed
from .metrics import average_precision
from .strategies import (
    InfoDensity,
    RandomScore,
    SimCache,
    StrategyKind,
    derive_seed,
    score_rows,
)

logger = logging.getLogger(__name__)

_FALLBACK_TAG = 0xFA11BACC
_RANDPOOL_TAG = 0x9001D00D
_ROUND_TAG = 0x5E1EC7


class EngineError(RuntimeError):
    """Engine misuse: bad submit, exhausted run, malformed state."""


class LabelerError(RuntimeError):
    """A labeler failed mid-run; partial records are preserved on .records."""

    def __init__(self, message: str, records: list["RoundRecord"]):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class PoolAll:
    pass


@dataclass(frozen=True)
class PoolSeals:
    k: int = 100

    def __post_init__(self) -> None:
        if self.k < 1:
            raise EngineError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class PoolRandom:
    fraction: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.fraction <= 1.0:
            raise EngineError(f"fraction must be in (0, 1], got {self.fraction}")


PoolMode = PoolAll | PoolSeals | PoolRandom


@dataclass(frozen=True)
class ExperimentConfig:
    concept: str
    strategy: StrategyKind
    mode: PoolMode
    batch_size: int = 100
    budget: int = 2000
    seed: SeedSpec = SeedSpec()
    train: TrainConfig = TrainConfig()

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise EngineError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.budget < 1:
            raise EngineError(f"budget must be >= 1, got {self.budget}")


@dataclass
class RoundRecord:
    round_index: int
    labeled_count: int
    positives_found: int
    pool_size: int
    pool_fraction: float
    average_precision: float
    selection_time: float
    knn_time: float
    training_time: float
    pool_exhausted: bool = False  # not serialized; the line schema is fixed

    def to_row(self, concept: str, rep: int, timings: bool = True) -> dict:
        return {
            "concept": concept,
            "rep": rep,
            "round": self.round_index,
            "labeled": self.labeled_count,
            "positives": self.positives_found,
            "pool_size": self.pool_size,
            "pool_frac": self.pool_fraction,
            "ap": None if np.isnan(self.average_precision) else self.average_precision,
            "t_select_s": self.selection_time if timings else 0.0,
            "t_knn_s": self.knn_time if timings else 0.0,
            "t_train_s": self.training_time if timings else 0.0,
        }


class CandidatePool:
    """Grow-only row store with liveness flags and per-row scores.

    Rows keep their insertion position; removal flips a flag. argmax scans live
    scores and breaks exact ties toward the lower row index, which is the
    selection order contract.
    """

    def __init__(self, vectors: np.ndarray, rows=()) -> None:
        self.vectors = vectors
        self._rows = np.empty(1024, dtype=np.int64)
        self._alive = np.zeros(1024, dtype=bool)
        self._scores = np.full(1024, -np.inf)
        self._len = 0
        self._pos: dict[int, int] = {}
        self.add_new(rows)

    def _grow(self, need: int) -> None:
        cap = self._rows.shape[0]
        if self._len + need <= cap:
            return
        new_cap = max(cap * 2, self._len + need)
        for name in ("_rows", "_alive", "_scores"):
            old = getattr(self, name)
            fresh = np.empty(new_cap, dtype=old.dtype)
            if name == "_alive":
                fresh[:] = False
            fresh[: self._len] = old[: self._len]
            setattr(self, name, fresh)

    def add_new(self, rows) -> np.ndarray:
        """Insert rows not already present (live); returns the newcomers.

        The bulk path assumes the very first insertion is already unique,
        which holds for every pool construction route.
        """
        if not self._pos:
            arr = np.asarray(rows, dtype=np.int64).reshape(-1)
            if arr.size == 0:
                return arr
            self._grow(arr.size)
            self._rows[: arr.size] = arr
            self._alive[: arr.size] = True
            self._scores[: arr.size] = -np.inf
            self._pos = dict(zip(arr.tolist(), range(arr.size)))
            self._len = arr.size
            return arr.copy()
        fresh = [int(r) for r in rows if int(r) not in self._pos]
        if not fresh:
            return np.empty(0, dtype=np.int64)
        self._grow(len(fresh))
        for r in fresh:
            i = self._len
            self._rows[i] = r
            self._alive[i] = True
            self._scores[i] = -np.inf
            self._pos[r] = i
            self._len += 1
        return np.array(fresh, dtype=np.int64)

    def remove(self, row: int) -> None:
        i = self._pos.pop(int(row))
        self._alive[i] = False

    def discard(self, row: int) -> None:
        if int(row) in self._pos:
            self.remove(row)

    def __contains__(self, row: int) -> bool:
        return int(row) in self._pos

    @property
    def size(self) -> int:
        return len(self._pos)

    def live_rows(self) -> np.ndarray:
        rows = self._rows[: self._len][self._alive[: self._len]]
        return rows.copy()

    def set_scores(self, rows: np.ndarray, scores: np.ndarray) -> None:
        idx = np.fromiter((self._pos[int(r)] for r in rows), dtype=np.int64)
        self._scores[idx] = scores

    def argmax_score(self) -> int | None:
        if not self._pos:
            return None
        alive = self._alive[: self._len]
        scores = self._scores[: self._len]
        best = np.max(scores[alive])
        rows = self._rows[: self._len]
        ties = rows[alive & (scores == best)]
        return int(ties.min())


class OracleLabeler:
    """Answers from a dataset's concept bitset."""

    def __init__(self, dataset: EmbeddingDataset, concept: str) -> None:
        self._labels = dataset.oracle_labels(concept)

    def label(self, row: int) -> int:
        return int(self._labels[row])


class ActiveRun:
    """Stepper for one experiment: ask .pending(), answer with .submit().

    Construction draws the seed, builds the pool, trains the round-0 model and
    evaluates it; after that each submit may close a round (retrain, evaluate,
    record) and stage the next selection. The run is complete when pending()
    returns None.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        dataset: EmbeddingDataset,
        index=None,
        eval_dataset: EmbeddingDataset | None = None,
        _restore: dict | None = None,
    ) -> None:
        self.config = config
        self.dataset = dataset
        self.index = index
        self.eval_dataset = eval_dataset
        if isinstance(config.mode, PoolSeals) and index is None:
            raise EngineError("neighbor-restricted mode needs an index")
        if config.budget > dataset.n:
            raise EngineError(
                f"budget {config.budget} exceeds corpus size {dataset.n}"
            )
        self._eval_labels = (
            eval_dataset.oracle_labels(config.concept) if eval_dataset is not None else None
        )
        if self._eval_labels is not None and not (self._eval_labels == 1).any():
            raise EngineError(f"eval split has no positives for {config.concept!r}")
        self.cache = SimCache() if isinstance(config.strategy, InfoDensity) else None
        self.records: list[RoundRecord] = []
        self.model: ClassifierModel | None = None
        self._sel_time = 0.0
        self._knn_time = 0.0
        self._pending: int | None = None
        self._fallback_queue: list[int] = []
        self._round_exhausted = False
        self._batch_left = 0
        self._round = 0

        if _restore is not None:
            self._restore_state(_restore)
            return

        if config.budget < config.seed.num_positives * (1 + config.seed.negative_ratio):
            raise EngineError("budget smaller than the seed set")
        self.labeled = build_seed(dataset, config.concept, config.seed)
        self.pool = CandidatePool(dataset.vectors)
        self._init_pool()
        self._close_round()  # round 0: train and evaluate the seed model

    # ---- pool construction -------------------------------------------------

    def _unlabeled_rows(self) -> np.ndarray:
        return np.setdiff1d(
            np.arange(self.dataset.n, dtype=np.int64), self.labeled.rows()
        )

    def _init_pool(self) -> None:
        mode = self.config.mode
        labeled_rows = set(int(r) for r in self.labeled.rows())
        if isinstance(mode, PoolAll):
            members = self._unlabeled_rows()
        elif isinstance(mode, PoolRandom):
            want = int(round(mode.fraction * self.dataset.n))
            unlabeled = self._unlabeled_rows()
            rng = np.random.default_rng(
                derive_seed(self.config.seed.rng_seed, _RANDPOOL_TAG)
            )
            want = min(want, unlabeled.size)
            members = np.sort(rng.choice(unlabeled, size=want, replace=False))
        else:
            start = time.perf_counter()
            found: set[int] = set()
            for row in self.labeled.rows():
                found.update(
                    int(r) for r in self.index.query_row(int(row), mode.k).rows
                )
            self._knn_time += time.perf_counter() - start
            members = sorted(found - labeled_rows)
        added = self.pool.add_new(members)
        self._freeze_similarity(added)

    def _freeze_similarity(self, added_rows: np.ndarray) -> None:
        if self.cache is None or added_rows.size == 0:
            return
        self.cache.insert_absent(
            added_rows, self.pool.live_rows(), self.dataset.vectors
        )

    def _merge_neighbors(self, row: int) -> None:
        """SEALS step: pull the just-labeled row's neighbors into the pool."""
        mode = self.config.mode
        if not isinstance(mode, PoolSeals):
            return
        start = time.perf_counter()
        result = self.index.query_row(int(row), mode.k)
        self._knn_time += time.perf_counter() - start
        start = time.perf_counter()
        eligible = [int(r) for r in result.rows if int(r) not in self.labeled]
        added = self.pool.add_new(eligible)
        if added.size:
            self._freeze_similarity(added)
            scores = score_rows(
                self._round_kind(),
                self.model,
                added,
                self.dataset.vectors,
                self.cache,
            )
            self.pool.set_scores(added, scores)
        self._sel_time += time.perf_counter() - start

    # ---- selection loop ----------------------------------------------------

    def _round_kind(self) -> StrategyKind:
        kind = self.config.strategy
        if isinstance(kind, RandomScore):
            return replace(
                kind, rng_seed=derive_seed(kind.rng_seed, _ROUND_TAG, self._round)
            )
        return kind

    def _begin_round(self) -> None:
        self._round += 1
        self._sel_time = 0.0
        self._knn_time = 0.0
        self._round_exhausted = False
        self._batch_left = min(
            self.config.batch_size, self.config.budget - len(self.labeled)
        )
        if self.pool.size == 0:
            self._round_exhausted = True
            logger.warning(
                "pool exhausted at round %d; labeling %d uniform random rows",
                self._round,
                self._batch_left,
            )
            rng = np.random.default_rng(
                derive_seed(self.config.seed.rng_seed, _FALLBACK_TAG, self._round)
            )
            picks = rng.choice(
                self._unlabeled_rows(), size=self._batch_left, replace=False
            )
            self._fallback_queue = [int(r) for r in picks]
        else:
            start = time.perf_counter()
            rows = self.pool.live_rows()
            scores = score_rows(
                self._round_kind(), self.model, rows, self.dataset.vectors, self.cache
            )
            self.pool.set_scores(rows, scores)
            self._sel_time += time.perf_counter() - start
        self._stage_next()

    def _stage_next(self) -> None:
        if self._fallback_queue:
            self._pending = self._fallback_queue.pop(0)
            return
        start = time.perf_counter()
        row = self.pool.argmax_score()
        self._sel_time += time.perf_counter() - start
        if row is None:
            # mid-batch exhaustion: close early, the next round re-checks
            self._pending = None
            return
        self.pool.remove(row)
        self._pending = row

    def pending(self) -> int | None:
        """The row awaiting a label, or None when the run is complete."""
        return self._pending

    @property
    def complete(self) -> bool:
        return self._pending is None

    def submit(self, row: int, label: int) -> None:
        """Record the label for the pending row and advance the run."""
        row = int(row)
        if self._pending is None:
            raise EngineError("run is not awaiting a label")
        if row != self._pending:
            raise EngineError(f"row {row} is not pending (expected {self._pending})")
        self._pending = None
        self.labeled.add(row, label)
        self.pool.discard(row)  # fallback rows may have been merged back in
        self._batch_left -= 1
        self._merge_neighbors(row)
        if self._batch_left > 0 and (self._fallback_queue or self.pool.size > 0):
            self._stage_next()
            if self._pending is not None:
                return
        self._close_round()

    def _close_round(self) -> None:
        start = time.perf_counter()
        self.model = train_classifier(
            self.dataset.vectors[self.labeled.rows()],
            self.labeled.labels(),
            self.config.train,
        )
        train_time = time.perf_counter() - start
        ap = float("nan")
        if self._eval_labels is not None:
            ap = average_precision(
                self.model.proba_matrix(self.eval_dataset.vectors), self._eval_labels
            )
        self.records.append(
            RoundRecord(
                round_index=self._round,
                labeled_count=len(self.labeled),
                positives_found=self.labeled.num_positives,
                pool_size=self.pool.size,
                pool_fraction=self.pool.size / self.dataset.n,
                average_precision=ap,
                selection_time=self._sel_time,
                knn_time=self._knn_time,
                training_time=train_time,
                pool_exhausted=self._round_exhausted,
            )
        )
        if len(self.labeled) < self.config.budget:
            self._begin_round()
        else:
            self._pending = None

    def run(self, labeler) -> list[RoundRecord]:
        """Drive the stepper with a labeler until the budget is spent."""
        while (row := self.pending()) is not None:
            try:
                label = labeler.label(row)
            except Exception as exc:
                raise LabelerError(f"labeler failed on row {row}: {exc}", self.records) from exc
            self.submit(row, label)
        return self.records

    # ---- checkpointing -----------------------------------------------------

    def to_state(self) -> dict:
        """JSON-safe snapshot; resuming reproduces the uninterrupted run."""
        live = self.pool.live_rows()
        return {
            "version": 1,
            "concept": self.config.concept,
            "round": self._round,
            "batch_left": self._batch_left,
            "pending": self._pending,
            "fallback_queue": list(self._fallback_queue),
            "round_exhausted": self._round_exhausted,
            "sel_time": self._sel_time,
            "knn_time": self._knn_time,
            "labeled": [[int(r), int(y)] for r, y in self.labeled.entries],
            "pool_rows": [int(r) for r in live],
            "pool_scores": [float(s) for s in self.pool._scores[: self.pool._len][
                self.pool._alive[: self.pool._len]
            ]],
            "model": None
            if self.model is None
            else {"weights": self.model.weights.tolist(), "bias": self.model.bias},
            "cache": None
            if self.cache is None
            else {
                "avg": {str(k): v for k, v in self.cache.avg_sim.items()},
                "size": {str(k): v for k, v in self.cache.pool_size_at_compute.items()},
                "pair_evals": self.cache.pair_evals,
            },
            "records": [
                {
                    "round_index": r.round_index,
                    "labeled_count": r.labeled_count,
                    "positives_found": r.positives_found,
                    "pool_size": r.pool_size,
                    "pool_fraction": r.pool_fraction,
                    "average_precision": r.average_precision,
                    "selection_time": r.selection_time,
                    "knn_time": r.knn_time,
                    "training_time": r.training_time,
                    "pool_exhausted": r.pool_exhausted,
                }
                for r in self.records
            ],
        }

    def _restore_state(self, state: dict) -> None:
        if state.get("version") != 1:
            raise EngineError(f"unsupported checkpoint version {state.get('version')}")
        if state.get("concept") != self.config.concept:
            raise EngineError(
                f"checkpoint concept {state.get('concept')!r} does not match "
                f"config concept {self.config.concept!r}"
            )
        try:
            self._round = state["round"]
            self._batch_left = state["batch_left"]
            self._pending = state["pending"]
            self._fallback_queue = list(state["fallback_queue"])
            self._round_exhausted = state["round_exhausted"]
            self._sel_time = state["sel_time"]
            self._knn_time = state["knn_time"]
            self.labeled = LabeledSet([(r, y) for r, y in state["labeled"]])
            self.pool = CandidatePool(self.dataset.vectors, state["pool_rows"])
            self.pool.set_scores(
                np.array(state["pool_rows"], dtype=np.int64),
                np.array(state["pool_scores"], dtype=np.float64),
            )
            if state["model"] is not None:
                self.model = ClassifierModel(
                    weights=np.array(state["model"]["weights"], dtype=np.float64),
                    bias=float(state["model"]["bias"]),
                )
            if state["cache"] is not None:
                self.cache = SimCache(
                    avg_sim={int(k): v for k, v in state["cache"]["avg"].items()},
                    pool_size_at_compute={
                        int(k): v for k, v in state["cache"]["size"].items()
                    },
                    pair_evals=state["cache"]["pair_evals"],
                )
            self.records = [RoundRecord(**r) for r in state["records"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise EngineError(f"corrupt checkpoint: {exc}") from exc

    @classmethod
    def from_state(
        cls,
        state: dict,
        config: ExperimentConfig,
        dataset: EmbeddingDataset,
        index=None,
        eval_dataset: EmbeddingDataset | None = None,
    ) -> "ActiveRun":
        return cls(config, dataset, index=index, eval_dataset=eval_dataset, _restore=state)


def run_baseline(
    config: ExperimentConfig,
    dataset: EmbeddingDataset,
    labeler,
    eval_dataset: EmbeddingDataset | None = None,
) -> list[RoundRecord]:
    """Fixed-pool run: the whole unlabeled corpus or a random subsample."""
    if isinstance(config.mode, PoolSeals):
        raise EngineError("run_baseline does not take a neighbor-restricted mode")
    return ActiveRun(config, dataset, eval_dataset=eval_dataset).run(labeler)


def run_seals(
    config: ExperimentConfig,
    dataset: EmbeddingDataset,
    labeler,
    index,
    eval_dataset: EmbeddingDataset | None = None,
) -> list[RoundRecord]:
    """Neighbor-restricted run over the given similarity index."""
    if not isinstance(config.mode, PoolSeals):
        raise EngineError("run_seals needs a neighbor-restricted mode")
    return ActiveRun(config, dataset, index=index, eval_dataset=eval_dataset).run(labeler)


def run_experiment(
    config: ExperimentConfig,
    dataset: EmbeddingDataset,
    labeler,
    index=None,
    eval_dataset: EmbeddingDataset | None = None,
) -> list[RoundRecord]:
    if isinstance(config.mode, PoolSeals):
        return run_seals(config, dataset, labeler, index, eval_dataset)
    return run_baseline(config, dataset, labeler, eval_dataset)
