"""Scoring and batch selection rules for pool-based active search.

Four scoring rules over candidate rows:

  * MaxEntropy: binary predictive entropy in nats.
  * MostLikelyPositive: the predicted positive probability itself.
  * InfoDensity: entropy times (average cosine similarity to the pool)^beta.
  * RandomScore: a pure hash of (rng_seed, row), uniform on [0, 1).

InfoDensity averages come from a SimCache: a row's average similarity is
computed once, against the pool as of the moment the row first enters it
(self included), and never recomputed. That makes a selection round cost
O((1 + b*k) * |P|) instead of quadratic in the pool size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MaxEntropy:
    pass


@dataclass(frozen=True)
class MostLikelyPositive:
    pass


@dataclass(frozen=True)
class InfoDensity:
    beta: float = 1.0


@dataclass(frozen=True)
class RandomScore:
    rng_seed: int = 0


StrategyKind = MaxEntropy | MostLikelyPositive | InfoDensity | RandomScore


def binary_entropy(p: np.ndarray | float) -> np.ndarray | float:
    """-p ln p - (1-p) ln (1-p), in nats, with 0 log 0 = 0."""
    arr = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(arr)
    inner = (arr > 0.0) & (arr < 1.0)
    q = arr[inner]
    out[inner] = -q * np.log(q) - (1.0 - q) * np.log1p(-q)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


_MIX1 = np.uint64(0x9E3779B97F4A7C15)
_MIX2 = np.uint64(0xBF58476D1CE4E5B9)
_MIX3 = np.uint64(0x94D049BB133111EB)


def hash_uniform(seed: int, values: np.ndarray | int) -> np.ndarray | float:
    """Deterministic uniform [0, 1) draws from (seed, value) pairs.

    splitmix64 finalizer; vectorized, stateless, and stable across runs.
    """
    scalar = np.isscalar(values)
    v = np.atleast_1d(np.asarray(values, dtype=np.uint64))
    with np.errstate(over="ignore"):
        z = (v + np.uint64(1)) * _MIX1 + np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        z = (z ^ (z >> np.uint64(30))) * _MIX2
        z = (z ^ (z >> np.uint64(27))) * _MIX3
        z = z ^ (z >> np.uint64(31))
    out = (z >> np.uint64(11)).astype(np.float64) * (2.0**-53)
    return float(out[0]) if scalar else out


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed, order sensitive."""
    acc = np.uint64(0x243F6A8885A308D3)
    with np.errstate(over="ignore"):
        for part in parts:
            acc = acc ^ (np.uint64(part & 0xFFFFFFFFFFFFFFFF) + _MIX1)
            acc = (acc ^ (acc >> np.uint64(30))) * _MIX2
            acc = (acc ^ (acc >> np.uint64(27))) * _MIX3
            acc = acc ^ (acc >> np.uint64(31))
    return int(acc)


@dataclass
class SimCache:
    """Frozen per-row average similarity to the pool at first entry.

    pair_evals counts individual similarity evaluations, which is what the
    cost accounting in tests measures.
    """

    avg_sim: dict[int, float] = field(default_factory=dict)
    pool_size_at_compute: dict[int, int] = field(default_factory=dict)
    pair_evals: int = 0

    def insert_absent(
        self, new_rows: np.ndarray, pool_rows: np.ndarray, vectors: np.ndarray
    ) -> None:
        """Compute and freeze averages for rows not already cached.

        pool_rows is the reference pool at this moment and must contain the
        new rows themselves (entering rows see their own similarity of 1).
        """
        fresh = np.array(
            [r for r in np.atleast_1d(new_rows) if int(r) not in self.avg_sim],
            dtype=np.int64,
        )
        if fresh.size == 0:
            return
        pool_rows = np.asarray(pool_rows, dtype=np.int64)
        psize = int(pool_rows.size)
        if psize == 0:
            raise ValueError("reference pool is empty")
        block = max(1, int(2_000_000 // max(psize, 1)))
        for start in range(0, fresh.size, block):
            rows = fresh[start : start + block]
            sims = vectors[rows].astype(np.float64) @ vectors[pool_rows].T.astype(
                np.float64
            )
            means = sims.mean(axis=1)
            for r, mu in zip(rows.tolist(), means.tolist()):
                self.avg_sim[r] = mu
                self.pool_size_at_compute[r] = psize
        self.pair_evals += int(fresh.size) * psize

    def averages(self, rows: np.ndarray) -> np.ndarray:
        try:
            return np.array([self.avg_sim[int(r)] for r in rows], dtype=np.float64)
        except KeyError as exc:
            raise KeyError(f"row {exc} has no cached average similarity") from None


def score_rows(
    kind: StrategyKind,
    model,
    rows: np.ndarray,
    vectors: np.ndarray,
    cache: SimCache | None = None,
) -> np.ndarray:
    """Vectorized scores for candidate rows under one strategy."""
    rows = np.asarray(rows, dtype=np.int64)
    if isinstance(kind, RandomScore):
        return hash_uniform(kind.rng_seed, rows)
    proba = model.proba_matrix(vectors[rows])
    if isinstance(kind, MostLikelyPositive):
        return proba
    entropy = binary_entropy(proba)
    if isinstance(kind, MaxEntropy):
        return entropy
    if isinstance(kind, InfoDensity):
        if cache is None:
            raise ValueError("InfoDensity needs a similarity cache")
        return entropy * np.power(cache.averages(rows), kind.beta)
    raise TypeError(f"unknown strategy kind {kind!r}")


def score(kind: StrategyKind, model, row: int, pool, cache: SimCache | None = None) -> float:
    """Score a single pool row. Requires row to be a current pool member."""
    row = int(row)
    if row not in pool:
        raise ValueError(f"row {row} is not in the candidate pool")
    return float(
        score_rows(kind, model, np.array([row]), pool.vectors, cache)[0]
    )


def select_batch(
    kind: StrategyKind,
    model,
    pool,
    cache: SimCache | None,
    b: int,
) -> list[int]:
    """Greedy top-b: repeated argmax with ties to the lower row index.

    Selected rows are removed from the pool. Returns fewer than b rows when
    the pool runs out.
    """
    if b < 1:
        raise ValueError(f"b must be >= 1, got {b}")
    rows = pool.live_rows()
    if rows.size == 0:
        return []
    scores = score_rows(kind, model, rows, pool.vectors, cache)
    pool.set_scores(rows, scores)
    picked: list[int] = []
    for _ in range(b):
        row = pool.argmax_score()
        if row is None:
            break
        pool.remove(row)
        picked.append(row)
    return picked
