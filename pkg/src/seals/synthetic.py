"""Synthetic unit-sphere corpora with planted concept clusters.

Each concept owns a random unit center; a cluster_fraction share of its
positives are drawn as center + sigma * N(0, I) and the rest come from the
same uniform background as the non-positive rows. Everything is row-normalized
to the unit sphere, so cosine similarity is a plain dot product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DatasetError, EmbeddingDataset, normalize_rows


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 100_000
    dim: int = 32
    num_concepts: int = 20
    prevalence: float = 0.005
    cluster_sigma: float = 0.15
    cluster_fraction: float = 0.8
    rng_seed: int = 0
    eval_n: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.dim < 2 or self.num_concepts < 1:
            raise DatasetError("n >= 1, dim >= 2, num_concepts >= 1 required")
        if not 0.0 < self.prevalence < 1.0:
            raise DatasetError("prevalence must be in (0, 1)")
        if not 0.0 <= self.cluster_fraction <= 1.0:
            raise DatasetError("cluster_fraction must be in [0, 1]")
        per_concept = int(round(self.prevalence * self.n))
        if per_concept * self.num_concepts > self.n:
            raise DatasetError("concept positives exceed corpus size")


def _uniform_sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return normalize_rows(rng.standard_normal((n, dim)), "synthetic")


def _make_split(
    rng: np.random.Generator,
    n: int,
    centers: np.ndarray,
    spec: SyntheticSpec,
    id_prefix: str,
) -> EmbeddingDataset:
    dim = spec.dim
    per_concept = int(round(spec.prevalence * n))
    clustered = int(round(spec.cluster_fraction * per_concept))

    vectors = _uniform_sphere(rng, n, dim)
    concepts: dict[str, np.ndarray] = {}
    # Positive rows are scattered over the index range so that row order
    # carries no concept information (tie-breaks prefer lower rows).
    perm = rng.permutation(n)
    cursor = 0
    for c in range(centers.shape[0]):
        rows = perm[cursor : cursor + per_concept]
        cursor += per_concept
        cluster_rows = rows[:clustered]
        if cluster_rows.size:
            blob = centers[c] + spec.cluster_sigma * rng.standard_normal(
                (cluster_rows.size, dim)
            )
            vectors[cluster_rows] = normalize_rows(blob, "synthetic")
        bits = np.zeros(n, dtype=bool)
        bits[rows] = True
        concepts[f"concept-{c:02d}"] = bits

    ids = [f"{id_prefix}-{i:07d}" for i in range(n)]
    return EmbeddingDataset(vectors=vectors, ids=ids, concepts=concepts)


def make_corpus(spec: SyntheticSpec) -> tuple[EmbeddingDataset, EmbeddingDataset | None]:
    """Build the training corpus and, when spec.eval_n > 0, a matching eval
    split drawn from the same concept centers with fresh noise."""
    root = np.random.default_rng(spec.rng_seed)
    center_rng, train_rng, eval_rng = root.spawn(3)
    centers = _uniform_sphere(center_rng, spec.num_concepts, spec.dim)
    train = _make_split(train_rng, spec.n, centers, spec, "train")
    eval_split = None
    if spec.eval_n > 0:
        eval_split = _make_split(eval_rng, spec.eval_n, centers, spec, "eval")
    return train, eval_split
