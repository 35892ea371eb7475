"""Ranking metrics and run summaries.

average_precision is the non-interpolated form: the mean, over positives, of
precision at each positive's rank. Ties in the score rank in input order
(stable sort), which makes the value reproducible for identical inputs.
"""

from __future__ import annotations

import numpy as np


class MetricsError(ValueError):
    """Undefined metric for the given inputs."""


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """AP of ranking `scores` (descending) against +1/-1 or boolean labels."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise MetricsError(f"scores {scores.shape} vs labels {labels.shape}")
    positive = labels > 0
    if not positive.any():
        raise MetricsError("average precision undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = positive[order]
    ranks = np.flatnonzero(hits) + 1
    cum_hits = np.arange(1, ranks.size + 1)
    return float(np.mean(cum_hits / ranks))


def recall_fraction(found_positives: int, total_positives: int) -> float:
    if total_positives < 1:
        raise MetricsError("recall undefined without positives")
    return found_positives / total_positives


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; at least 3 pairs, variance required on both sides."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape or x.size < 3:
        raise MetricsError("pearson needs >= 3 aligned pairs")
    xd = x - x.mean()
    yd = y - y.mean()
    denom = np.sqrt((xd @ xd) * (yd @ yd))
    if denom == 0.0:
        raise MetricsError("pearson undefined for zero variance")
    return float((xd @ yd) / denom)


def summarize_cell(
    final_rows: list[dict], total_positives: dict[str, int]
) -> dict[str, float]:
    """Aggregate one strategy/mode cell from its final-round JSONL rows.

    mAP is averaged over concepts within a repetition; mean/std are then taken
    across repetitions. Recall likewise. pool_frac_mean averages the final
    pool fraction over every run in the cell.
    """
    if not final_rows:
        raise MetricsError("no rows to summarize")
    reps = sorted({row["rep"] for row in final_rows})
    map_per_rep = []
    recall_per_rep = []
    for rep in reps:
        rows = [r for r in final_rows if r["rep"] == rep]
        # runs without an eval split serialize ap as null; propagate as NaN
        aps = [np.nan if r["ap"] is None else r["ap"] for r in rows]
        map_per_rep.append(float(np.mean(aps)))
        recall_per_rep.append(
            float(
                np.mean(
                    [
                        recall_fraction(r["positives"], total_positives[r["concept"]])
                        for r in rows
                    ]
                )
            )
        )
    map_mean = float(np.mean(map_per_rep))
    map_std = float(np.std(map_per_rep))
    return {
        "mAP_mean": None if np.isnan(map_mean) else map_mean,
        "mAP_std": None if np.isnan(map_std) else map_std,
        "recall_mean": float(np.mean(recall_per_rep)),
        "recall_std": float(np.std(recall_per_rep)),
        "pool_frac_mean": float(np.mean([r["pool_frac"] for r in final_rows])),
    }
