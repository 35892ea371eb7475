"""Geometric simulator for neighborhood-constrained boundary search.

Models a linearly separable labeling task on a convex domain where queries
are answered by the sign of a hidden unit normal. A handful of chains walk
from their seed points toward the oppositely labeled region, each round
querying the point of the current chain's minimum-margin separator that the
step rule allows: either any domain point within distance delta of the chain
point, or the exact projection onto the separating hyperplane.

The quantity of interest is rho, the distance from a chain's least-certain
point to the convex hull of opposite labels: under the delta-step rule it
first shrinks linearly (one delta per round) and then halves each round once
within 2*delta, while the projection rule halves from the start. A trace of
rho and the fitted separator error per round exposes both regimes.

Margins and fits reduce to one primitive, projecting a point onto a convex
hull, solved by conditional-gradient iterations with away steps and an exact
line search. The duality gap certifies the result: gap g bounds the error of
the squared half-distance, so distances are accurate to about g over the
distance itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

TRACE_COLUMNS = ("round", "chain", "rho", "w_err", "queries_total")

# below this point-to-hull distance the classes are treated as touching
_SEPARATION_FLOOR = 1e-7


class TheoryError(ValueError):
    """Invalid instance or simulation parameter."""


class NonSeparableError(TheoryError):
    """The requested separator does not exist (point inside the hull)."""


# ---- domains ------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise TheoryError("box bounds must be matching 1-D arrays")
        if not (lo < hi).all():
            raise TheoryError("box must have positive extent on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool((x >= self.lower - tol).all() and (x <= self.upper + tol).all())


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=np.float64)
        if c.ndim != 1:
            raise TheoryError("ball center must be a 1-D array")
        if not self.radius > 0:
            raise TheoryError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", c)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)


Domain = Box | Ball


# ---- convex-hull projection ------------------------------------------------------


@dataclass(frozen=True)
class HullProjection:
    point: np.ndarray
    gap: float
    iterations: int


def project_to_hull(
    point: np.ndarray,
    hull: np.ndarray,
    gap_tol: float = 1e-8,
    max_iters: int = 50_000,
) -> HullProjection:
    """Closest point of conv(hull rows) to `point`, certified by duality gap.

    Conditional-gradient iterations with away steps and exact line search on
    the simplex of hull weights. The returned gap bounds the suboptimality of
    the squared half-distance, so it certifies the distance value itself to
    roughly gap / distance.
    """
    p = np.asarray(point, dtype=np.float64)
    vertices = np.asarray(hull, dtype=np.float64)
    if vertices.ndim != 2 or vertices.shape[0] < 1:
        raise TheoryError("hull needs at least one point")
    if p.shape != (vertices.shape[1],):
        raise TheoryError(
            f"point dimension {p.shape} does not match hull {vertices.shape}"
        )
    start = int(np.argmin(((vertices - p) ** 2).sum(axis=1)))
    weights = {start: 1.0}
    x = vertices[start].copy()
    gap = 0.0
    iteration = 0
    for iteration in range(1, max_iters + 1):
        g = x - p
        scores = vertices @ g
        fw = int(np.argmin(scores))
        gap = float(x @ g - scores[fw])
        if gap <= gap_tol:
            break
        away = max(weights, key=lambda j: scores[j])
        away_gain = float(scores[away] - x @ g)
        use_away = away_gain > gap and weights[away] < 1.0
        if use_away:
            direction = x - vertices[away]
            t_max = weights[away] / (1.0 - weights[away])
        else:
            direction = vertices[fw] - x
            t_max = 1.0
        dd = float(direction @ direction)
        if dd <= 0.0:
            break
        t = min(max(-float(g @ direction) / dd, 0.0), t_max)
        if t <= 0.0:
            break
        if use_away:
            # push mass off the worst active vertex
            for j in list(weights):
                weights[j] *= 1.0 + t
            weights[away] -= t
            if weights[away] < 1e-15:
                del weights[away]
        else:
            # blend all weights toward the best vertex
            for j in list(weights):
                weights[j] *= 1.0 - t
                if weights[j] < 1e-15:
                    del weights[j]
            weights[fw] = weights.get(fw, 0.0) + t
        x = x + t * direction
        if iteration % 256 == 0:
            # rebuild from weights to cancel accumulated drift
            idx = np.array(list(weights))
            wts = np.array([weights[int(j)] for j in idx])
            wts /= wts.sum()
            weights = dict(zip(idx.tolist(), wts.tolist()))
            x = wts @ vertices[idx]
    return HullProjection(point=x, gap=gap, iterations=iteration)


# ---- separators ---------------------------------------------------------------------


@dataclass(frozen=True)
class MarginResult:
    """Separator of one point from the hull of its opposite class.

    The hyperplane is {z : w.z = b} with unit w pointing from the point
    toward the hull; margin is half the point-to-hull distance and
    support_point is the hull point attaining it.
    """

    w: np.ndarray
    b: float
    margin: float
    support_point: np.ndarray


def max_margin_separator(
    point: np.ndarray, opposite: np.ndarray, gap_tol: float = 1e-8
) -> MarginResult:
    """Maximum-margin hyperplane between a single point and a point set."""
    p = np.asarray(point, dtype=np.float64)
    proj = project_to_hull(p, opposite, gap_tol=gap_tol)
    diff = proj.point - p
    dist = float(np.linalg.norm(diff))
    if dist < _SEPARATION_FLOOR:
        raise NonSeparableError(
            f"point lies within {dist:.2e} of the opposite hull: non-separable"
        )
    w = diff / dist
    b = (float(proj.point @ proj.point) - float(p @ p)) / (2.0 * dist)
    return MarginResult(w=w, b=b, margin=dist / 2.0, support_point=proj.point)


def fit_homogeneous_separator(
    points: np.ndarray, labels: np.ndarray, gap_tol: float = 1e-12
) -> np.ndarray:
    """Unit normal through the origin maximizing the worst signed margin.

    Equivalent to the direction of the minimum-norm point of the hull of
    label-signed points; unique whenever that hull excludes the origin. The
    tight default gap keeps the normal's angular error around
    sqrt(2 * gap) / margin, far below the simulation's accuracy targets.
    """
    pts = np.asarray(points, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if pts.ndim != 2 or pts.shape[0] != y.size:
        raise TheoryError(f"points {pts.shape} do not align with labels {y.shape}")
    if not ((y == 1).any() and (y == -1).any()):
        raise TheoryError("need at least one point of each label")
    signed = pts * y[:, None]
    proj = project_to_hull(np.zeros(pts.shape[1]), signed, gap_tol=gap_tol)
    norm = float(np.linalg.norm(proj.point))
    if norm < _SEPARATION_FLOOR:
        raise NonSeparableError(
            "origin lies in the signed hull: no homogeneous separator"
        )
    return proj.point / norm


# ---- problem instances -----------------------------------------------------------------


@dataclass(frozen=True)
class GeometryInstance:
    """A separable labeling task: hidden unit normal, domain, seeds, step radius.

    chain_seeds holds one starting point per chain, shape (d-1, d) for
    dimension d; extra_points are additional pre-labeled points. Labels are
    always derived from w_star (boundary counts as positive), so every chain
    seed must see at least one oppositely labeled point among the rest.
    """

    w_star: np.ndarray
    domain: Domain
    delta: float
    chain_seeds: np.ndarray
    extra_points: np.ndarray
    epsilon: float

    def __post_init__(self) -> None:
        w = np.asarray(self.w_star, dtype=np.float64)
        if w.ndim != 1 or w.size < 2:
            raise TheoryError("w_star must be a 1-D vector of dimension >= 2")
        if abs(np.linalg.norm(w) - 1.0) > 1e-9:
            raise TheoryError("w_star must be unit-norm")
        seeds = np.asarray(self.chain_seeds, dtype=np.float64)
        extra = np.asarray(self.extra_points, dtype=np.float64).reshape(-1, w.size)
        d = w.size
        if seeds.shape != (d - 1, d):
            raise TheoryError(
                f"chain_seeds must be shape ({d - 1}, {d}), got {seeds.shape}"
            )
        if not self.delta > 0:
            raise TheoryError(f"delta must be positive, got {self.delta}")
        if not self.epsilon > 0:
            raise TheoryError(f"epsilon must be positive, got {self.epsilon}")
        for x in np.vstack([seeds, extra]):
            if not self.domain.contains(x):
                raise TheoryError(f"labeled point {x} lies outside the domain")
        object.__setattr__(self, "w_star", w)
        object.__setattr__(self, "chain_seeds", seeds)
        object.__setattr__(self, "extra_points", extra)
        labels = [self.label_of(x) for x in np.vstack([seeds, extra])]
        for i, seed in enumerate(seeds):
            y = self.label_of(seed)
            if not any(lab == -y for lab in labels):
                raise TheoryError(
                    f"chain seed {i} has no oppositely labeled companion"
                )

    @property
    def dim(self) -> int:
        return int(self.w_star.size)

    @property
    def num_chains(self) -> int:
        return self.dim - 1

    def label_of(self, x: np.ndarray) -> int:
        return 1 if float(self.w_star @ np.asarray(x, dtype=np.float64)) >= 0 else -1


def make_two_phase_instance(
    d: int = 2, gamma: float = 1.0, delta: float = 0.05, epsilon: float = 0.01
) -> GeometryInstance:
    """Instance whose trace shows a long linear phase before the halving phase.

    Chain i starts at gamma * e1 + e_{i+1}; its only opposite-label company
    sits at -2 * gamma * e1 + e_{i+1}. The asymmetry keeps the initial fit
    tilted away from e1, so convergence genuinely requires walking the
    chains to the boundary: about gamma/delta linear rounds, then halving.
    """
    if d < 2:
        raise TheoryError(f"dimension must be >= 2, got {d}")
    if not gamma > 0:
        raise TheoryError(f"gamma must be positive, got {gamma}")
    eye = np.eye(d)
    seeds = gamma * eye[0] + eye[1:]
    extra = -2.0 * gamma * eye[0] + eye[1:]
    half_width = 2.0 * gamma + 2.0
    return GeometryInstance(
        w_star=eye[0],
        domain=Box(lower=-half_width * np.ones(d), upper=half_width * np.ones(d)),
        delta=delta,
        chain_seeds=seeds,
        extra_points=extra,
        epsilon=epsilon,
    )


def make_axis_seed_instance(
    d: int, m: float | None = None, delta: float = 0.5, epsilon: float = 0.01
) -> GeometryInstance:
    """Well-spread seeds: e1 + m * e_{i+1} against -e1 + m * e_{i+1}.

    With m >= 6 * sqrt(d-1) the seed directions stay well conditioned, which
    is the regime the convergence analysis assumes.
    """
    if d < 2:
        raise TheoryError(f"dimension must be >= 2, got {d}")
    if m is None:
        m = 6.0 * float(np.sqrt(d - 1))
    eye = np.eye(d)
    seeds = eye[0] + m * eye[1:]
    extra = -eye[0] + m * eye[1:]
    radius = float(np.sqrt(1.0 + m * m)) + 1.0
    return GeometryInstance(
        w_star=eye[0],
        domain=Ball(center=np.zeros(d), radius=radius),
        delta=delta,
        chain_seeds=seeds,
        extra_points=extra,
        epsilon=epsilon,
    )


# ---- the simulation ---------------------------------------------------------------------


Variant = Literal["nn-graph", "project-anywhere"]
_VARIANTS = ("nn-graph", "project-anywhere")


@dataclass
class TheoryTrace:
    """Per-round, per-chain measurements of one simulation run."""

    rows: list[dict] = field(default_factory=list)
    chain_points: list[np.ndarray] = field(default_factory=list)
    w_hat: np.ndarray | None = None
    converged: bool = False
    rounds: int = 0

    @property
    def queries_total(self) -> int:
        return self.rows[-1]["queries_total"] if self.rows else 0


def _nearest_pool_target(
    pool: np.ndarray, anchor: np.ndarray, result: MarginResult, radius: float | None
) -> np.ndarray:
    """Pool point closest to the hyperplane, optionally within the step radius."""
    candidates = pool
    if radius is not None:
        within = np.linalg.norm(pool - anchor, axis=1) <= radius
        if not within.any():
            raise TheoryError(
                "no pool point within the step radius; densify the pool"
            )
        candidates = pool[within]
    dists = np.abs(candidates @ result.w - result.b)
    return candidates[int(np.argmin(dists))]


def run_modified_seals(
    instance: GeometryInstance,
    variant: Variant = "nn-graph",
    max_rounds: int = 1000,
    pool: np.ndarray | None = None,
) -> TheoryTrace:
    """Run the chain walk until the fitted normal is within epsilon of w_star.

    Each round every chain computes margins for all its points against the
    round-start opposite-label set, walks from its minimum-margin point
    toward that point's hull projection (delta-capped for "nn-graph", the
    exact midpoint for "project-anywhere"), and queries the result. New
    labels merge between rounds; the homogeneous separator is refit each
    round. A run that exhausts max_rounds is returned with converged=False.

    The seed set is fitted before any querying: an instance already within
    epsilon returns a converged zero-round trace.

    An optional finite pool replaces exact targets with the nearest pool
    point, for qualitative comparison with sampled data only.
    """
    if variant not in _VARIANTS:
        raise TheoryError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    if max_rounds < 1:
        raise TheoryError(f"max_rounds must be >= 1, got {max_rounds}")
    if pool is not None:
        pool = np.asarray(pool, dtype=np.float64).reshape(-1, instance.dim)

    points: list[np.ndarray] = [np.array(x) for x in instance.chain_seeds]
    points += [np.array(x) for x in instance.extra_points]
    labels = [instance.label_of(x) for x in points]
    chains: list[list[int]] = [[i] for i in range(instance.num_chains)]
    by_label = {1: [], -1: []}
    for i, y in enumerate(labels):
        by_label[y].append(i)

    # margins keyed by (point id, opposite-set size): the labeled set only
    # grows, so an unchanged size means an unchanged set
    margin_memo: dict[tuple[int, int], MarginResult] = {}

    trace = TheoryTrace()
    trace.w_hat = fit_homogeneous_separator(np.array(points), np.array(labels))
    if float(np.linalg.norm(trace.w_hat - instance.w_star)) <= instance.epsilon:
        trace.converged = True
        trace.chain_points = [np.array([points[j] for j in chain]) for chain in chains]
        return trace

    queries = 0
    for round_index in range(1, max_rounds + 1):
        snapshot = {1: len(by_label[1]), -1: len(by_label[-1])}
        additions: list[tuple[int, np.ndarray, int]] = []
        rhos: list[float] = []
        for chain_index, chain in enumerate(chains):
            best: MarginResult | None = None
            best_pid = -1
            for pid in chain:
                y = labels[pid]
                n_opp = snapshot[-y]
                key = (pid, n_opp)
                result = margin_memo.get(key)
                if result is None:
                    opposite = np.array(
                        [points[j] for j in by_label[-y][:n_opp]]
                    )
                    result = max_margin_separator(points[pid], opposite)
                    margin_memo[key] = result
                if best is None or result.margin < best.margin:
                    best = result
                    best_pid = pid
            anchor = points[best_pid]
            rho = 2.0 * best.margin
            rhos.append(rho)
            direction = (best.support_point - anchor) / rho
            if variant == "nn-graph":
                step = min(instance.delta, rho / 2.0)
            else:
                step = rho / 2.0
            target = anchor + step * direction
            if pool is not None:
                radius = instance.delta if variant == "nn-graph" else None
                target = _nearest_pool_target(pool, anchor, best, radius)
            additions.append((chain_index, target, instance.label_of(target)))

        for chain_index, target, y in additions:
            pid = len(points)
            points.append(target)
            labels.append(y)
            by_label[y].append(pid)
            chains[chain_index].append(pid)
            queries += 1

        w_hat = fit_homogeneous_separator(np.array(points), np.array(labels))
        w_err = float(np.linalg.norm(w_hat - instance.w_star))
        for chain_index, rho in enumerate(rhos):
            trace.rows.append(
                {
                    "round": round_index,
                    "chain": chain_index,
                    "rho": rho,
                    "w_err": w_err,
                    "queries_total": queries,
                }
            )
        trace.w_hat = w_hat
        trace.rounds = round_index
        if w_err <= instance.epsilon:
            trace.converged = True
            break

    trace.chain_points = [np.array([points[j] for j in chain]) for chain in chains]
    return trace


def write_trace_csv(trace: TheoryTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        for row in trace.rows:
            writer.writerow(row)
