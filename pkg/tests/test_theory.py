"""Geometry simulator tests.

Hull projections are checked against a constrained-QP oracle (scipy SLSQP
over simplex weights) and the homogeneous fit against a fine angular grid
in 2-D. Trace behavior is asserted directly: the step rule shrinks rho by
at least delta per round while rho >= 2*delta and halves it below that,
and query counts scale linearly in gamma/delta for the stepping variant
but only logarithmically for the projecting one.
"""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from seals.theory import (
    TRACE_COLUMNS,
    Ball,
    Box,
    GeometryInstance,
    NonSeparableError,
    TheoryError,
    fit_homogeneous_separator,
    make_axis_seed_instance,
    make_two_phase_instance,
    max_margin_separator,
    project_to_hull,
    run_modified_seals,
    write_trace_csv,
)

# solver slack on top of certified distances
TOL = 1e-6


def qp_project(point, hull):
    """Oracle: distance from point to conv(hull) via simplex-constrained QP."""
    m = hull.shape[0]

    def objective(alpha):
        diff = alpha @ hull - point
        return 0.5 * float(diff @ diff)

    def gradient(alpha):
        return hull @ (alpha @ hull - point)

    best = None
    for start in range(min(m, 4)):
        alpha0 = np.full(m, 1e-9)
        alpha0[start] = 1.0
        alpha0 /= alpha0.sum()
        res = minimize(
            objective,
            alpha0,
            jac=gradient,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * m,
            constraints=[{"type": "eq", "fun": lambda a: a.sum() - 1.0}],
            options={"maxiter": 500, "ftol": 1e-14},
        )
        if best is None or res.fun < best.fun:
            best = res
    return best.x @ hull


def rho_series(trace, chain=0):
    return [row["rho"] for row in trace.rows if row["chain"] == chain]


# ---- hull projection -------------------------------------------------------------


def test_projection_of_singleton_is_that_point():
    proj = project_to_hull(np.array([3.0, -1.0]), np.array([[0.5, 0.5]]))
    np.testing.assert_allclose(proj.point, [0.5, 0.5])
    assert proj.gap <= 1e-8


def test_projection_onto_containing_hull_reaches_the_point():
    hull = np.array([[1.0, 0.0], [-1.0, 1.0], [-1.0, -1.0]])
    proj = project_to_hull(np.zeros(2), hull)
    # at zero distance the gap only certifies sqrt(2 * gap) closeness
    assert np.linalg.norm(proj.point) < 2e-4


@pytest.mark.parametrize("dim", [2, 3])
def test_projection_matches_qp_oracle(dim):
    rng = np.random.default_rng(20 + dim)
    for _ in range(10):
        hull = rng.normal(size=(12, dim))
        point = rng.normal(size=dim) * 3.0
        proj = project_to_hull(point, hull)
        oracle = qp_project(point, hull)
        dist = np.linalg.norm(proj.point - point)
        dist_oracle = np.linalg.norm(oracle - point)
        assert dist == pytest.approx(dist_oracle, abs=TOL)


def test_projection_shape_errors():
    with pytest.raises(TheoryError, match="at least one"):
        project_to_hull(np.zeros(2), np.empty((0, 2)))
    with pytest.raises(TheoryError, match="dimension"):
        project_to_hull(np.zeros(3), np.zeros((4, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_projection_never_beaten_by_convex_combinations(seed):
    rng = np.random.default_rng(seed)
    m, dim = int(rng.integers(1, 9)), int(rng.integers(2, 5))
    hull = rng.normal(size=(m, dim)) * rng.uniform(0.5, 3.0)
    point = rng.normal(size=dim) * 2.0
    proj = project_to_hull(point, hull)
    dist = np.linalg.norm(proj.point - point)
    weights = rng.dirichlet(np.ones(m), size=200)
    combos = weights @ hull
    competitor = np.linalg.norm(combos - point, axis=1).min()
    assert dist <= competitor + 1e-8


# ---- max-margin separator -----------------------------------------------------------


def test_separator_between_point_and_singleton_is_the_bisector():
    res = max_margin_separator(np.array([2.0, 0.0]), np.array([[-1.0, 0.0]]))
    np.testing.assert_allclose(res.w, [-1.0, 0.0])
    assert res.b == pytest.approx(-0.5)
    assert res.margin == pytest.approx(1.5)
    np.testing.assert_allclose(res.support_point, [-1.0, 0.0])
    # the hyperplane is the vertical line through (0.5, anything)
    for t in (0.0, 3.0, -7.0):
        assert res.w @ np.array([0.5, t]) == pytest.approx(res.b)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_separator_margin_is_half_the_gap_to_a_singleton(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 6))
    point = rng.normal(size=dim)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    span = rng.uniform(0.5, 4.0)
    other = point + span * direction
    res = max_margin_separator(point, other[None, :])
    assert res.margin == pytest.approx(span / 2.0, abs=TOL)
    np.testing.assert_allclose(res.w, direction, atol=TOL)
    np.testing.assert_allclose(res.support_point, other, atol=TOL)


def test_separator_margin_matches_qp_oracle_in_3d():
    rng = np.random.default_rng(7)
    for _ in range(8):
        hull = rng.normal(size=(20, 3))
        point = rng.normal(size=3) + np.array([6.0, 0.0, 0.0])
        res = max_margin_separator(point, hull)
        oracle_dist = np.linalg.norm(qp_project(point, hull) - point)
        assert res.margin == pytest.approx(oracle_dist / 2.0, abs=TOL)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_separator_splits_point_and_hull_evenly(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 5))
    hull = rng.normal(size=(int(rng.integers(1, 10)), dim))
    point = rng.normal(size=dim) + 8.0
    res = max_margin_separator(point, hull)
    assert np.linalg.norm(res.w) == pytest.approx(1.0)
    assert res.margin == pytest.approx(
        np.linalg.norm(res.support_point - point) / 2.0
    )
    # the point sits margin below the plane, every hull vertex margin above
    assert res.w @ point - res.b == pytest.approx(-res.margin, abs=TOL)
    assert (hull @ res.w - res.b).min() >= res.margin - TOL


def test_separator_rejects_point_inside_hull():
    hull = np.array([[1.0, 0.0], [-1.0, 1.0], [-1.0, -1.0]])
    with pytest.raises(NonSeparableError, match="non-separable"):
        max_margin_separator(hull.mean(axis=0), hull)


# ---- homogeneous fit ------------------------------------------------------------------


def test_fit_on_a_symmetric_pair_is_the_axis():
    points = np.array([[1.0, 0.0], [-1.0, 0.0]])
    w = fit_homogeneous_separator(points, np.array([1, -1]))
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-9)


def test_fit_matches_fine_angular_grid_in_2d():
    rng = np.random.default_rng(11)
    thetas = np.linspace(0.0, 2.0 * np.pi, 200_000, endpoint=False)
    grid = np.column_stack([np.cos(thetas), np.sin(thetas)])
    for _ in range(5):
        w_true = rng.normal(size=2)
        w_true /= np.linalg.norm(w_true)
        points = rng.normal(size=(30, 2)) * 2.0
        points = points[np.abs(points @ w_true) > 0.2]
        labels = np.where(points @ w_true >= 0, 1, -1)
        w = fit_homogeneous_separator(points, labels)
        signed = points * labels[:, None]
        grid_margins = (grid @ signed.T).min(axis=1)
        best = int(np.argmax(grid_margins))
        angle_fit = math.atan2(w[1], w[0])
        diff = abs(angle_fit - thetas[best]) % (2.0 * np.pi)
        assert min(diff, 2.0 * np.pi - diff) <= 1e-3
        assert (signed @ w).min() >= grid_margins[best] - 1e-9


def test_fit_margin_capped_by_the_straddling_pair():
    # points sandwiching the boundary cap the achievable margin
    a, b = 0.3, 0.08
    points = np.array([[a, 1.0], [-b, 1.0], [2.0, -1.0], [-2.0, 1.5]])
    labels = np.array([1, -1, 1, -1])
    w = fit_homogeneous_separator(points, labels)
    achieved = (points * labels[:, None] @ w).min()
    assert 0.0 < achieved <= max(a, b)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_fit_beats_every_random_direction(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 5))
    w_true = rng.normal(size=dim)
    w_true /= np.linalg.norm(w_true)
    points = rng.normal(size=(20, dim))
    points = points[np.abs(points @ w_true) > 0.3]
    labels = np.where(points @ w_true >= 0, 1, -1)
    if not ((labels == 1).any() and (labels == -1).any()):
        return
    w = fit_homogeneous_separator(points, labels)
    signed = points * labels[:, None]
    achieved = (signed @ w).min()
    others = rng.normal(size=(300, dim))
    others /= np.linalg.norm(others, axis=1, keepdims=True)
    assert achieved >= (others @ signed.T).min(axis=1).max() - 1e-7


def test_fit_input_validation():
    points = np.array([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(TheoryError, match="each label"):
        fit_homogeneous_separator(points, np.array([1, 1]))
    with pytest.raises(TheoryError, match="align"):
        fit_homogeneous_separator(points, np.array([1, -1, 1]))


def test_fit_rejects_coincident_opposite_labels():
    points = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(NonSeparableError, match="homogeneous"):
        fit_homogeneous_separator(points, np.array([1, -1]))


# ---- domains and instances ------------------------------------------------------------


def test_box_membership_and_validation():
    box = Box(lower=np.array([-1.0, -1.0]), upper=np.array([1.0, 2.0]))
    assert box.contains(np.array([0.0, 1.5]))
    assert box.contains(np.array([1.0 + 1e-12, 0.0]))
    assert not box.contains(np.array([1.1, 0.0]))
    with pytest.raises(TheoryError, match="extent"):
        Box(lower=np.array([0.0, 0.0]), upper=np.array([1.0, 0.0]))
    with pytest.raises(TheoryError, match="matching"):
        Box(lower=np.zeros(2), upper=np.ones(3))


def test_ball_membership_and_validation():
    ball = Ball(center=np.zeros(3), radius=2.0)
    assert ball.contains(np.array([2.0, 0.0, 0.0]))
    assert not ball.contains(np.array([2.01, 0.0, 0.0]))
    with pytest.raises(TheoryError, match="radius"):
        Ball(center=np.zeros(2), radius=0.0)


def test_instance_validation():
    eye = np.eye(2)
    box = Box(lower=-5.0 * np.ones(2), upper=5.0 * np.ones(2))
    good = dict(
        w_star=eye[0],
        domain=box,
        delta=0.1,
        chain_seeds=np.array([[1.0, 1.0]]),
        extra_points=np.array([[-1.0, 1.0]]),
        epsilon=0.01,
    )
    GeometryInstance(**good)
    with pytest.raises(TheoryError, match="unit-norm"):
        GeometryInstance(**{**good, "w_star": 2.0 * eye[0]})
    with pytest.raises(TheoryError, match="shape"):
        GeometryInstance(**{**good, "chain_seeds": np.array([[1.0, 1.0], [1.0, 2.0]])})
    with pytest.raises(TheoryError, match="delta"):
        GeometryInstance(**{**good, "delta": 0.0})
    with pytest.raises(TheoryError, match="epsilon"):
        GeometryInstance(**{**good, "epsilon": -1.0})
    with pytest.raises(TheoryError, match="outside"):
        GeometryInstance(**{**good, "extra_points": np.array([[-9.0, 1.0]])})
    with pytest.raises(TheoryError, match="companion"):
        GeometryInstance(**{**good, "extra_points": np.array([[2.0, 1.0]])})


def test_two_phase_instance_has_a_tilted_initial_fit():
    inst = make_two_phase_instance(d=2, gamma=1.0, delta=0.05, epsilon=0.01)
    assert inst.label_of(inst.chain_seeds[0]) == 1
    assert inst.label_of(inst.extra_points[0]) == -1
    points = np.vstack([inst.chain_seeds, inst.extra_points])
    labels = np.array([inst.label_of(x) for x in points])
    w0 = fit_homogeneous_separator(points, labels)
    # convergence must require walking, not fall out of the seed fit
    assert np.linalg.norm(w0 - inst.w_star) > 0.1


def test_boundary_points_count_as_positive():
    inst = make_two_phase_instance(d=2)
    assert inst.label_of(np.array([0.0, 1.0])) == 1
    assert inst.label_of(np.array([-1e-12, 1.0])) == -1


def test_axis_seed_layout_is_separable():
    inst = make_axis_seed_instance(d=5)
    points = np.vstack([inst.chain_seeds, inst.extra_points])
    labels = np.array([inst.label_of(x) for x in points])
    assert list(labels) == [1] * 4 + [-1] * 4
    w = fit_homogeneous_separator(points, labels)
    assert ((points * labels[:, None]) @ w).min() > 0.5
    # each seed faces its own companion across the boundary at distance 2
    res = max_margin_separator(inst.chain_seeds[0], inst.extra_points)
    assert res.margin == pytest.approx(1.0, abs=TOL)
    np.testing.assert_allclose(res.support_point, inst.extra_points[0], atol=1e-4)


# ---- simulation traces --------------------------------------------------------------


@pytest.mark.parametrize("delta", [0.05, 0.1])
def test_rho_drops_by_delta_then_halves(delta):
    inst = make_two_phase_instance(d=2, gamma=1.0, delta=delta, epsilon=0.01)
    trace = run_modified_seals(inst, "nn-graph", max_rounds=500)
    assert trace.converged
    rhos = rho_series(trace)
    assert rhos[0] == pytest.approx(3.0, abs=TOL)
    assert rhos[1] == pytest.approx(3.0 - delta, abs=TOL)
    for prev, cur in zip(rhos, rhos[1:]):
        if prev >= 2.0 * delta:
            assert cur <= prev - delta + 1e-7
        else:
            assert cur <= prev / 2.0 + 1e-7
    errs = [row["w_err"] for row in trace.rows]
    assert errs[-1] <= inst.epsilon
    assert np.linalg.norm(trace.w_hat - inst.w_star) == errs[-1]


@pytest.mark.parametrize(
    "d,gamma,delta", [(2, 0.5, 0.05), (2, 2.0, 0.1), (3, 1.0, 0.05)]
)
def test_chains_never_stray_past_their_first_margin(d, gamma, delta):
    inst = make_two_phase_instance(d=d, gamma=gamma, delta=delta, epsilon=0.01)
    trace = run_modified_seals(inst, "nn-graph", max_rounds=1000)
    assert trace.converged
    for chain in range(inst.num_chains):
        gamma_i = rho_series(trace, chain)[0] / 2.0
        points = trace.chain_points[chain]
        drift = np.linalg.norm(points - points[0], axis=1).max()
        assert drift <= gamma_i + 2.0 * delta + 1e-9


def test_projecting_variant_halves_from_the_start():
    inst = make_two_phase_instance(d=2, gamma=1.0, delta=0.05, epsilon=1e-3)
    trace = run_modified_seals(inst, "project-anywhere", max_rounds=200)
    assert trace.converged
    rhos = rho_series(trace)
    for prev, cur in zip(rhos, rhos[1:]):
        assert cur <= prev / 2.0 + 1e-7
    assert trace.queries_total <= 12


def test_query_counts_linear_versus_logarithmic():
    counts = {}
    for gamma in (0.5, 2.0):
        inst = make_two_phase_instance(d=2, gamma=gamma, delta=0.02, epsilon=0.01)
        nn = run_modified_seals(inst, "nn-graph", max_rounds=2000)
        pa = run_modified_seals(inst, "project-anywhere", max_rounds=2000)
        assert nn.converged and pa.converged
        counts[gamma] = (nn.queries_total, pa.queries_total)
    # quadrupling gamma/delta shows up linearly in one, barely in the other
    assert counts[2.0][0] - counts[0.5][0] >= 50
    assert counts[2.0][1] - counts[0.5][1] <= 3


def test_lockstep_chains_each_query_every_round():
    inst = make_two_phase_instance(d=3, gamma=1.0, delta=0.05, epsilon=0.01)
    trace = run_modified_seals(inst, "nn-graph", max_rounds=500)
    assert trace.converged
    per_round = {}
    for row in trace.rows:
        per_round.setdefault(row["round"], []).append(row["chain"])
    for chains in per_round.values():
        assert sorted(chains) == [0, 1]
    assert trace.queries_total == 2 * trace.rounds


def test_epsilon_wider_than_initial_error_makes_no_queries():
    # the symmetric pair fits to w_star exactly, so no walking is needed
    inst = GeometryInstance(
        w_star=np.array([1.0, 0.0]),
        domain=Box(lower=-3.0 * np.ones(2), upper=3.0 * np.ones(2)),
        delta=0.1,
        chain_seeds=np.array([[1.0, 1.0]]),
        extra_points=np.array([[-1.0, 1.0]]),
        epsilon=0.5,
    )
    trace = run_modified_seals(inst, "nn-graph", max_rounds=100)
    assert trace.converged
    assert trace.rounds == 0
    assert trace.rows == []
    assert trace.queries_total == 0
    assert trace.chain_points[0].shape == (1, 2)


def test_non_converged_run_is_flagged_not_raised():
    inst = make_two_phase_instance(d=2, gamma=2.0, delta=0.02, epsilon=0.01)
    trace = run_modified_seals(inst, "nn-graph", max_rounds=3)
    assert not trace.converged
    assert trace.rounds == 3
    assert len(trace.rows) == 3


def test_runner_validation():
    inst = make_two_phase_instance()
    with pytest.raises(TheoryError, match="variant"):
        run_modified_seals(inst, "projective")
    with pytest.raises(TheoryError, match="max_rounds"):
        run_modified_seals(inst, "nn-graph", max_rounds=0)


def test_margin_results_are_reused_across_rounds(monkeypatch):
    import seals.theory as theory

    calls = {"n": 0}
    original = theory.max_margin_separator

    def counting(point, opposite, gap_tol=1e-8):
        calls["n"] += 1
        return original(point, opposite, gap_tol)

    monkeypatch.setattr(theory, "max_margin_separator", counting)
    inst = make_two_phase_instance(d=2, gamma=1.0, delta=0.05, epsilon=0.01)
    trace = run_modified_seals(inst, "nn-graph", max_rounds=500)
    assert trace.converged
    # without reuse every round recomputes its whole chain: ~rounds^2/2 calls
    naive = trace.rounds * (trace.rounds + 1) // 2
    assert calls["n"] < naive / 3
    assert calls["n"] <= 3 * trace.rounds + 10


def test_runs_are_deterministic():
    inst = make_two_phase_instance(d=2, gamma=0.5, delta=0.05, epsilon=0.01)
    a = run_modified_seals(inst, "nn-graph", max_rounds=500)
    b = run_modified_seals(inst, "nn-graph", max_rounds=500)
    assert a.rows == b.rows


def test_finite_pool_mode_queries_pool_points_only():
    rng = np.random.default_rng(3)
    pool = rng.uniform(-4.0, 4.0, size=(4000, 2))
    inst = make_two_phase_instance(d=2, gamma=1.0, delta=0.3, epsilon=0.05)
    trace = run_modified_seals(inst, "nn-graph", max_rounds=200, pool=pool)
    queried = trace.chain_points[0][1:]
    for q in queried:
        assert (np.linalg.norm(pool - q, axis=1) < 1e-12).any()
    rhos = rho_series(trace)
    assert rhos[-1] < rhos[0]


def test_finite_pool_with_no_reachable_point_raises():
    pool = np.full((5, 2), 40.0)  # far outside every delta ball
    inst = make_two_phase_instance(d=2, gamma=1.0, delta=0.1, epsilon=0.01)
    with pytest.raises(TheoryError, match="step radius"):
        run_modified_seals(inst, "nn-graph", max_rounds=5, pool=pool)


def test_trace_rows_and_csv_round_trip(tmp_path):
    inst = make_two_phase_instance(d=2, gamma=0.5, delta=0.1, epsilon=0.01)
    trace = run_modified_seals(inst, "nn-graph", max_rounds=200)
    assert all(tuple(row) == TRACE_COLUMNS for row in trace.rows)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(trace.rows)
    assert rows[0]["round"] == "1"
    for parsed, row in zip(rows, trace.rows):
        assert float(parsed["rho"]) == pytest.approx(row["rho"])
        assert int(parsed["queries_total"]) == row["queries_total"]
