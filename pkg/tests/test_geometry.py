import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxweight_lab.errors import InvalidParameterError, PreconditionError, SizeError
from maxweight_lab.geometry import (CRITICAL_TOL, active_constraint_rank, algd_objective,
                                    dual_extreme_points, is_feasible_for, lift_state, lifting_map,
                                    load, load_iq, solve_algd, workload_map, SscGeometry)
from maxweight_lab.lyapunov import L_tilde
from maxweight_lab.model import ScheduleSet, build_iq_schedule_set

from oracles import ltilde_projection, random_feasible_points

E2 = ScheduleSet([[1, 0], [0, 1]], 2)
IQ2 = build_iq_schedule_set(2)
IQ2_VERTICES = {(1, 1, 0, 0), (1, 0, 1, 0), (0, 1, 0, 1), (0, 0, 1, 1)}


def geometry_from(points, M):
    pts = np.asarray(points, float)
    return SscGeometry(pts, np.zeros(M), ScheduleSet(np.eye(M, dtype=int), M))


def test_load_examples():
    res = load([0.3, 0.4], E2)
    assert res.rho == pytest.approx(0.7, abs=1e-9)
    assert np.all(res.covering(E2) >= np.array([0.3, 0.4]) - 1e-9)
    assert load([0, 0], E2).rho == 0
    assert load([0.3, 0.2, 0.1, 0.4], IQ2).rho == pytest.approx(0.6, abs=1e-9)


def test_load_iq_examples():
    assert load_iq([[0.3, 0.2], [0.1, 0.4]]) == pytest.approx(0.6)
    assert load_iq(np.full((3, 3), 0.7 / 3)) == pytest.approx(0.7)
    assert load_iq(np.zeros((2, 2))) == 0


def test_decomposition_invariants():
    rng = np.random.default_rng(0)
    S = build_iq_schedule_set(3)
    for _ in range(20):
        lam = rng.random(9) * 0.3
        res = load(lam, S)
        assert sum(res.decomposition.values()) == pytest.approx(res.rho, abs=1e-9)
        assert np.all(res.covering(S) >= lam - 1e-9)
        assert all(v >= -1e-12 for v in res.decomposition.values())


@given(st.lists(st.floats(0, 0.5), min_size=4, max_size=4), st.floats(0, 2))
def test_load_homogeneous_and_monotone(lam, c):
    lam = np.array(lam)
    rho = load(lam, IQ2).rho
    if np.all(c * lam <= 1):
        assert load(c * lam, IQ2).rho == pytest.approx(c * rho, abs=1e-8)
    bigger = np.minimum(lam + 0.1, 1.0)
    assert load(bigger, IQ2).rho >= rho - 1e-9


def test_dual_extreme_points_iq2():
    geo = dual_extreme_points(np.full(4, 0.5), IQ2)
    pts = {tuple(np.round(p).astype(int)) for p in geo.extreme_points}
    assert pts == IQ2_VERTICES
    assert np.allclose(geo.extreme_points, np.round(geo.extreme_points), atol=1e-9)
    for xi in geo.extreme_points:
        assert (IQ2.schedules @ xi).max() <= 1 + 1e-9
        assert xi @ geo.critical_lambda == pytest.approx(1, abs=1e-9)
        assert active_constraint_rank(xi, geo) == 4


def test_dual_extreme_points_small_cases():
    geo = dual_extreme_points([1.0], ScheduleSet([[1]], 1))
    assert geo.extreme_points.tolist() == [[1.0]]
    geo = dual_extreme_points([1.0, 1.0], ScheduleSet([[1, 1]], 2))
    assert {tuple(p) for p in geo.extreme_points} == {(1.0, 0.0), (0.0, 1.0)}


def test_dual_extreme_points_errors():
    with pytest.raises(PreconditionError):
        dual_extreme_points(np.full(4, 0.4), IQ2)
    with pytest.raises(SizeError):
        dual_extreme_points(np.full(9, 1 / 3), build_iq_schedule_set(3))


def test_workload_map_examples():
    geo = geometry_from([[1, 0], [1, 1]], 2)
    assert workload_map([3, 1], geo).tolist() == [3, 4]
    assert workload_map([0, 0], geo).tolist() == [0, 0]
    iq = dual_extreme_points(np.full(4, 0.5), IQ2)
    q = np.array([2, 0, 0, 2])
    assert np.allclose(workload_map(q, iq), iq.extreme_points @ q)
    with pytest.raises(InvalidParameterError):
        workload_map([1, 2, 3], geo)


def test_lifting_examples():
    geo = geometry_from([[1, 1]], 2)
    assert np.allclose(lifting_map([2.0], geo, 1.0), [1, 1], atol=1e-8)
    assert np.allclose(lifting_map([0.0], geo, 1.0), [0, 0])
    box = geometry_from([[1, 0], [0, 1]], 2)
    assert np.allclose(lifting_map([3.0, 1.0], box, 2.0), [3, 1], atol=1e-8)
    with pytest.raises(InvalidParameterError):
        lifting_map([-1.0], geo, 1.0)


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
def test_lifting_matches_slsqp(alpha):
    geo = dual_extreme_points(np.full(4, 0.5), IQ2)
    rng = np.random.default_rng(int(alpha * 10))
    for _ in range(15):
        w = workload_map(rng.integers(0, 20, 4).astype(float), geo)
        sol = solve_algd(w, geo, alpha)
        ref = ltilde_projection(w, geo.extreme_points, alpha, x0=sol.x + 0.1)
        # SLSQP may stop marginally infeasible; scale it onto the feasible set
        ref = np.maximum(ref, 0) * max(1.0, float(np.max(w / np.maximum(geo.extreme_points @ ref, 1e-300))))
        assert is_feasible_for(sol.x, w, geo)
        assert sol.residual <= 1e-8
        assert algd_objective(sol.x, alpha) <= algd_objective(ref, alpha) * (1 + 1e-9) + 1e-9


def test_lifting_optimal_against_random_feasible_points():
    geo = dual_extreme_points(np.full(4, 0.5), IQ2)
    rng = np.random.default_rng(3)
    for _ in range(20):
        w = rng.random(4) * 10
        x = lifting_map(w, geo, 1.0)
        for y in random_feasible_points(rng, w, geo.extreme_points, 100):
            assert L_tilde(x, 1.0) <= L_tilde(y, 1.0) + 1e-6


def test_lifting_idempotent_and_warm_start():
    geo = dual_extreme_points(np.full(4, 0.5), IQ2)
    rng = np.random.default_rng(4)
    for _ in range(20):
        q = rng.random(4) * 5
        x1 = lift_state(q, geo, 2.0)
        assert np.allclose(lift_state(x1, geo, 2.0), x1, atol=1e-6)
        cold = solve_algd(workload_map(q, geo), geo, 2.0)
        warm = solve_algd(workload_map(q, geo), geo, 2.0, mu0=cold.multipliers)
        assert np.allclose(cold.x, warm.x, atol=1e-7)
        assert warm.sweeps <= cold.sweeps
