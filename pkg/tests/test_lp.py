import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import vertex_lp
from riskcfa.lp import (BACKENDS, Affine, LpModel, LpValidationError, Sense, Status, add_row, solve,
                        solve_arrays, to_lp_text)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def test_single_lower_row(backend):
    m = LpModel()
    x = m.add_variable()
    m.add_constraint({x: 1.0}, Sense.GE, 3.0)
    m.set_objective({x: 1.0})
    sol = solve(m, backend)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert sol.primal[0] == pytest.approx(3.0, abs=1e-9)


def test_box_corner(backend):
    sol = solve_arrays([-1, -1], A_ub=[[1, 1]], b_ub=[1], bounds=[(0, 1), (0, 1)], backend=backend)
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)


def test_contradictory_bound_is_infeasible(backend):
    sol = solve_arrays([1.0], A_ub=[[1.0]], b_ub=[-1.0], backend=backend)
    assert sol.status is Status.INFEASIBLE
    assert sol.primal is None


def test_unbounded(backend):
    sol = solve_arrays([-1.0, 0.0], A_ub=[[1.0, -1.0]], b_ub=[0.0], backend=backend)
    assert sol.status is Status.UNBOUNDED


def test_equality_free_and_negative_bounds(backend):
    m = LpModel()
    x = m.add_variable(-math.inf, math.inf, "x")
    y = m.add_variable(-5.0, -1.0, "y")
    m.add_constraint({x: 1.0, y: 1.0}, Sense.EQ, 2.0)
    m.set_objective({x: 1.0})
    sol = solve(m, backend)
    # x = 2 - y is smallest at y = -1
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert sol.primal[1] == pytest.approx(-1.0, abs=1e-9)


def test_fixed_variable(backend):
    m = LpModel()
    x = m.add_variable(2.0, 2.0)
    y = m.add_variable()
    m.add_constraint({x: 1.0, y: 1.0}, Sense.GE, 5.0)
    m.set_objective({x: 1.0, y: 2.0})
    assert solve(m, backend).objective == pytest.approx(8.0, abs=1e-9)


def test_empty_model_is_trivial():
    sol = solve(LpModel())
    assert sol.status is Status.OPTIMAL and sol.objective == 0.0


@pytest.mark.parametrize("build, fragment", [
    (lambda m: m.add_constraint({3: 1.0}, Sense.LE, 1.0), "index"),
    (lambda m: m.add_constraint({0: float("nan")}, Sense.LE, 1.0), "finite"),
    (lambda m: m.add_constraint({0: 1.0}, Sense.LE, float("inf")), "finite"),
    (lambda m: m.add_variable(2.0, 1.0), "empty domain"),
    (lambda m: m.set_objective({0: float("nan")}), "objective"),
])
def test_malformed_models_raise_validation_errors(build, fragment):
    m = LpModel()
    m.add_variable()
    build(m)
    with pytest.raises(LpValidationError, match=fragment):
        solve(m)


def test_unknown_backend():
    with pytest.raises(LpValidationError):
        solve(LpModel(), backend="cplex")


def test_affine_algebra_and_add_row():
    a = Affine.var(0, 2.0) + 3.0
    b = 1.0 - Affine.var(1)
    e = 2 * a - b
    assert e.coef == {0: 4.0, 1: 1.0} and e.const == 5.0
    m = LpModel()
    m.add_variable()
    m.add_variable()
    add_row(m, e, Sense.LE, 9.0)
    assert m.constraints[0].rhs == 4.0
    assert "<=" in to_lp_text(m)


def test_degenerate_cycling_example():
    # Beale's classic cycling instance; Bland's fallback must terminate
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    sol = solve_arrays(c, A_ub=A, b_ub=[0, 0, 1])
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(-0.05, abs=1e-9)


def test_determinism():
    rng = np.random.default_rng(3)
    A = rng.uniform(-1, 1, (6, 4))
    b = rng.uniform(0.5, 2, 6)
    c = rng.normal(size=4)
    bounds = [(0, 3)] * 4
    s1, s2 = solve_arrays(c, A, b, bounds=bounds), solve_arrays(c, A, b, bounds=bounds)
    assert s1.status is s2.status
    assert abs(s1.objective - s2.objective) <= 1e-9


@st.composite
def small_lps(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(0, 6))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    A = np.round(rng.uniform(-3, 3, (m, n)), 2)
    b = np.round(rng.uniform(-1, 4, m), 2)
    c = np.round(rng.normal(size=n), 2)
    bounds = [(float(lo), float(lo + w)) for lo, w in zip(np.round(rng.uniform(-2, 1, n), 1),
                                                             np.round(rng.uniform(0.5, 3, n), 1))]
    return c, A, b, bounds


@settings(max_examples=150, deadline=None)
@given(small_lps())
def test_matches_vertex_enumeration(lp):
    c, A, b, bounds = lp
    ref = vertex_lp(c, A, b, bounds)
    for backend in BACKENDS:
        sol = solve_arrays(c, A if len(b) else None, b if len(b) else None, bounds=bounds, backend=backend)
        if ref is None:
            assert sol.status is Status.INFEASIBLE
            continue
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(ref, abs=1e-6)
        x = sol.primal
        # solution invariants: bounds, rows, objective recomputed from the primal
        for xi, (lo, hi) in zip(x, bounds):
            assert lo - 1e-7 <= xi <= hi + 1e-7
        if len(b):
            assert np.all(A @ x <= b + 1e-6)
        assert float(np.dot(c, x)) == pytest.approx(sol.objective, abs=1e-6)
