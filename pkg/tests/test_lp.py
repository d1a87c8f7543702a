import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridstart.lp import EQ, GE, LE, LpError, LpProblem, dual_objective, lp_residuals, solve_lp
from lp_oracle import random_bounded_lp, vertex_optimum


def _lp(c, A, senses, b, lo, hi):
    return LpProblem(np.array(c, float), np.array(A, float), senses, np.array(b, float),
                     np.array(lo, float), np.array(hi, float))


def test_textbook_maximization():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18: optimum (2, 6), value 36
    p = _lp([-3, -5], [[1, 0], [0, 2], [3, 2]], [LE, LE, LE], [4, 12, 18], [0, 0], [np.inf, np.inf])
    s = solve_lp(p)
    assert s.optimal
    np.testing.assert_allclose(s.x, [2, 6], atol=1e-9)
    assert s.objective == pytest.approx(-36)


def test_infeasible_detected():
    p = _lp([1, 1], [[1, 1], [1, 1]], [LE, GE], [1, 2], [0, 0], [5, 5])
    assert solve_lp(p).status == "infeasible"


def test_unbounded_ray():
    p = _lp([-1, 0], [[1, -1]], [LE], [1], [0, 0], [np.inf, np.inf])
    s = solve_lp(p)
    assert s.status == "unbounded"
    assert s.ray is not None and p.c @ s.ray < 0
    assert np.all(p.A @ s.ray <= 1e-12)


def test_equality_and_free_variable():
    p = _lp([1, 2], [[1, 1]], [EQ], [3], [-np.inf, 0], [np.inf, 10])
    s = solve_lp(p)
    assert s.optimal
    np.testing.assert_allclose(s.x, [3, 0], atol=1e-9)


def test_degenerate_vertex():
    # three constraints through the optimal vertex (1, 1)
    p = _lp([-1, -1], [[1, 0], [0, 1], [1, 1]], [LE, LE, LE], [1, 1, 2], [0, 0], [5, 5])
    s = solve_lp(p)
    assert s.optimal and s.objective == pytest.approx(-2)


def test_malformed_problem_rejected():
    with pytest.raises(LpError):
        solve_lp(_lp([1, 1], [[1, 1, 1]], [LE], [1], [0, 0], [1, 1]))
    with pytest.raises(LpError):
        solve_lp(_lp([1], [[1]], [LE], [1], [2], [1]))


@pytest.mark.parametrize("seed", range(5))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        p = random_bounded_lp(rng)
        s = solve_lp(p)
        ref = vertex_optimum(p)
        if np.isinf(ref):
            assert s.status == "infeasible"
            continue
        assert s.optimal
        assert abs(s.objective - ref) <= 1e-7 * max(1.0, abs(ref))
        assert lp_residuals(p, s.x).max(initial=0.0) <= 1e-8
        assert abs(dual_objective(p, s) - s.objective) <= 1e-7 * max(1.0, abs(ref))


@given(st.integers(0, 2**32 - 1))
def test_weak_duality_and_feasible_points(seed):
    rng = np.random.default_rng(seed)
    p = random_bounded_lp(rng, infeasible_share=0.0)
    s = solve_lp(p)
    assert s.optimal
    assert dual_objective(p, s) <= s.objective + 1e-7 * max(1.0, abs(s.objective))
    # no random feasible point beats the optimum
    X = rng.uniform(p.lower, p.upper, (200, p.n_vars))
    for x in X:
        if lp_residuals(p, x).max(initial=0.0) == 0.0:
            assert p.c @ x >= s.objective - 1e-9
