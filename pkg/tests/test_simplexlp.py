"""The dense two-phase simplex against scipy's HiGHS on random programs."""
from __future__ import annotations

import numpy as np
import pytest
from scipy import optimize

from radoncert.simplexlp import solve_lp


def _random_feasible_lp(rng, n, m_eq, m_ub):
    # build around a known nonnegative point so feasibility is guaranteed
    x0 = rng.random(n)
    A_eq = rng.normal(size=(m_eq, n)) if m_eq else None
    b_eq = A_eq @ x0 if m_eq else None
    A_ub = rng.normal(size=(m_ub, n)) if m_ub else None
    b_ub = A_ub @ x0 + rng.random(m_ub) if m_ub else None
    c = rng.normal(size=n)
    return c, A_eq, b_eq, A_ub, b_ub


def test_matches_scipy_on_random_programs():
    rng = np.random.default_rng(42)
    n_checked = 0
    for trial in range(60):
        n = int(rng.integers(2, 9))
        m_eq = int(rng.integers(0, min(n, 4)))
        m_ub = int(rng.integers(0, 5))
        if m_eq + m_ub == 0:
            continue
        c, A_eq, b_eq, A_ub, b_ub = _random_feasible_lp(rng, n, m_eq, m_ub)
        ref = optimize.linprog(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub,
                               bounds=(0, None), method="highs")
        res = solve_lp(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
        if ref.status == 3:
            assert res.status == "unbounded", f"trial {trial}"
            continue
        assert ref.status == 0
        assert res.ok, f"trial {trial}: {res.message}"
        assert res.fun == pytest.approx(ref.fun, abs=1e-7), f"trial {trial}"
        n_checked += 1
    assert n_checked >= 30


def test_infeasible_detected():
    # x1 + x2 = 1 and x1 + x2 = 2 cannot both hold
    res = solve_lp(np.ones(2), A_eq=np.array([[1.0, 1.0], [1.0, 1.0]]),
                   b_eq=np.array([1.0, 2.0]))
    assert res.status == "infeasible"


def test_unbounded_detected():
    res = solve_lp(np.array([-1.0, 0.0]),
                   A_ub=np.array([[0.0, 1.0]]), b_ub=np.array([1.0]))
    assert res.status == "unbounded"


def test_degenerate_vertices_no_cycling():
    # classic Beale-style degeneracy; Bland's rule must terminate
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A_ub = np.array([
        [0.25, -60.0, -0.04, 9.0],
        [0.5, -90.0, -0.02, 3.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    b_ub = np.array([0.0, 0.0, 1.0])
    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub)
    ref = optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=(0, None),
                           method="highs")
    assert res.ok
    assert res.fun == pytest.approx(ref.fun, abs=1e-9)


def test_equality_only_transport_shape():
    # tiny transport polytope: marginals (1, 1) to (2,)
    A_eq = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b_eq = np.array([1.0, 1.0, 2.0])   # third row redundant
    res = solve_lp(np.array([3.0, 5.0]), A_eq=A_eq, b_eq=b_eq)
    assert res.ok
    assert res.fun == pytest.approx(8.0)
    assert np.allclose(res.x, [1.0, 1.0])


def test_redundant_rows_tolerated():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = 5
        A = rng.normal(size=(2, n))
        A_eq = np.vstack([A, A[0] + A[1]])  # dependent third row
        x0 = rng.random(n)
        b_eq = A_eq @ x0
        c = rng.normal(size=n)
        ref = optimize.linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                               method="highs")
        res = solve_lp(c, A_eq=A_eq, b_eq=b_eq)
        if ref.status == 3:
            assert res.status == "unbounded"
        else:
            assert res.ok
            assert res.fun == pytest.approx(ref.fun, abs=1e-7)


def test_solution_satisfies_constraints():
    rng = np.random.default_rng(17)
    c, A_eq, b_eq, A_ub, b_ub = _random_feasible_lp(rng, 6, 2, 3)
    res = solve_lp(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
    assert res.ok
    assert np.all(res.x >= -1e-10)
    assert np.allclose(A_eq @ res.x, b_eq, atol=1e-9)
    assert np.all(A_ub @ res.x <= b_ub + 1e-9)
