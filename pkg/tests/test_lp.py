import numpy as np
import pytest
from scipy.optimize import linprog

from ibckit.ibc import _margin_interval_1d
from ibckit.lp import solve_lp_max


def test_simple_bounded_max():
    res = solve_lp_max(c=[1.0], G=[[1.0]], h=[3.0])
    assert res.optimal
    assert res.value == pytest.approx(3.0, abs=1e-9)
    assert res.x[0] == pytest.approx(3.0, abs=1e-9)


def test_two_variable_corner():
    # max x + y on the triangle x,y >= -1, x + y <= 1
    res = solve_lp_max([1.0, 1.0], [[-1, 0], [0, -1], [1, 1]], [1, 1, 1])
    assert res.optimal
    assert res.value == pytest.approx(1.0, abs=1e-9)


def test_infeasible():
    res = solve_lp_max([1.0], [[1.0], [-1.0]], [1.0, -2.0])
    assert res.status == "infeasible"


def test_unbounded():
    res = solve_lp_max([1.0], [[-1.0]], [0.0])
    assert res.status == "unbounded"


def test_degenerate_redundant_rows():
    res = solve_lp_max([1.0, 0.0], [[1, 0], [1, 0], [0, 1], [0, -1]], [2, 2, 1, 1])
    assert res.optimal
    assert res.value == pytest.approx(2.0, abs=1e-9)


def test_random_against_scipy():
    rng = np.random.default_rng(7)
    solved = 0
    for _ in range(60):
        m, k = rng.integers(2, 9), rng.integers(1, 5)
        G = rng.normal(size=(m, k))
        h = rng.normal(size=m) + 1.0
        c = rng.normal(size=k)
        ours = solve_lp_max(c, G, h)
        ref = linprog(-c, A_ub=G, b_ub=h, bounds=[(None, None)] * k, method="highs")
        if ref.status == 2:
            assert ours.status == "infeasible"
        elif ref.status == 3:
            assert ours.status == "unbounded"
        else:
            assert ours.optimal
            assert ours.value == pytest.approx(-ref.fun, abs=1e-7, rel=1e-7)
            assert np.all(G @ ours.x <= h + 1e-8)
            solved += 1
    assert solved > 20


def test_margin_interval_matches_simplex():
    # the scalar-input fast path must agree with the generic simplex
    rng = np.random.default_rng(3)
    for _ in range(100):
        J = rng.integers(1, 5)
        HB = rng.normal(size=J)
        rhs = rng.normal(size=J)
        lo, hi = sorted(rng.normal(size=2) * 3.0)
        if hi - lo < 1e-3:
            hi = lo + 1.0
        margin, u = _margin_interval_1d(HB, rhs, lo, hi)
        G = np.vstack([np.column_stack([HB, np.ones(J)]), [[1.0, 0.0]], [[-1.0, 0.0]]])
        h = np.concatenate([rhs, [hi, -lo]])
        ref = solve_lp_max([0.0, 1.0], G, h)
        assert ref.optimal
        assert margin == pytest.approx(ref.value, abs=1e-9)
        assert lo - 1e-12 <= u[0] <= hi + 1e-12
        assert np.all(HB * u[0] + margin <= rhs + 1e-9)
