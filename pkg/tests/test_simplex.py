from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from sgiq.simplex import LpStatus, simplex


def random_lp(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 8)), int(rng.integers(1, 10))
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    A[rng.random((m, n)) < 0.4] = 0.0
    b = rng.integers(-4, 10, size=m).astype(float)
    senses = list(rng.choice(["<=", ">=", "="], size=m, p=[0.6, 0.2, 0.2]))
    c = rng.integers(-5, 6, size=n).astype(float)
    lower = np.zeros(n)
    upper = np.where(rng.random(n) < 0.5, rng.integers(1, 6, size=n).astype(float), np.inf)
    return c, A, senses, b, lower, upper


def highs(c, A, senses, b, lower, upper):
    ub_rows = [i for i, s in enumerate(senses) if s != "="]
    sign = np.array([1.0 if senses[i] == "<=" else -1.0 for i in ub_rows])
    eq_rows = [i for i, s in enumerate(senses) if s == "="]
    return linprog(
        c,
        A_ub=(A[ub_rows] * sign[:, None]) if ub_rows else None,
        b_ub=(b[ub_rows] * sign) if ub_rows else None,
        A_eq=A[eq_rows] if eq_rows else None,
        b_eq=b[eq_rows] if eq_rows else None,
        bounds=list(zip(lower, [None if np.isinf(u) else u for u in upper])),
        method="highs",
    )


@pytest.mark.parametrize("rule", ["bland", "dantzig"])
def test_agrees_with_highs(rule):
    for seed in range(150):
        c, A, senses, b, lo, hi = random_lp(seed)
        ours = simplex(c, A, senses, b, lo, hi, pivot_rule=rule)
        ref = highs(c, A, senses, b, lo, hi)
        expected = {0: LpStatus.OPTIMAL, 2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}[ref.status]
        assert ours.status is expected, seed
        if expected is LpStatus.OPTIMAL:
            assert ours.objective == pytest.approx(ref.fun, abs=1e-6)
            x = ours.x
            assert np.all(x >= lo - 1e-7) and np.all(x <= hi + 1e-7)
            act = A @ x
            for s, a, r in zip(senses, act, b):
                assert {"<=": a <= r + 1e-7, ">=": a >= r - 1e-7, "=": abs(a - r) <= 1e-7}[s]


def test_textbook_example():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
    res = simplex([-3, -5], [[1, 0], [0, 2], [3, 2]], ["<="] * 3, [4, 12, 18], [0, 0], [np.inf, np.inf])
    assert res.status is LpStatus.OPTIMAL
    assert res.x == pytest.approx([2, 6])
    assert res.objective == pytest.approx(-36)


def test_degenerate_cycling_example():
    # Beale's example cycles under the largest-coefficient rule without anti-cycling
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    for rule in ("bland", "dantzig"):
        res = simplex(c, A, ["<="] * 3, [0, 0, 1], [0] * 4, [np.inf] * 4, pivot_rule=rule)
        assert res.status is LpStatus.OPTIMAL
        assert res.objective == pytest.approx(-0.05)


def test_bounds_only():
    res = simplex([-1, 1], np.zeros((0, 2)), [], [], [0, 0], [3, 2])
    assert res.status is LpStatus.OPTIMAL
    assert res.x == pytest.approx([3, 0])


def test_rejects_free_variables_and_bad_rule():
    with pytest.raises(ValueError):
        simplex([1], [[1]], ["<="], [1], [-np.inf], [np.inf])
    with pytest.raises(ValueError):
        simplex([1], [[1]], ["<="], [1], [0], [1], pivot_rule="steepest")
