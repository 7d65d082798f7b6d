"""Bounded-variable revised simplex with Bland's anti-cycling rule.

Solves ``min c @ x`` subject to ``A x (<=|=|>=) b`` and ``lower <= x <= upper``.
Every structural variable needs at least one finite bound. The basis inverse
is kept explicitly with product-form updates and refactorised periodically.
"""

from __future__ import annotations

import enum
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-9


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    status: LpStatus
    iterations: int
    duals: np.ndarray
    reduced_costs: np.ndarray


class _Tableau:
    def __init__(self, A: sparse.csc_matrix, b: np.ndarray, lower: np.ndarray, upper: np.ndarray, pivot_rule: str):
        self.m, self.n = A.shape
        self.A = A
        self.b = b
        self.lower = lower
        self.upper = upper
        self.pivot_rule = pivot_rule
        self.ncols = len(lower)
        # columns n.. are unit columns: slacks (+e_i) then artificials (sign * e_i)
        self.unit_row = np.full(self.ncols, -1, dtype=np.int64)
        self.unit_sign = np.zeros(self.ncols)
        self.iterations = 0

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        if j < self.n:
            s, e = self.A.indptr[j], self.A.indptr[j + 1]
            col[self.A.indices[s:e]] = self.A.data[s:e]
        else:
            col[self.unit_row[j]] = self.unit_sign[j]
        return col

    def times_transpose(self, y: np.ndarray) -> np.ndarray:
        """``(y @ full_matrix)`` over every column."""
        out = np.empty(self.ncols)
        out[: self.n] = self.A.T @ y
        units = self.unit_row[self.n :]
        out[self.n :] = self.unit_sign[self.n :] * y[units]
        return out

    def refactor(self) -> None:
        B = np.column_stack([self.column(j) for j in self.basis]) if self.m else np.zeros((0, 0))
        self.Binv = np.linalg.inv(B) if self.m else B
        self.recompute_basic()

    def recompute_basic(self) -> None:
        nonbasic_x = self.x.copy()
        nonbasic_x[self.basis] = 0.0
        rhs = self.b - self.A @ nonbasic_x[: self.n]
        units = np.arange(self.n, self.ncols)
        np.add.at(rhs, self.unit_row[units], -self.unit_sign[units] * nonbasic_x[units])
        self.x[self.basis] = self.Binv @ rhs

    def run(self, cost: np.ndarray, max_iter: int, refactor_every: int = 64) -> LpStatus:
        m = self.m
        degenerate_run = 0
        while True:
            if self.iterations >= max_iter:
                return LpStatus.ITERATION_LIMIT
            y = cost[self.basis] @ self.Binv if m else np.zeros(0)
            d = cost - self.times_transpose(y)
            d[self.basis] = 0.0
            movable = self.upper > self.lower
            at_upper = self.at_upper
            inc = (~at_upper) & (d < -OPT_TOL) & movable
            dec = at_upper & (d > OPT_TOL) & movable
            inc[self.basis] = False
            dec[self.basis] = False
            cand = np.flatnonzero(inc | dec)
            if cand.size == 0:
                self.y = y
                self.d = d
                return LpStatus.OPTIMAL
            use_bland = self.pivot_rule == "bland" or degenerate_run > 50
            j = int(cand[0]) if use_bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = -1.0 if at_upper[j] else 1.0

            w = self.Binv @ self.column(j)
            dw = direction * w
            xb = self.x[self.basis]
            lb = self.lower[self.basis]
            ub = self.upper[self.basis]
            ratios = np.full(m, np.inf)
            down = dw > PIVOT_TOL
            up = dw < -PIVOT_TOL
            with np.errstate(invalid="ignore"):
                ratios[down] = (xb[down] - lb[down]) / dw[down]
                ratios[up] = (ub[up] - xb[up]) / (-dw[up])
            ratios = np.where(np.isnan(ratios), np.inf, np.maximum(ratios, 0.0))
            t_flip = self.upper[j] - self.lower[j]
            t_min = ratios.min() if m else np.inf
            if t_flip <= t_min:
                if not np.isfinite(t_flip):
                    return LpStatus.UNBOUNDED
                self.x[self.basis] = xb - t_flip * dw
                self.x[j] = self.upper[j] if direction > 0 else self.lower[j]
                self.at_upper[j] = direction > 0
                self.iterations += 1
                degenerate_run = 0
                continue
            if not np.isfinite(t_min):
                return LpStatus.UNBOUNDED
            ties = np.flatnonzero(ratios <= t_min + 1e-12)
            # Bland: the smallest variable index leaves among ratio ties
            r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            leaving = self.basis[r]
            self.x[self.basis] = xb - t_min * dw
            self.x[j] += direction * t_min
            hit_upper = dw[r] < 0
            self.x[leaving] = self.upper[leaving] if hit_upper else self.lower[leaving]
            self.at_upper[leaving] = bool(hit_upper)
            self.at_upper[j] = False
            self.basis[r] = j
            degenerate_run = degenerate_run + 1 if t_min <= 1e-12 else 0

            piv = w[r]
            row = self.Binv[r] / piv
            self.Binv -= np.outer(w, row)
            self.Binv[r] = row
            self.iterations += 1
            if self.iterations % refactor_every == 0:
                self.refactor()


def simplex(
    c: Sequence[float],
    A,
    senses: Sequence[str],
    b: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
    *,
    pivot_rule: str = "bland",
    max_iter: int = 1_000_000,
) -> SimplexResult:
    """Minimise ``c @ x``; two phases with artificials only for rows the slack cannot absorb.

    ``pivot_rule`` is ``"bland"`` (smallest eligible index enters) or
    ``"dantzig"`` (largest reduced cost, falling back to Bland after 50
    consecutive degenerate pivots).
    """
    if pivot_rule not in ("bland", "dantzig"):
        raise ValueError(f"unknown pivot rule {pivot_rule!r}")
    A = sparse.csc_matrix(A, dtype=float)
    m, n = A.shape
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(np.isinf(lower) & np.isinf(upper)):
        raise ValueError("free variables are not supported")

    slack_lo = np.array([{"<=": 0.0, ">=": -np.inf, "=": 0.0}[s] for s in senses])
    slack_hi = np.array([{"<=": np.inf, ">=": 0.0, "=": 0.0}[s] for s in senses])

    x0 = np.where(np.isfinite(lower), lower, upper)
    resid = b - A @ x0
    slack_val = np.clip(resid, slack_lo, slack_hi)
    need_art = np.abs(resid - slack_val) > 0.0
    arts = np.flatnonzero(need_art)

    ncols = n + m + arts.size
    lo = np.concatenate([lower, slack_lo, np.zeros(arts.size)])
    hi = np.concatenate([upper, slack_hi, np.full(arts.size, np.inf)])
    tab = _Tableau(A, b, lo, hi, pivot_rule)
    tab.unit_row[n : n + m] = np.arange(m)
    tab.unit_sign[n : n + m] = 1.0
    tab.unit_row[n + m :] = arts
    tab.unit_sign[n + m :] = np.sign(resid[arts] - slack_val[arts])

    x = np.zeros(ncols)
    x[:n] = x0
    x[n : n + m] = slack_val
    x[n + m :] = np.abs(resid[arts] - slack_val[arts])
    basis = list(range(n, n + m))
    for k, i in enumerate(arts):
        basis[i] = n + m + k
    tab.x = x
    tab.basis = basis
    # nonbasic columns sit at their lower bound unless it is infinite
    tab.at_upper = ~np.isfinite(lo)
    tab.at_upper[basis] = False
    tab.refactor()

    if arts.size:
        phase1 = np.zeros(ncols)
        phase1[n + m :] = 1.0
        status = tab.run(phase1, max_iter)
        if status is not LpStatus.OPTIMAL:
            return _result(tab, c, n, status)
        if tab.x[n + m :].sum() > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return _result(tab, c, n, LpStatus.INFEASIBLE)
        tab.upper[n + m :] = 0.0
        tab.x[n + m :] = np.minimum(tab.x[n + m :], 0.0)
        tab.recompute_basic()

    cost = np.zeros(ncols)
    cost[:n] = c
    status = tab.run(cost, max_iter)
    return _result(tab, c, n, status)


def _result(tab: _Tableau, c: np.ndarray, n: int, status: LpStatus) -> SimplexResult:
    x = tab.x[:n].copy()
    y = getattr(tab, "y", np.zeros(tab.m))
    d = getattr(tab, "d", np.zeros(tab.ncols))[:n]
    return SimplexResult(x, float(c @ x), status, tab.iterations, y, d)
