# tfc/services/simplex.py
"""
Bounded-variable primal simplex.

Solves  max c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  0 <= x <= upper
on a dense tableau built from sparse rows. Nonbasic variables sit at either
bound; Bland's rule (lowest index) picks both the entering and the leaving
variable, so runs are deterministic and cannot cycle.

The tableau is dense (rows x columns floats). The `auto` engine only picks
this solver while the tableau stays under TFC_SIMPLEX_MAX_CELLS and hands
larger programs to HiGHS, which keeps the rows sparse.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

STATUS_OPTIMAL = "optimal"
STATUS_ITERATION_LIMIT = "iteration_limit"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-9
COST_TOL = 1e-9


@dataclass
class SimplexOutcome:
    x: np.ndarray | None
    objective: float
    status: str
    iterations: int


class BoundedSimplex:
    def __init__(
        self,
        c: np.ndarray,
        A_ub: sparse.spmatrix | None,
        b_ub: np.ndarray | None,
        A_eq: sparse.spmatrix | None,
        b_eq: np.ndarray | None,
        upper: np.ndarray,
        *,
        max_iter: int,
        feas_tol: float = 1e-9,
    ) -> None:
        self.n = int(len(c))
        self.c = np.asarray(c, dtype=np.float64)
        self.max_iter = int(max_iter)
        self.feas_tol = feas_tol
        self.iterations = 0

        A_ub = sparse.csr_matrix((0, self.n)) if A_ub is None else sparse.csr_matrix(A_ub)
        A_eq = sparse.csr_matrix((0, self.n)) if A_eq is None else sparse.csr_matrix(A_eq)
        b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
        b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
        m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
        self.m = m = m_ub + m_eq

        # rows: [A_ub | I_slack] and [A_eq | 0]; flip rows with negative rhs
        body = np.vstack([A_ub.toarray(), A_eq.toarray()]) if m else np.zeros((0, self.n))
        rhs = np.concatenate([b_ub, b_eq])
        slack = np.zeros((m, m_ub))
        slack[np.arange(m_ub), np.arange(m_ub)] = 1.0
        sign = np.where(rhs < 0, -1.0, 1.0)
        body *= sign[:, None]
        slack *= sign[:, None]
        rhs = rhs * sign

        # rows whose slack cannot start basic need an artificial
        needs_art = np.ones(m, dtype=bool)
        needs_art[:m_ub] = sign[:m_ub] < 0
        art_rows = np.flatnonzero(needs_art)
        art = np.zeros((m, len(art_rows)))
        art[art_rows, np.arange(len(art_rows))] = 1.0

        self.n_slack = m_ub
        self.n_art = len(art_rows)
        self.tableau = np.hstack([body, slack, art])
        self.total = self.tableau.shape[1]
        self.art_start = self.n + m_ub

        self.upper = np.concatenate(
            [np.asarray(upper, dtype=np.float64), np.full(m_ub, np.inf), np.full(self.n_art, np.inf)]
        )
        self.basis = np.empty(m, dtype=np.int64)
        slack_rows = np.flatnonzero(~needs_art)
        self.basis[slack_rows] = self.n + slack_rows
        self.basis[art_rows] = self.art_start + np.arange(self.n_art)
        self.beta = rhs.copy()
        self.at_upper = np.zeros(self.total, dtype=bool)
        self.blocked = np.zeros(self.total, dtype=bool)

    # ------------------------------------------------------------------
    def solve(self) -> SimplexOutcome:
        if self.n_art:
            cost = np.zeros(self.total)
            cost[self.art_start:] = -1.0
            status = self._iterate(cost)
            if status == STATUS_ITERATION_LIMIT:
                return SimplexOutcome(None, float("nan"), status, self.iterations)
            infeasibility = float(self._values()[self.art_start:].sum())
            if infeasibility > max(self.feas_tol, 1e-7):
                logger.warning("Simplex phase 1 ended with infeasibility %.3e", infeasibility)
                return SimplexOutcome(None, float("nan"), STATUS_INFEASIBLE, self.iterations)
            # artificials stay at zero from here on
            self.upper[self.art_start:] = 0.0
            self.blocked[self.art_start:] = True
            self.at_upper[self.art_start:] = False

        cost = np.zeros(self.total)
        cost[: self.n] = self.c
        status = self._iterate(cost)
        x = self._values()[: self.n]
        x = np.clip(x, 0.0, self.upper[: self.n])
        objective = float(self.c @ x)
        logger.debug("Simplex finished status=%s iterations=%d objective=%.9g", status, self.iterations, objective)
        return SimplexOutcome(x, objective, status, self.iterations)

    # ------------------------------------------------------------------
    def _values(self) -> np.ndarray:
        values = np.where(self.at_upper, self.upper, 0.0)
        values = np.where(np.isfinite(values), values, 0.0)
        values[self.basis] = self.beta
        return values

    def _iterate(self, cost: np.ndarray) -> str:
        T = self.tableau
        upper = self.upper
        in_basis = np.zeros(self.total, dtype=bool)
        while True:
            if self.iterations >= self.max_iter:
                return STATUS_ITERATION_LIMIT
            in_basis[:] = False
            in_basis[self.basis] = True

            reduced = cost - cost[self.basis] @ T
            can_rise = (~self.at_upper) & (reduced > COST_TOL) & (upper > 0)
            can_fall = self.at_upper & (reduced < -COST_TOL)
            eligible = (can_rise | can_fall) & ~in_basis & ~self.blocked
            candidates = np.flatnonzero(eligible)
            if candidates.size == 0:
                return STATUS_OPTIMAL
            j = int(candidates[0])
            direction = -1.0 if self.at_upper[j] else 1.0
            alpha = direction * T[:, j]

            theta = upper[j]
            leave_row = -1
            basic_upper = upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = alpha > PIVOT_TOL
                inc = (alpha < -PIVOT_TOL) & np.isfinite(basic_upper)
                ratios = np.full(self.m, np.inf)
                ratios[dec] = np.maximum(self.beta[dec], 0.0) / alpha[dec]
                ratios[inc] = np.maximum(basic_upper[inc] - self.beta[inc], 0.0) / (-alpha[inc])
            if self.m:
                best = float(ratios.min())
                if best < theta - 1e-12:
                    ties = np.flatnonzero(ratios <= best + 1e-12)
                    leave_row = int(ties[np.argmin(self.basis[ties])])
                    theta = best
            if not np.isfinite(theta):
                return STATUS_UNBOUNDED

            self.iterations += 1
            self.beta -= theta * alpha
            if leave_row < 0:
                # bound flip, basis unchanged
                self.at_upper[j] = not self.at_upper[j]
                continue

            leaving = int(self.basis[leave_row])
            self.at_upper[leaving] = alpha[leave_row] < 0
            start = upper[j] if self.at_upper[j] else 0.0
            entering_value = start + direction * theta

            pivot = T[leave_row, j]
            T[leave_row] /= pivot
            column = T[:, j].copy()
            column[leave_row] = 0.0
            T -= np.outer(column, T[leave_row])
            self.basis[leave_row] = j
            self.at_upper[j] = False
            self.beta[leave_row] = entering_value


def bounded_simplex(
    c: np.ndarray,
    A_ub: sparse.spmatrix | None,
    b_ub: np.ndarray | None,
    A_eq: sparse.spmatrix | None,
    b_eq: np.ndarray | None,
    upper: np.ndarray,
    *,
    max_iter: int,
) -> SimplexOutcome:
    return BoundedSimplex(c, A_ub, b_ub, A_eq, b_eq, upper, max_iter=max_iter).solve()


def tableau_cells(n_vars: int, n_ub: int, n_eq: int) -> int:
    m = n_ub + n_eq
    return m * (n_vars + n_ub + n_eq)
