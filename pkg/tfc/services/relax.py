# tfc/services/relax.py
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from django.conf import settings
from scipy import sparse
from scipy.optimize import linprog

from tfc.constants import (
    DEFAULT_LP_ENGINE,
    DEFAULT_LP_ITERATION_FACTOR,
    DEFAULT_SIMPLEX_MAX_CELLS,
)
from tfc.exceptions import LPError
from tfc.services.instance_files import atomic_write_text
from tfc.services.model import (
    FractionalSolution,
    Instance,
    feas_tol,
    require_feasible,
    total_conflict_weight,
)
from tfc.services.simplex import (
    STATUS_ITERATION_LIMIT,
    STATUS_OPTIMAL,
    bounded_simplex,
    tableau_cells,
)

logger = logging.getLogger(__name__)


class RelaxationKind(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    ITERATION_LIMIT = "iteration_limit"


# ----------------------------------------------------------------------
# Concave relaxations evaluated directly
# ----------------------------------------------------------------------
def _linear_term(inst: Instance, y: np.ndarray) -> float:
    return inst.lam * float(np.sum(inst.pref_dense * y))


def l1_edge_terms(inst: Instance, y: np.ndarray) -> np.ndarray:
    """min(1, min_t (2 - y_ut - y_vt)) per conflict edge."""
    if inst.n_edges == 0:
        return np.zeros(0)
    pair_max = (y[inst.edge_u] + y[inst.edge_v]).max(axis=1)
    return np.minimum(1.0, 2.0 - pair_max)


def l2_edge_terms(inst: Instance, y: np.ndarray) -> np.ndarray:
    """min(1, y_ut + y_vt) per (edge, task)."""
    if inst.n_edges == 0:
        return np.zeros((0, inst.n_tasks))
    return np.minimum(1.0, y[inst.edge_u] + y[inst.edge_v])


def eval_L1(inst: Instance, y: FractionalSolution) -> float:
    require_feasible(inst, y)
    return _linear_term(inst, y.values) + float(np.dot(inst.edge_w, l1_edge_terms(inst, y.values)))


def eval_L2(inst: Instance, y: FractionalSolution) -> float:
    require_feasible(inst, y)
    terms = l2_edge_terms(inst, y.values).sum(axis=1)
    return _linear_term(inst, y.values) - total_conflict_weight(inst) + float(np.dot(inst.edge_w, terms))


def eval_relaxation(inst: Instance, y: FractionalSolution, kind: RelaxationKind) -> float:
    return eval_L1(inst, y) if RelaxationKind(kind) is RelaxationKind.L1 else eval_L2(inst, y)


# ----------------------------------------------------------------------
# Linearized programs
# ----------------------------------------------------------------------
@dataclass
class RelaxationProgram:
    """
    max objective.x + constant_offset  s.t.  A_ub x <= b_ub, A_eq x = b_eq, 0 <= x <= upper.

    Variables: y_vt at v*k + t, then auxiliaries (z_e for L1, x_et at e*k + t for L2).
    """

    kind: RelaxationKind
    n_units: int
    n_tasks: int
    n_edges: int
    objective: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    upper: np.ndarray
    constant_offset: float

    @property
    def n_primary(self) -> int:
        return self.n_units * self.n_tasks

    @property
    def n_variables(self) -> int:
        return int(self.objective.shape[0])

    @property
    def n_constraints(self) -> int:
        return int(self.A_ub.shape[0] + self.A_eq.shape[0])

    def variable_name(self, j: int) -> str:
        k = self.n_tasks
        if j < self.n_primary:
            return f"y_{j // k}_{j % k}"
        aux = j - self.n_primary
        if self.kind is RelaxationKind.L1:
            return f"z_{aux}"
        return f"x_{aux // k}_{aux % k}"


def _assemble(
    kind: RelaxationKind,
    weighted_pref: np.ndarray,
    sizes: np.ndarray,
    capacities: np.ndarray,
    edge_u: np.ndarray,
    edge_v: np.ndarray,
    edge_w: np.ndarray,
) -> RelaxationProgram:
    kind = RelaxationKind(kind)
    n, k = weighted_pref.shape
    n_edges = int(len(edge_w))
    n_primary = n * k
    n_aux = n_edges if kind is RelaxationKind.L1 else n_edges * k
    n_vars = n_primary + n_aux

    objective = np.zeros(n_vars)
    objective[:n_primary] = weighted_pref.ravel()

    # capacity rows: sum_v |v| y_vt <= p_t
    cap_rows = np.tile(np.arange(k), n)
    cap_cols = np.arange(n_primary)
    cap_vals = np.repeat(np.asarray(sizes, dtype=np.float64), k)

    # aux rows, one per (edge, task)
    e_idx = np.repeat(np.arange(n_edges), k)
    t_idx = np.tile(np.arange(k), n_edges)
    row_ids = np.arange(n_edges * k) + k
    yu_cols = edge_u[e_idx] * k + t_idx
    yv_cols = edge_v[e_idx] * k + t_idx
    if kind is RelaxationKind.L1:
        # z_e + y_ut + y_vt <= 2
        objective[n_primary:] = edge_w
        aux_cols = n_primary + e_idx
        aux_sign, y_sign, aux_rhs = 1.0, 1.0, 2.0
        constant = 0.0
    else:
        # x_et - y_ut - y_vt <= 0
        objective[n_primary:] = np.repeat(edge_w, k)
        aux_cols = n_primary + e_idx * k + t_idx
        aux_sign, y_sign, aux_rhs = 1.0, -1.0, 0.0
        constant = -float(np.sum(edge_w))

    rows = np.concatenate([cap_rows, row_ids, row_ids, row_ids])
    cols = np.concatenate([cap_cols, aux_cols, yu_cols, yv_cols])
    vals = np.concatenate(
        [
            cap_vals,
            np.full(n_edges * k, aux_sign),
            np.full(n_edges * k, y_sign),
            np.full(n_edges * k, y_sign),
        ]
    )
    m_ub = k + n_edges * k
    A_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(m_ub, n_vars))
    b_ub = np.concatenate([np.asarray(capacities, dtype=np.float64), np.full(n_edges * k, aux_rhs)])

    # assignment rows: sum_t y_vt = 1
    eq_rows = np.repeat(np.arange(n), k)
    A_eq = sparse.csr_matrix((np.ones(n_primary), (eq_rows, np.arange(n_primary))), shape=(n, n_vars))
    b_eq = np.ones(n)

    return RelaxationProgram(
        kind=kind,
        n_units=n,
        n_tasks=k,
        n_edges=n_edges,
        objective=objective,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        upper=np.ones(n_vars),
        constant_offset=constant,
    )


def build_program(inst: Instance, kind: RelaxationKind) -> RelaxationProgram:
    return _assemble(
        kind,
        inst.lam * inst.pref_dense,
        np.ones(inst.n_nodes),
        inst.capacities,
        inst.edge_u,
        inst.edge_v,
        inst.edge_w,
    )


class CompactInstance(Protocol):
    """Supernode-space instance: `base` over supernodes plus member counts."""

    base: Instance
    sizes: np.ndarray


def build_compact_program(compact: CompactInstance, kind: RelaxationKind) -> RelaxationProgram:
    base = compact.base
    sizes = np.asarray(compact.sizes, dtype=np.float64)
    return _assemble(
        kind,
        base.lam * base.pref_dense * sizes[:, None],
        sizes,
        base.capacities,
        base.edge_u,
        base.edge_v,
        base.edge_w,
    )


# ----------------------------------------------------------------------
# Engines
# ----------------------------------------------------------------------
@dataclass
class EngineOutcome:
    x: np.ndarray | None
    status: LPStatus
    iterations: int
    engine: str


def _iteration_budget(program: RelaxationProgram) -> int:
    factor = int(getattr(settings, "TFC_LP_ITERATION_FACTOR", DEFAULT_LP_ITERATION_FACTOR))
    return max(1, factor * (program.n_variables + program.n_constraints))


def resolve_engine(program: RelaxationProgram, engine: str | None = None) -> str:
    engine = (engine or getattr(settings, "TFC_LP_ENGINE", DEFAULT_LP_ENGINE)).lower()
    if engine not in {"auto", "simplex", "highs"}:
        raise LPError(f"Unknown LP engine {engine!r}.")
    if engine != "auto":
        return engine
    limit = int(getattr(settings, "TFC_SIMPLEX_MAX_CELLS", DEFAULT_SIMPLEX_MAX_CELLS))
    cells = tableau_cells(program.n_variables, program.A_ub.shape[0], program.A_eq.shape[0])
    return "simplex" if cells <= limit else "highs"


def solve_program(
    program: RelaxationProgram,
    *,
    engine: str | None = None,
    max_iter: int | None = None,
) -> EngineOutcome:
    chosen = resolve_engine(program, engine)
    budget = max_iter if max_iter is not None else _iteration_budget(program)
    try:
        return _run_engine(program, chosen, budget)
    except (ValueError, ArithmeticError) as exc:  # LinAlgError is a ValueError
        raise LPError(f"{chosen} failed: {exc}") from exc


def _run_engine(program: RelaxationProgram, chosen: str, budget: int) -> EngineOutcome:
    if chosen == "simplex":
        outcome = bounded_simplex(
            program.objective,
            program.A_ub,
            program.b_ub,
            program.A_eq,
            program.b_eq,
            program.upper,
            max_iter=budget,
        )
        if outcome.status == STATUS_ITERATION_LIMIT:
            return EngineOutcome(outcome.x, LPStatus.ITERATION_LIMIT, outcome.iterations, chosen)
        if outcome.status != STATUS_OPTIMAL:
            raise LPError(f"Simplex ended with status {outcome.status}.")
        return EngineOutcome(outcome.x, LPStatus.OPTIMAL, outcome.iterations, chosen)

    bounds = np.column_stack([np.zeros(program.n_variables), program.upper])
    res = linprog(
        -program.objective,
        A_ub=program.A_ub,
        b_ub=program.b_ub,
        A_eq=program.A_eq,
        b_eq=program.b_eq,
        bounds=bounds,
        method="highs",
        options={"maxiter": int(budget)},
    )
    iterations = int(getattr(res, "nit", 0) or 0)
    if res.status == 1:
        return EngineOutcome(res.x, LPStatus.ITERATION_LIMIT, iterations, chosen)
    if res.status != 0:
        raise LPError(f"HiGHS ended with status {res.status}: {res.message}")
    return EngineOutcome(np.asarray(res.x), LPStatus.OPTIMAL, iterations, chosen)


# ----------------------------------------------------------------------
# Relaxation solving
# ----------------------------------------------------------------------
@dataclass
class LPResult:
    solution: FractionalSolution | None
    objective_value: float
    iterations: int
    status: LPStatus
    kind: RelaxationKind
    engine: str = ""
    seconds: float = 0.0

    @property
    def is_optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


def _primary_matrix(x: np.ndarray, n_units: int, n_tasks: int) -> np.ndarray:
    y = np.clip(np.asarray(x[: n_units * n_tasks], dtype=np.float64), 0.0, 1.0).reshape(n_units, n_tasks)
    # absorb solver round-off so row sums are 1 within tolerance
    sums = y.sum(axis=1, keepdims=True)
    sums[sums <= 0] = 1.0
    return y / sums


def reconstruct_auxiliaries(program: RelaxationProgram, y: np.ndarray, edge_u: np.ndarray, edge_v: np.ndarray) -> np.ndarray:
    """Auxiliaries set to their min-expressions given y."""
    pair = y[edge_u] + y[edge_v]
    if program.kind is RelaxationKind.L1:
        aux = np.minimum(1.0, 2.0 - pair.max(axis=1)) if len(edge_u) else np.zeros(0)
    else:
        aux = np.minimum(1.0, pair).ravel()
    return np.concatenate([y.ravel(), aux])


def _finish(
    inst: Instance,
    program: RelaxationProgram,
    outcome: EngineOutcome,
    started: float,
) -> LPResult:
    seconds = time.perf_counter() - started
    if outcome.status is LPStatus.ITERATION_LIMIT or outcome.x is None:
        logger.warning(
            "Relaxation %s hit the iteration limit after %d iterations (%s).",
            program.kind.value,
            outcome.iterations,
            outcome.engine,
        )
        return LPResult(None, float("nan"), outcome.iterations, LPStatus.ITERATION_LIMIT, program.kind, outcome.engine, seconds)

    y = FractionalSolution(_primary_matrix(outcome.x, program.n_units, program.n_tasks))
    full = reconstruct_auxiliaries(program, y.values, inst.edge_u, inst.edge_v)
    value = float(program.objective @ full) + program.constant_offset
    logger.info(
        "Relaxation %s solved: value=%.6f engine=%s iterations=%d vars=%d rows=%d in %.3fs",
        program.kind.value,
        value,
        outcome.engine,
        outcome.iterations,
        program.n_variables,
        program.n_constraints,
        seconds,
    )
    return LPResult(y, value, outcome.iterations, LPStatus.OPTIMAL, program.kind, outcome.engine, seconds)


def solve_relaxation(inst: Instance, kind: RelaxationKind, *, engine: str | None = None) -> LPResult:
    started = time.perf_counter()
    program = build_program(inst, kind)
    outcome = solve_program(program, engine=engine)
    result = _finish(inst, program, outcome, started)
    if result.solution is not None:
        require_feasible(inst, result.solution)
    return result


def solve_compact_relaxation(
    compact: CompactInstance,
    kind: RelaxationKind,
    *,
    engine: str | None = None,
) -> LPResult:
    """
    Size-weighted relaxation over supernodes. The returned solution lives in
    supernode space: rows sum to 1 and sum_S |S| y_St <= p_t.
    """
    started = time.perf_counter()
    program = build_compact_program(compact, kind)
    outcome = solve_program(program, engine=engine)
    result = _finish(compact.base, program, outcome, started)
    if result.solution is not None:
        loads = (np.asarray(compact.sizes)[:, None] * result.solution.values).sum(axis=0)
        if np.any(loads > compact.base.capacities + feas_tol()):
            raise LPError("Compact relaxation returned a capacity-violating solution.")
    return result


# ----------------------------------------------------------------------
# LP text dump (CPLEX LP format)
# ----------------------------------------------------------------------
def _format_terms(program: RelaxationProgram, row: sparse.csr_matrix) -> str:
    parts: list[str] = []
    for j, coef in zip(row.indices, row.data):
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(coef):.12g} {program.variable_name(int(j))}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def lp_dump(program: RelaxationProgram) -> str:
    lines = [
        f"\\ tfc relaxation {program.kind.value}",
        f"\\ constant offset {program.constant_offset:.12g}",
        "Maximize",
    ]
    obj = sparse.csr_matrix(program.objective.reshape(1, -1))
    obj.sort_indices()
    lines.append(f" obj: {_format_terms(program, obj) or '0 ' + program.variable_name(0)}")
    lines.append("Subject To")
    A_ub = program.A_ub.copy()
    A_ub.sort_indices()
    for i in range(A_ub.shape[0]):
        label = f"cap_{i}" if i < program.n_tasks else f"aux_{i - program.n_tasks}"
        lines.append(f" {label}: {_format_terms(program, A_ub[i])} <= {program.b_ub[i]:.12g}")
    A_eq = program.A_eq.copy()
    A_eq.sort_indices()
    for i in range(A_eq.shape[0]):
        lines.append(f" assign_{i}: {_format_terms(program, A_eq[i])} = {program.b_eq[i]:.12g}")
    lines.append("Bounds")
    for j in range(program.n_variables):
        lines.append(f" 0 <= {program.variable_name(j)} <= {program.upper[j]:.12g}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp_dump(program: RelaxationProgram, path: str | Path) -> None:
    atomic_write_text(path, lp_dump(program))
