# tfc/services/rounding.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from django.conf import settings

from tfc.constants import DEFAULT_INT_TOL
from tfc.exceptions import RoundingError
from tfc.services.model import (
    Assignment,
    FractionalSolution,
    Instance,
    feas_tol,
    feasible,
    objective_value,
    require_feasible,
)
from tfc.services.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

SCHEME_DETERMINISTIC = "pipage"
SCHEME_RANDOMIZED = "randomized"


def int_tol() -> float:
    return float(getattr(settings, "TFC_INT_TOL", DEFAULT_INT_TOL))


# ----------------------------------------------------------------------
# Fractional support graph
# ----------------------------------------------------------------------
class FractionalSupport:
    """
    Bipartite graph H_y: an edge (v, t) for every tol < y_vt < 1 - tol.

    Vertices are numbered nodes first (0..n-1) then tasks (n..n+k-1). The
    working matrix is shared with the caller and `refresh` must be called
    for every coordinate it changes.
    """

    def __init__(self, y: np.ndarray, tol: float) -> None:
        self.y = y
        self.tol = tol
        self.n_nodes, self.n_tasks = y.shape
        self.node_adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        self.task_adj: list[set[int]] = [set() for _ in range(self.n_tasks)]
        for v, t in np.argwhere((y > tol) & (y < 1.0 - tol)):
            self.node_adj[int(v)].add(int(t))
            self.task_adj[int(t)].add(int(v))

    def is_fractional(self, v: int, t: int) -> bool:
        value = self.y[v, t]
        return self.tol < value < 1.0 - self.tol

    def refresh(self, coords: Iterable[tuple[int, int]]) -> None:
        for v, t in coords:
            if self.is_fractional(v, t):
                self.node_adj[v].add(t)
                self.task_adj[t].add(v)
            else:
                self.node_adj[v].discard(t)
                self.task_adj[t].discard(v)

    @property
    def n_edges(self) -> int:
        return sum(len(tasks) for tasks in self.node_adj)

    def __bool__(self) -> bool:
        return any(self.node_adj)

    def degree(self, vertex: int) -> int:
        if vertex < self.n_nodes:
            return len(self.node_adj[vertex])
        return len(self.task_adj[vertex - self.n_nodes])

    def neighbors(self, vertex: int) -> list[int]:
        if vertex < self.n_nodes:
            return [self.n_nodes + t for t in sorted(self.node_adj[vertex])]
        return sorted(self.task_adj[vertex - self.n_nodes])

    def coord(self, a: int, b: int) -> tuple[int, int]:
        """(node, task) coordinate of the support edge between vertices a and b."""
        if a < self.n_nodes:
            return a, b - self.n_nodes
        return b, a - self.n_nodes

    def active_vertices(self) -> list[int]:
        return [x for x in range(self.n_nodes + self.n_tasks) if self.degree(x) > 0]


@dataclass
class Walk:
    vertices: list[int]
    edges: list[tuple[int, int]]
    is_cycle: bool

    @property
    def m1(self) -> list[tuple[int, int]]:
        return self.edges[0::2]

    @property
    def m2(self) -> list[tuple[int, int]]:
        return self.edges[1::2]


@dataclass
class PipageStep:
    walk: Walk
    eps1: float
    eps2: float
    old_values: np.ndarray
    candidate_low: np.ndarray
    candidate_high: np.ndarray


@dataclass
class RoundingTrace:
    scheme: str = ""
    steps: int = 0
    objective_path: list[float] = field(default_factory=list)


def _find_cycle(support: FractionalSupport) -> list[int] | None:
    state: dict[int, int] = {}  # 1 = on the DFS path, 2 = finished
    for root in support.active_vertices():
        if root in state:
            continue
        path = [root]
        position = {root: 0}
        state[root] = 1
        stack = [(root, -1, iter(support.neighbors(root)))]
        while stack:
            vertex, parent, neighbors = stack[-1]
            pushed = False
            for w in neighbors:
                if w == parent:
                    continue
                marker = state.get(w)
                if marker == 1:
                    return path[position[w]:]
                if marker is None:
                    state[w] = 1
                    position[w] = len(path)
                    path.append(w)
                    stack.append((w, vertex, iter(support.neighbors(w))))
                    pushed = True
                    break
            if not pushed:
                stack.pop()
                path.pop()
                del position[vertex]
                state[vertex] = 2
    return None


def _find_path(support: FractionalSupport) -> list[int]:
    leaves = [x for x in support.active_vertices() if support.degree(x) == 1]
    start = leaves[0]
    path = [start]
    previous = -1
    current = start
    while True:
        onward = [w for w in support.neighbors(current) if w != previous]
        if not onward:
            break
        previous, current = current, onward[0]
        path.append(current)
        if support.degree(current) == 1:
            break
    return path


def find_walk(support: FractionalSupport) -> Walk:
    """A cycle of the support when one exists, otherwise a path between two degree-1 vertices."""
    if not support:
        raise RoundingError("find_walk needs a non-empty fractional support.")
    cycle = _find_cycle(support)
    if cycle is not None:
        closed = cycle + [cycle[0]]
        edges = [support.coord(a, b) for a, b in zip(closed, closed[1:])]
        return Walk(cycle, edges, True)
    path = _find_path(support)
    edges = [support.coord(a, b) for a, b in zip(path, path[1:])]
    return Walk(path, edges, False)


def plan_step(y: np.ndarray, walk: Walk, tol: float) -> PipageStep:
    v_idx = np.array([v for v, _ in walk.edges], dtype=np.int64)
    t_idx = np.array([t for _, t in walk.edges], dtype=np.int64)
    old = y[v_idx, t_idx].copy()
    sign = np.where(np.arange(len(old)) % 2 == 0, 1.0, -1.0)
    in_m1 = sign > 0
    # y(-eps): M1 goes down, M2 goes up; y(+eps) the other way round
    eps1 = float(min(old[in_m1].min(), (1.0 - old[~in_m1]).min(initial=np.inf)))
    eps2 = float(min((1.0 - old[in_m1]).min(), old[~in_m1].min(initial=np.inf)))
    low = _snap(old - sign * eps1, tol)
    high = _snap(old + sign * eps2, tol)
    return PipageStep(walk, eps1, eps2, old, low, high)


def _snap(values: np.ndarray, tol: float) -> np.ndarray:
    values = np.clip(values, 0.0, 1.0)
    values[values <= tol] = 0.0
    values[values >= 1.0 - tol] = 1.0
    return values


# ----------------------------------------------------------------------
# Incremental objective
# ----------------------------------------------------------------------
class _ObjectiveDelta:
    """Exact change of F when a few rows of y change."""

    def __init__(self, inst: Instance) -> None:
        self.lam = inst.lam
        self.pref = inst.pref_dense
        self.adjacency = inst.adjacency

    def __call__(self, y: np.ndarray, edges: list[tuple[int, int]], new_values: np.ndarray) -> float:
        rows = sorted({v for v, _ in edges})
        slot = {v: i for i, v in enumerate(rows)}
        D = np.zeros((len(rows), y.shape[1]))
        for (v, t), value in zip(edges, new_values):
            D[slot[v], t] = value - y[v, t]
        linear = self.lam * float(np.sum(self.pref[rows] * D))
        block = self.adjacency[rows]
        WY = block @ y
        WD = block[:, rows] @ D
        social = -(float(np.sum(D * WY)) + 0.5 * float(np.sum(D * WD)))
        return linear + social


# ----------------------------------------------------------------------
# Rounding driver
# ----------------------------------------------------------------------
class _PipageRunner:
    def __init__(self, inst: Instance, y: FractionalSolution, trace: RoundingTrace | None) -> None:
        require_feasible(inst, y)
        self.inst = inst
        self.tol = int_tol()
        self.y = _snap(np.array(y.values, dtype=np.float64), self.tol)
        self.support = FractionalSupport(self.y, self.tol)
        self.trace = trace if trace is not None else RoundingTrace()
        self.trace.steps = 0
        self._settle_rows(range(inst.n_nodes))

    def _settle_rows(self, nodes: Iterable[int]) -> None:
        # a row with a single fractional entry is integral up to round-off
        for v in nodes:
            tasks = self.support.node_adj[v]
            if len(tasks) != 1:
                continue
            (t,) = tuple(tasks)
            rest = float(self.y[v].sum() - self.y[v, t])
            self.y[v, t] = 0.0 if rest >= 0.5 else 1.0
            self.support.refresh([(v, t)])
            logger.debug("Finalized lone fractional entry (%d, %d) -> %g", v, t, self.y[v, t])

    def _apply(self, step: PipageStep, values: np.ndarray) -> None:
        edges = step.walk.edges
        for (v, t), value in zip(edges, values):
            self.y[v, t] = value
        self.support.refresh(edges)
        self._settle_rows({v for v, _ in edges})
        if not step.walk.is_cycle:
            tasks = {edges[0][1], edges[-1][1]}
            loads = self.y[:, sorted(tasks)].sum(axis=0)
            caps = self.inst.capacities[sorted(tasks)]
            if np.any(loads > caps + feas_tol()):
                raise RoundingError(
                    "Pipage step pushed a task over capacity; fractional/integral classification is off."
                )
        self.trace.steps += 1

    def run(self, choose: Callable[[PipageStep], np.ndarray]) -> Assignment:
        limit = self.support.n_edges + self.inst.n_nodes + 1
        while self.support:
            if self.trace.steps > limit:
                raise RoundingError("Pipage rounding did not shrink the fractional support.")
            walk = find_walk(self.support)
            step = plan_step(self.y, walk, self.tol)
            self._apply(step, choose(step))
        return self._finish()

    def _finish(self) -> Assignment:
        x = np.rint(self.y)
        row_sums = x.sum(axis=1)
        if not np.all(row_sums == 1):
            bad = int(np.flatnonzero(row_sums != 1)[0])
            raise RoundingError(f"Rounded row for {self.inst.node_ids[bad]!r} sums to {row_sums[bad]:g}.")
        assignment = Assignment(np.argmax(x, axis=1))
        report = feasible(self.inst, assignment)
        if not report.ok:
            raise RoundingError(f"Rounded assignment is infeasible: {report.describe()}")
        return assignment


def pipage_round(
    inst: Instance,
    y: FractionalSolution,
    objective: Callable[[np.ndarray], float] | None = None,
    *,
    trace: RoundingTrace | None = None,
) -> Assignment:
    """
    Deterministic pipage rounding: at each step keep the candidate with the
    larger F. `objective` overrides the built-in incremental evaluation of F.
    """
    runner = _PipageRunner(inst, y, trace)
    runner.trace.scheme = SCHEME_DETERMINISTIC
    delta = _ObjectiveDelta(inst)
    current = objective(runner.y) if objective is not None else objective_value(inst, runner.y)
    runner.trace.objective_path = [current]
    start_value = current

    def choose(step: PipageStep) -> np.ndarray:
        nonlocal current
        if objective is None:
            gain_low = delta(runner.y, step.walk.edges, step.candidate_low)
            gain_high = delta(runner.y, step.walk.edges, step.candidate_high)
        else:
            gain_low = _full_gain(objective, runner.y, step, step.candidate_low, current)
            gain_high = _full_gain(objective, runner.y, step, step.candidate_high, current)
        if gain_low > gain_high:
            chosen, gain = step.candidate_low, gain_low
        else:
            chosen, gain = step.candidate_high, gain_high
        if gain < -1e-9 * max(1.0, abs(current)):
            raise RoundingError(f"Pipage step decreased F by {-gain:.3e}.")
        current += gain
        runner.trace.objective_path.append(current)
        return chosen

    assignment = runner.run(choose)
    logger.debug(
        "Pipage rounding: %d steps, F %.6f -> %.6f", runner.trace.steps, start_value, current
    )
    return assignment


def _full_gain(
    objective: Callable[[np.ndarray], float],
    y: np.ndarray,
    step: PipageStep,
    values: np.ndarray,
    current: float,
) -> float:
    trial = y.copy()
    for (v, t), value in zip(step.walk.edges, values):
        trial[v, t] = value
    return objective(trial) - current


def randomized_pipage_round(
    inst: Instance,
    y: FractionalSolution,
    seed: SeedLike,
    *,
    trace: RoundingTrace | None = None,
) -> Assignment:
    """
    Randomized pipage rounding: y(-eps1) with probability eps2 / (eps1 + eps2),
    otherwise y(+eps2). Never evaluates F.
    """
    rng = make_rng(seed)
    runner = _PipageRunner(inst, y, trace)
    runner.trace.scheme = SCHEME_RANDOMIZED

    def choose(step: PipageStep) -> np.ndarray:
        p_low = step.eps2 / (step.eps1 + step.eps2)
        return step.candidate_low if rng.random() < p_low else step.candidate_high

    return runner.run(choose)


def round_solution(
    inst: Instance,
    y: FractionalSolution,
    scheme: str,
    seed: SeedLike = None,
) -> Assignment:
    if scheme == SCHEME_DETERMINISTIC:
        return pipage_round(inst, y)
    if scheme == SCHEME_RANDOMIZED:
        return randomized_pipage_round(inst, y, seed)
    raise ValueError(f"Unknown rounding scheme {scheme!r}.")
