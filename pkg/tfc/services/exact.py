# tfc/services/exact.py
"""
Exact optimum for small instances.

Depth-first branch and bound over individuals sorted by decreasing weighted
conflict degree; tasks are tried by decreasing lambda * c_vt. The bound of a
partial assignment is its value plus lambda * max_t c_vt for every open
individual plus the weight of every edge with an open endpoint (counted as
cut). Among optimal assignments the lexicographically smallest label vector
(original node order) is returned. `solve_exhaustive` enumerates all |T|^|V|
label vectors and serves both as oracle and as fallback when the node budget
runs out on an enumerable instance.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from tfc.constants import DEFAULT_ENUMERATION_LIMIT, DEFAULT_EXACT_NODE_BUDGET
from tfc.exceptions import BudgetExceeded, InstanceError
from tfc.services.baselines import greedy, partial_objective
from tfc.services.model import Assignment, Instance

logger = logging.getLogger(__name__)

ENUMERATION_BATCH = 1 << 16


def _tie_tol(value: float) -> float:
    return 1e-9 * max(1.0, abs(value))


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    diff = np.flatnonzero(a != b)
    return bool(diff.size) and bool(a[diff[0]] < b[diff[0]])


@dataclass(frozen=True)
class SearchNode:
    """Partial assignment (label -1 = open) with its used capacity and admissible bound."""

    prefix: np.ndarray
    used_capacity: np.ndarray
    bound: float

    @classmethod
    def from_labels(cls, inst: Instance, labels: np.ndarray) -> "SearchNode":
        labels = np.asarray(labels, dtype=np.int64)
        assigned = labels >= 0
        used = np.bincount(labels[assigned], minlength=inst.n_tasks)
        best_pref = inst.pref_dense.max(axis=1) if inst.n_tasks else np.zeros(inst.n_nodes)
        open_pref = inst.lam * float(best_pref[~assigned].sum())
        open_edges = ~(assigned[inst.edge_u] & assigned[inst.edge_v])
        bound = partial_objective(inst, labels) + open_pref + float(inst.edge_w[open_edges].sum())
        return cls(labels, used, bound)


@dataclass
class ExactResult:
    assignment: Assignment
    value: float
    method: str  # "branch_and_bound" | "enumeration"
    nodes: int = 0
    seconds: float = 0.0


class _BudgetSignal(Exception):
    def __init__(self, bound: float) -> None:
        super().__init__("node budget exhausted")
        self.open_bounds = [bound]


class _BranchAndBound:
    def __init__(self, inst: Instance, budget: int) -> None:
        self.inst = inst
        self.budget = budget
        n, k = inst.n_nodes, inst.n_tasks
        self.order = np.argsort(-inst.weighted_degree, kind="stable")
        self.scaled = inst.lam * inst.pref_dense
        self.task_order = [np.argsort(-self.scaled[v], kind="stable") for v in range(n)]

        position = np.empty(n, dtype=np.int64)
        position[self.order] = np.arange(n)
        best_pref = self.scaled.max(axis=1) if k else np.zeros(n)
        self.pref_suffix = np.concatenate([np.cumsum(best_pref[self.order][::-1])[::-1], [0.0]])
        # weight of edges still undecided when `depth` individuals are placed
        closes_at = np.maximum(position[inst.edge_u], position[inst.edge_v])
        per_depth = np.bincount(closes_at, weights=inst.edge_w, minlength=n) if inst.n_edges else np.zeros(n)
        self.open_weight = np.concatenate([np.cumsum(per_depth[::-1])[::-1], [0.0]])

        self.adjacency = inst.adjacency
        self.labels = np.full(n, -1, dtype=np.int64)
        self.remaining = inst.capacities.astype(np.int64).copy()
        self.to_placed = np.zeros(n)
        self.to_task = np.zeros((n, k))
        self.nodes = 0

        seed = greedy(inst)
        self.best_labels = seed.labels.copy()
        self.best_value = partial_objective(inst, seed.labels)

    def _rest(self, depth: int) -> float:
        return float(self.pref_suffix[depth] + self.open_weight[depth])

    def _gain(self, v: int, t: int) -> float:
        return float(self.scaled[v, t] + self.to_placed[v] - self.to_task[v, t])

    def _move(self, v: int, t: int, sign: float) -> None:
        start, end = self.adjacency.indptr[v], self.adjacency.indptr[v + 1]
        neighbours = self.adjacency.indices[start:end]
        weights = sign * self.adjacency.data[start:end]
        self.to_placed[neighbours] += weights
        self.to_task[neighbours, t] += weights

    def _place(self, v: int, t: int) -> None:
        self.labels[v] = t
        self.remaining[t] -= 1
        self._move(v, t, 1.0)

    def _unplace(self, v: int, t: int) -> None:
        self._move(v, t, -1.0)
        self.remaining[t] += 1
        self.labels[v] = -1

    def _worth_exploring(self, bound: float) -> bool:
        tol = _tie_tol(self.best_value)
        if bound < self.best_value - tol:
            return False
        if bound > self.best_value + tol:
            return True
        # the subtree can at best tie: only a lexicographically smaller completion helps
        smallest = np.where(self.labels >= 0, self.labels, 0)
        return _lex_less(smallest, self.best_labels)

    def _offer(self, value: float) -> None:
        tol = _tie_tol(self.best_value)
        if value > self.best_value + tol or (
            value >= self.best_value - tol and _lex_less(self.labels, self.best_labels)
        ):
            self.best_value = value
            self.best_labels = self.labels.copy()

    def _child_bounds(self, depth: int, value: float, tasks: np.ndarray) -> list[float]:
        v = int(self.order[depth])
        return [
            value + self._gain(v, int(t)) + self._rest(depth + 1)
            for t in tasks
            if self.remaining[int(t)] > 0
        ]

    def descend(self, depth: int, value: float) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise _BudgetSignal(value + self._rest(depth))
        if depth == self.inst.n_nodes:
            self._offer(value)
            return
        v = int(self.order[depth])
        tasks = self.task_order[v]
        for pos, t in enumerate(tasks):
            t = int(t)
            if self.remaining[t] <= 0:
                continue
            gain = self._gain(v, t)
            self._place(v, t)
            if not self._worth_exploring(value + gain + self._rest(depth + 1)):
                self._unplace(v, t)
                continue
            try:
                self.descend(depth + 1, value + gain)
            except _BudgetSignal as signal:
                self._unplace(v, t)
                signal.open_bounds.extend(self._child_bounds(depth, value, tasks[pos + 1:]))
                raise
            self._unplace(v, t)


def _budget() -> int:
    return int(getattr(settings, "TFC_EXACT_NODE_BUDGET", DEFAULT_EXACT_NODE_BUDGET))


def _enumeration_limit() -> int:
    return int(getattr(settings, "TFC_ENUMERATION_LIMIT", DEFAULT_ENUMERATION_LIMIT))


def solve_exact(inst: Instance, budget: int | None = None) -> ExactResult:
    """
    Provably optimal assignment. Raises BudgetExceeded (incumbent, its value
    and a certified upper bound) when the node budget runs out and the
    instance is too large to enumerate.
    """
    started = time.perf_counter()
    budget = _budget() if budget is None else int(budget)
    search = _BranchAndBound(inst, budget)
    try:
        search.descend(0, 0.0)
    except _BudgetSignal as signal:
        bound = max([search.best_value, *signal.open_bounds])
        logger.warning(
            "Branch and bound stopped after %d nodes: incumbent %.6f, bound %.6f",
            search.nodes,
            search.best_value,
            bound,
        )
        if inst.n_tasks ** inst.n_nodes <= _enumeration_limit():
            result = solve_exhaustive(inst)
            result.nodes = search.nodes
            return result
        raise BudgetExceeded(
            f"Exact search exceeded {budget} nodes (gap {bound - search.best_value:.6g}).",
            incumbent=Assignment(search.best_labels),
            value=search.best_value,
            bound=bound,
        ) from None

    seconds = time.perf_counter() - started
    logger.info("Exact optimum %.6f after %d nodes in %.3fs", search.best_value, search.nodes, seconds)
    return ExactResult(Assignment(search.best_labels), search.best_value, "branch_and_bound", search.nodes, seconds)


def solve_exhaustive(inst: Instance, *, limit: int | None = None) -> ExactResult:
    """Enumerate every label vector in lexicographic order (node 0 most significant)."""
    started = time.perf_counter()
    n, k = inst.n_nodes, inst.n_tasks
    total = k ** n
    limit = _enumeration_limit() if limit is None else int(limit)
    if total > limit:
        raise InstanceError(f"{k}^{n} = {total} assignments exceed the enumeration limit {limit}.")

    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    rows = np.arange(n)
    best_value = -np.inf
    best_labels: np.ndarray | None = None
    for start in range(0, total, ENUMERATION_BATCH):
        index = np.arange(start, min(total, start + ENUMERATION_BATCH), dtype=np.int64)
        labels = (index[:, None] // powers[None, :]) % k
        counts = np.stack([(labels == t).sum(axis=1) for t in range(k)], axis=1)
        ok = np.all(counts <= inst.capacities[None, :], axis=1)
        if not ok.any():
            continue
        labels = labels[ok]
        values = inst.lam * inst.pref_dense[rows[None, :], labels].sum(axis=1)
        if inst.n_edges:
            cut = labels[:, inst.edge_u] != labels[:, inst.edge_v]
            values = values + cut.astype(np.float64) @ inst.edge_w
        batch_best = float(values.max())
        if best_labels is None or batch_best > best_value + _tie_tol(best_value):
            first = int(np.flatnonzero(values >= batch_best - _tie_tol(batch_best))[0])
            best_value = float(values[first])
            best_labels = labels[first].copy()

    if best_labels is None:
        raise InstanceError("No feasible assignment exists.")
    seconds = time.perf_counter() - started
    logger.debug("Exhaustive optimum %.6f over %d assignments in %.3fs", best_value, total, seconds)
    return ExactResult(Assignment(best_labels), best_value, "enumeration", total, seconds)
