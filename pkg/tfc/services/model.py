# tfc/services/model.py
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from django.conf import settings
from scipy import sparse

from tfc.constants import DEFAULT_FEAS_TOL
from tfc.exceptions import DimensionError, InfeasibleSolutionError, InstanceError


def feas_tol() -> float:
    return float(getattr(settings, "TFC_FEAS_TOL", DEFAULT_FEAS_TOL))


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def resolve_lambda(alpha: float, total_weight: float, n_nodes: int) -> float:
    """lambda = alpha * w(E) / |V|, i.e. alpha times half the average conflict degree."""
    if n_nodes <= 0:
        return 0.0
    return float(alpha) * float(total_weight) / float(n_nodes)


@dataclass(frozen=True, eq=False)
class Instance:
    """
    A TFC instance with dense indices: nodes 0..n-1, tasks 0..k-1.

    Conflict edges are kept as parallel arrays in input order, preferences as a
    sparse (n x k) matrix. Use `Instance.build` for id-based input and
    `Instance.from_arrays` for generator output.
    """

    node_ids: tuple[str, ...]
    task_ids: tuple[str, ...]
    capacities: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    preferences: sparse.csr_matrix
    lam: float
    alpha: float | None = None

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------
    @classmethod
    def build(
        cls,
        node_ids: Sequence[str],
        task_ids: Sequence[str],
        capacities: Mapping[str, int],
        conflict_edges: Iterable[tuple[str, str, float]],
        preferences: Mapping[tuple[str, str], float],
        *,
        lam: float | None = None,
        alpha: float | None = None,
    ) -> "Instance":
        nodes = tuple(str(v) for v in node_ids)
        tasks = tuple(str(t) for t in task_ids)
        node_index = _index_of(nodes, "node")
        task_index = _index_of(tasks, "task")

        missing = [t for t in tasks if t not in capacities]
        if missing:
            raise InstanceError(f"Missing capacity for tasks: {', '.join(missing)}")
        caps = np.array([capacities[t] for t in tasks], dtype=object)

        eu: list[int] = []
        ev: list[int] = []
        ew: list[float] = []
        for u, v, w in conflict_edges:
            try:
                eu.append(node_index[str(u)])
                ev.append(node_index[str(v)])
            except KeyError as exc:
                raise InstanceError(f"Conflict edge references unknown node {exc}") from exc
            ew.append(float(w))

        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []
        for (v, t), c in preferences.items():
            if str(v) not in node_index:
                raise InstanceError(f"Preference references unknown node {v!r}")
            if str(t) not in task_index:
                raise InstanceError(f"Preference references unknown task {t!r}")
            rows.append(node_index[str(v)])
            cols.append(task_index[str(t)])
            vals.append(float(c))

        return cls.from_arrays(
            nodes,
            tasks,
            caps,
            np.array(eu, dtype=np.int64),
            np.array(ev, dtype=np.int64),
            np.array(ew, dtype=np.float64),
            (np.array(vals, dtype=np.float64), np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)),
            lam=lam,
            alpha=alpha,
        )

    @classmethod
    def from_arrays(
        cls,
        node_ids: Sequence[str],
        task_ids: Sequence[str],
        capacities: Sequence[int] | np.ndarray,
        edge_u: np.ndarray,
        edge_v: np.ndarray,
        edge_w: np.ndarray,
        preferences: np.ndarray | sparse.spmatrix | tuple[np.ndarray, np.ndarray, np.ndarray],
        *,
        lam: float | None = None,
        alpha: float | None = None,
    ) -> "Instance":
        nodes = tuple(str(v) for v in node_ids)
        tasks = tuple(str(t) for t in task_ids)
        n, k = len(nodes), len(tasks)
        _index_of(nodes, "node")
        _index_of(tasks, "task")
        if k == 0:
            raise InstanceError("An instance needs at least one task.")

        caps = _validate_capacities(capacities, k)
        if int(caps.sum()) < n:
            raise InstanceError(
                f"Total capacity {int(caps.sum())} is smaller than the number of individuals {n}."
            )

        eu = np.asarray(edge_u, dtype=np.int64).ravel().copy()
        ev = np.asarray(edge_v, dtype=np.int64).ravel().copy()
        ew = np.asarray(edge_w, dtype=np.float64).ravel().copy()
        _validate_edges(eu, ev, ew, n, nodes)

        if isinstance(preferences, tuple):
            vals, rows, cols = preferences
            pref = sparse.csr_matrix((vals, (rows, cols)), shape=(n, k), dtype=np.float64)
            if pref.nnz != len(vals) and len(vals) > 0:
                # csr sums duplicates; a duplicate (v, t) pair is a data error
                keys = np.asarray(rows, dtype=np.int64) * k + np.asarray(cols, dtype=np.int64)
                if len(np.unique(keys)) != len(keys):
                    raise InstanceError("Duplicate preference entry for the same (node, task).")
        else:
            pref = sparse.csr_matrix(preferences, dtype=np.float64)
            if pref.shape != (n, k):
                raise InstanceError(f"Preference matrix shape {pref.shape} does not match ({n}, {k}).")
        pref.eliminate_zeros()
        pref.sort_indices()
        if pref.nnz and (pref.data.min() < 0.0 or pref.data.max() > 1.0 or not np.all(np.isfinite(pref.data))):
            raise InstanceError("Preferences c_vt must lie in [0, 1].")

        total_weight = float(ew.sum())
        if lam is not None and alpha is not None:
            raise InstanceError("Specify either lambda or alpha, not both.")
        if alpha is not None:
            if alpha < 0 or not np.isfinite(alpha):
                raise InstanceError(f"alpha must be a non-negative real, got {alpha}.")
            resolved = resolve_lambda(alpha, total_weight, n)
        else:
            resolved = 0.0 if lam is None else float(lam)
        if resolved < 0 or not np.isfinite(resolved):
            raise InstanceError(f"lambda must be a non-negative real, got {resolved}.")

        return cls(
            node_ids=nodes,
            task_ids=tasks,
            capacities=_frozen(caps),
            edge_u=_frozen(eu),
            edge_v=_frozen(ev),
            edge_w=_frozen(ew),
            preferences=pref,
            lam=resolved,
            alpha=None if alpha is None else float(alpha),
        )

    # ------------------------------------------------------------------
    # Derived views
    # ------------------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_tasks(self) -> int:
        return len(self.task_ids)

    @property
    def n_edges(self) -> int:
        return int(self.edge_w.shape[0])

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.node_ids)}

    @cached_property
    def task_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.task_ids)}

    @cached_property
    def pref_dense(self) -> np.ndarray:
        """Dense (n x k) preference matrix c."""
        return _frozen(np.asarray(self.preferences.toarray(), dtype=np.float64))

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric sparse conflict matrix W with W[u, v] = w_uv."""
        n = self.n_nodes
        rows = np.concatenate([self.edge_u, self.edge_v])
        cols = np.concatenate([self.edge_v, self.edge_u])
        data = np.concatenate([self.edge_w, self.edge_w])
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    @cached_property
    def weighted_degree(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.float64)
        np.add.at(deg, self.edge_u, self.edge_w)
        np.add.at(deg, self.edge_v, self.edge_w)
        return _frozen(deg)

    def preference_map(self) -> dict[tuple[str, str], float]:
        coo = self.preferences.tocoo()
        return {
            (self.node_ids[r], self.task_ids[c]): float(val)
            for r, c, val in zip(coo.row, coo.col, coo.data)
        }

    def conflict_edges(self) -> list[tuple[str, str, float]]:
        return [
            (self.node_ids[u], self.node_ids[v], float(w))
            for u, v, w in zip(self.edge_u, self.edge_v, self.edge_w)
        ]

    def capacity_map(self) -> dict[str, int]:
        return {t: int(p) for t, p in zip(self.task_ids, self.capacities)}

    # ------------------------------------------------------------------
    # Modified copies
    # ------------------------------------------------------------------
    def with_lambda(self, lam: float) -> "Instance":
        return self._copy(lam=lam, alpha=None)

    def with_alpha(self, alpha: float) -> "Instance":
        return self._copy(lam=None, alpha=alpha)

    def with_edge_mask(self, keep: np.ndarray) -> "Instance":
        """Copy keeping only the conflict edges where `keep` is true; lambda is kept as resolved."""
        keep = np.asarray(keep, dtype=bool)
        return Instance.from_arrays(
            self.node_ids,
            self.task_ids,
            self.capacities,
            self.edge_u[keep],
            self.edge_v[keep],
            self.edge_w[keep],
            self.preferences,
            lam=self.lam,
        )

    def _copy(self, *, lam: float | None, alpha: float | None) -> "Instance":
        return Instance.from_arrays(
            self.node_ids,
            self.task_ids,
            self.capacities,
            self.edge_u,
            self.edge_v,
            self.edge_w,
            self.preferences,
            lam=lam,
            alpha=alpha,
        )


def _index_of(ids: tuple[str, ...], label: str) -> dict[str, int]:
    index: dict[str, int] = {}
    for i, value in enumerate(ids):
        if value in index:
            raise InstanceError(f"Duplicate {label} id {value!r}.")
        index[value] = i
    return index


def _validate_capacities(capacities: Sequence[int] | np.ndarray, k: int) -> np.ndarray:
    raw = list(np.asarray(capacities, dtype=object).ravel())
    if len(raw) != k:
        raise InstanceError(f"Expected {k} capacities, got {len(raw)}.")
    caps = np.zeros(k, dtype=np.int64)
    for i, value in enumerate(raw):
        try:
            as_float = float(value)
        except (TypeError, ValueError) as exc:
            raise InstanceError(f"Capacity {value!r} is not a number.") from exc
        if not np.isfinite(as_float) or as_float != int(as_float) or as_float < 0:
            raise InstanceError(f"Capacities must be non-negative integers, got {value!r}.")
        caps[i] = int(as_float)
    return caps


def _validate_edges(eu: np.ndarray, ev: np.ndarray, ew: np.ndarray, n: int, nodes: tuple[str, ...]) -> None:
    if not (len(eu) == len(ev) == len(ew)):
        raise InstanceError("Edge arrays must have the same length.")
    if len(eu) == 0:
        return
    if eu.min() < 0 or ev.min() < 0 or eu.max() >= n or ev.max() >= n:
        raise InstanceError("Conflict edge references a node outside the instance.")
    loops = np.flatnonzero(eu == ev)
    if len(loops):
        raise InstanceError(f"Self-loop conflict edge on node {nodes[eu[loops[0]]]!r}.")
    if not np.all(np.isfinite(ew)) or ew.min() < 0:
        raise InstanceError("Conflict weights must be finite and non-negative.")
    keys = np.minimum(eu, ev) * n + np.maximum(eu, ev)
    unique, counts = np.unique(keys, return_counts=True)
    if len(unique) != len(keys):
        dup = int(unique[np.argmax(counts > 1)])
        a, b = divmod(dup, n)
        raise InstanceError(f"Duplicate conflict edge ({nodes[a]!r}, {nodes[b]!r}).")


# ----------------------------------------------------------------------
# Solutions
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Assignment:
    """Integral solution: labels[v] is the task index of individual v."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64).ravel()
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_mapping(cls, inst: Instance, mapping: Mapping[str, str]) -> "Assignment":
        labels = np.full(inst.n_nodes, -1, dtype=np.int64)
        for node, task in mapping.items():
            try:
                labels[inst.node_index[str(node)]] = inst.task_index[str(task)]
            except KeyError as exc:
                raise DimensionError(f"Assignment references unknown id {exc}") from exc
        return cls(labels)

    def as_mapping(self, inst: Instance) -> dict[str, str]:
        return {inst.node_ids[v]: inst.task_ids[t] for v, t in enumerate(self.labels) if t >= 0}

    def to_matrix(self, n_tasks: int) -> np.ndarray:
        matrix = np.zeros((len(self.labels), n_tasks), dtype=np.float64)
        assigned = self.labels >= 0
        matrix[np.flatnonzero(assigned), self.labels[assigned]] = 1.0
        return matrix

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def __hash__(self) -> int:
        return hash(self.labels.tobytes())


@dataclass(frozen=True, eq=False)
class FractionalSolution:
    """Fractional solution y in [0,1]^(n x k)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionError(f"Fractional solution must be a matrix, got shape {values.shape}.")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_assignment(cls, x: Assignment, n_tasks: int) -> "FractionalSolution":
        return cls(x.to_matrix(n_tasks))

    def is_integral(self, tol: float = 1e-9) -> bool:
        v = self.values
        return bool(np.all((v <= tol) | (v >= 1.0 - tol)))


Solution = Union[Assignment, FractionalSolution]


@dataclass(frozen=True)
class ObjectiveBreakdown:
    task_satisfaction: float
    social_satisfaction: float
    lam: float
    total: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "total", self.lam * self.task_satisfaction + self.social_satisfaction)

    def to_payload(self) -> dict[str, float]:
        return {
            "task_satisfaction": self.task_satisfaction,
            "social_satisfaction": self.social_satisfaction,
            "lambda": self.lam,
            "total": self.total,
        }


@dataclass(frozen=True)
class Violation:
    kind: str  # "assignment" | "capacity" | "bounds"
    key: str
    value: float
    bound: float

    def describe(self) -> str:
        if self.kind == "capacity":
            return f"task {self.key!r} holds {self.value:g} > capacity {self.bound:g}"
        if self.kind == "assignment":
            return f"individual {self.key!r} has assignment sum {self.value:g} != {self.bound:g}"
        return f"entry {self.key!r} = {self.value:g} outside [0, 1]"


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        return "; ".join(v.describe() for v in self.violations) or "feasible"


def _check_dimensions(inst: Instance, x: Solution) -> None:
    if isinstance(x, Assignment):
        if x.labels.shape[0] != inst.n_nodes:
            raise DimensionError(
                f"Assignment covers {x.labels.shape[0]} individuals, instance has {inst.n_nodes}."
            )
    elif isinstance(x, FractionalSolution):
        if x.values.shape != (inst.n_nodes, inst.n_tasks):
            raise DimensionError(
                f"Fractional solution has shape {x.values.shape}, expected ({inst.n_nodes}, {inst.n_tasks})."
            )
    else:
        raise DimensionError(f"Unsupported solution type {type(x).__name__}.")


def feasible(inst: Instance, x: Assignment) -> FeasibilityReport:
    """Assignment and capacity constraints for an integral solution; unassigned individuals are violations."""
    _check_dimensions(inst, x)
    violations: list[Violation] = []
    labels = x.labels
    bad = np.flatnonzero((labels < 0) | (labels >= inst.n_tasks))
    for v in bad:
        violations.append(Violation("assignment", inst.node_ids[v], 0.0, 1.0))
    counts = np.bincount(labels[(labels >= 0) & (labels < inst.n_tasks)], minlength=inst.n_tasks)
    for t in np.flatnonzero(counts > inst.capacities):
        violations.append(Violation("capacity", inst.task_ids[t], float(counts[t]), float(inst.capacities[t])))
    return FeasibilityReport(tuple(violations))


def fractional_feasible(inst: Instance, y: FractionalSolution, tol: float | None = None) -> FeasibilityReport:
    _check_dimensions(inst, y)
    tol = feas_tol() if tol is None else tol
    values = y.values
    violations: list[Violation] = []
    out = np.argwhere((values < -tol) | (values > 1.0 + tol))
    for v, t in out[:10]:
        violations.append(
            Violation("bounds", f"{inst.node_ids[v]}/{inst.task_ids[t]}", float(values[v, t]), 1.0)
        )
    row_sums = values.sum(axis=1)
    for v in np.flatnonzero(np.abs(row_sums - 1.0) > tol):
        violations.append(Violation("assignment", inst.node_ids[v], float(row_sums[v]), 1.0))
    col_sums = values.sum(axis=0)
    for t in np.flatnonzero(col_sums > inst.capacities + tol):
        violations.append(Violation("capacity", inst.task_ids[t], float(col_sums[t]), float(inst.capacities[t])))
    return FeasibilityReport(tuple(violations))


def require_feasible(inst: Instance, x: Solution) -> None:
    report = feasible(inst, x) if isinstance(x, Assignment) else fractional_feasible(inst, x)
    if not report.ok:
        raise InfeasibleSolutionError(f"Infeasible solution: {report.describe()}", report.violations)


def total_conflict_weight(inst: Instance) -> float:
    return float(inst.edge_w.sum())


def evaluate_F(inst: Instance, x: Solution) -> ObjectiveBreakdown:
    """
    F(x) = lambda * sum c_vt x_vt + sum_(u,v) w_uv (1 - sum_t x_ut x_vt).

    Integral and fractional inputs share the same definition; integral input
    takes the label path (a conflict counts only when the endpoints differ).
    """
    _check_dimensions(inst, x)
    require_feasible(inst, x)
    if isinstance(x, Assignment):
        labels = x.labels
        task_sat = float(inst.pref_dense[np.arange(inst.n_nodes), labels].sum())
        cut = labels[inst.edge_u] != labels[inst.edge_v]
        social = float(inst.edge_w[cut].sum())
    else:
        y = x.values
        task_sat = float(np.sum(inst.pref_dense * y))
        social = social_term(inst, y)
    return ObjectiveBreakdown(task_sat, social, inst.lam)


def social_term(inst: Instance, y: np.ndarray) -> float:
    if inst.n_edges == 0:
        return 0.0
    together = np.einsum("ij,ij->i", y[inst.edge_u], y[inst.edge_v])
    return float(np.dot(inst.edge_w, 1.0 - together))


def objective_value(inst: Instance, y: np.ndarray) -> float:
    """F on a raw matrix, without feasibility checks (used inside rounding loops)."""
    return inst.lam * float(np.sum(inst.pref_dense * y)) + social_term(inst, y)


# ----------------------------------------------------------------------
# Max-Cut reduction fixture
# ----------------------------------------------------------------------
def maxcut_instance(node_ids: Sequence[str], edges: Iterable[tuple[str, str, float]]) -> Instance:
    """Two tasks with capacity |V| each and all preferences zero: F is a cut weight."""
    nodes = list(node_ids)
    n = len(nodes)
    return Instance.build(nodes, ["left", "right"], {"left": n, "right": n}, edges, {}, lam=0.0)


def cut_weight(inst: Instance, side: Sequence[int] | np.ndarray) -> float:
    side = np.asarray(side)
    return float(inst.edge_w[side[inst.edge_u] != side[inst.edge_v]].sum())

