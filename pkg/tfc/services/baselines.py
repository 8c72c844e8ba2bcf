# tfc/services/baselines.py
from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np

from tfc.exceptions import InstanceError
from tfc.services.model import Assignment, Instance
from tfc.services.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

StepCallback = Callable[[np.ndarray, float], None]


def partial_objective(inst: Instance, labels: np.ndarray) -> float:
    """
    F of a partial assignment (label -1 = unassigned): a conflict edge counts
    only when both endpoints are assigned to different tasks.
    """
    labels = np.asarray(labels)
    assigned = labels >= 0
    task_sat = float(inst.pref_dense[np.flatnonzero(assigned), labels[assigned]].sum())
    lu, lv = labels[inst.edge_u], labels[inst.edge_v]
    cut = (lu >= 0) & (lv >= 0) & (lu != lv)
    return inst.lam * task_sat + float(inst.edge_w[cut].sum())


def greedy(inst: Instance, *, on_step: Optional[StepCallback] = None) -> Assignment:
    """
    Assign, one pair per iteration, the (unassigned individual, non-full task)
    with the largest increase of F. Ties go to the lowest node index, then the
    lowest task index.
    """
    n, k = inst.n_nodes, inst.n_tasks
    base = inst.lam * inst.pref_dense
    adjacency = inst.adjacency
    labels = np.full(n, -1, dtype=np.int64)
    remaining = inst.capacities.astype(np.int64).copy()
    to_assigned = np.zeros(n)  # weight to assigned neighbours
    to_task = np.zeros((n, k))  # weight to neighbours assigned to each task

    for _ in range(n):
        gain = base + to_assigned[:, None] - to_task
        gain[labels >= 0, :] = -np.inf
        gain[:, remaining <= 0] = -np.inf
        flat = int(np.argmax(gain))
        v, t = divmod(flat, k)
        if not np.isfinite(gain[v, t]):
            raise InstanceError("Greedy ran out of capacity before assigning everyone.")
        labels[v] = t
        remaining[t] -= 1
        start, end = adjacency.indptr[v], adjacency.indptr[v + 1]
        neighbours = adjacency.indices[start:end]
        weights = adjacency.data[start:end]
        to_assigned[neighbours] += weights
        to_task[neighbours, t] += weights
        if on_step is not None:
            on_step(labels.copy(), float(gain[v, t]))

    return Assignment(labels)


def random_assign(inst: Instance, seed: SeedLike) -> Assignment:
    """Each individual, in index order, draws uniformly among tasks with remaining capacity."""
    rng = make_rng(seed)
    remaining = inst.capacities.astype(np.int64).copy()
    labels = np.empty(inst.n_nodes, dtype=np.int64)
    for v in range(inst.n_nodes):
        open_tasks = np.flatnonzero(remaining > 0)
        if open_tasks.size == 0:
            raise InstanceError("Random assignment ran out of capacity.")
        t = int(open_tasks[rng.integers(open_tasks.size)])
        labels[v] = t
        remaining[t] -= 1
    return Assignment(labels)
