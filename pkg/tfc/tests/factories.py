"""Small random instances and independent (slow, obvious) reference computations for the tests."""
from __future__ import annotations

import itertools

import numpy as np

from tfc.services.baselines import random_assign
from tfc.services.model import Assignment, FractionalSolution, Instance


def random_instance(
    rng: np.random.Generator,
    n: int,
    k: int,
    *,
    edge_prob: float = 0.5,
    lam: float | None = None,
    alpha: float | None = None,
    pref_density: float = 0.6,
) -> Instance:
    capacities = rng.integers(0, n + 1, size=k)
    while capacities.sum() < n:
        capacities[rng.integers(k)] += 1
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < edge_prob]
    eu = np.array([u for u, _ in pairs], dtype=np.int64)
    ev = np.array([v for _, v in pairs], dtype=np.int64)
    ew = rng.uniform(0.1, 2.0, size=len(pairs))
    pref = rng.random((n, k)) * (rng.random((n, k)) < pref_density)
    if lam is None and alpha is None:
        lam = float(rng.uniform(0.2, 2.0))
    return Instance.from_arrays(
        [f"v{i}" for i in range(n)],
        [f"t{j}" for j in range(k)],
        capacities,
        eu,
        ev,
        ew,
        pref,
        lam=lam,
        alpha=alpha,
    )


def random_fractional(inst: Instance, rng: np.random.Generator, parts: int = 3) -> FractionalSolution:
    """Convex combination of random feasible assignments, so always feasible."""
    weights = rng.dirichlet(np.ones(parts))
    values = np.zeros((inst.n_nodes, inst.n_tasks))
    for weight in weights:
        x = random_assign(inst, int(rng.integers(0, 2**31 - 1)))
        values += weight * x.to_matrix(inst.n_tasks)
    return FractionalSolution(values)


def twin_instance(rng: np.random.Generator, n: int = 5, k: int = 3) -> tuple[Instance, int, int]:
    """Random instance plus one extra node copying the conflict row and preferences of node 0."""
    base = random_instance(rng, n, k)
    twin = n
    neighbours = np.concatenate([base.edge_v[base.edge_u == 0], base.edge_u[base.edge_v == 0]])
    weights = np.concatenate([base.edge_w[base.edge_u == 0], base.edge_w[base.edge_v == 0]])
    capacities = base.capacities.copy()
    capacities[0] += 1
    pref = np.vstack([base.pref_dense, base.pref_dense[0]])
    inst = Instance.from_arrays(
        list(base.node_ids) + [f"v{twin}"],
        base.task_ids,
        capacities,
        np.concatenate([base.edge_u, np.full(len(neighbours), twin)]),
        np.concatenate([base.edge_v, neighbours]),
        np.concatenate([base.edge_w, weights]),
        pref,
        lam=base.lam,
    )
    return inst, 0, twin


def naive_F(inst: Instance, y: np.ndarray) -> float:
    """Double loop over conflict pairs and tasks."""
    weight = {}
    for u, v, w in zip(inst.edge_u, inst.edge_v, inst.edge_w):
        weight[(int(u), int(v))] = float(w)
    total = 0.0
    for v in range(inst.n_nodes):
        for t in range(inst.n_tasks):
            total += inst.lam * inst.pref_dense[v, t] * y[v, t]
    for u in range(inst.n_nodes):
        for v in range(u + 1, inst.n_nodes):
            w = weight.get((u, v), weight.get((v, u), 0.0))
            together = sum(y[u, t] * y[v, t] for t in range(inst.n_tasks))
            total += w * (1.0 - together)
    return total


def naive_feasible(inst: Instance, labels: np.ndarray) -> bool:
    if len(labels) != inst.n_nodes:
        return False
    counts = [0] * inst.n_tasks
    for label in labels:
        if label < 0 or label >= inst.n_tasks:
            return False
        counts[label] += 1
    return all(c <= p for c, p in zip(counts, inst.capacities))


def all_assignments(inst: Instance):
    for labels in itertools.product(range(inst.n_tasks), repeat=inst.n_nodes):
        labels = np.array(labels, dtype=np.int64)
        if naive_feasible(inst, labels):
            yield Assignment(labels)


def brute_force_optimum(inst: Instance) -> float:
    return max(naive_F(inst, x.to_matrix(inst.n_tasks)) for x in all_assignments(inst))


def greedy_counterexample(W: float = 100.0, eps: float = 0.1) -> Instance:
    return Instance.build(
        ["u", "v", "z"],
        ["t1", "t2"],
        {"t1": 1, "t2": 2},
        [("v", "z", W)],
        {("u", "t1"): 1.0 - eps, ("v", "t2"): eps},
        lam=1.0,
    )
