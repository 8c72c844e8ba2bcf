# tfc/services/generators.py
"""
Dataset construction rules and synthetic generators.

Education-style data arrives as project rankings plus a friend list: the
conflict graph is the complement of the friend graph with unit weights and
preferences come from the ranks. The generators (Synth-TF, Company and
education-style) are seed-deterministic and return a `Dataset` holding the
instance together with the ground truth used by tests and metrics.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
from scipy import sparse

from tfc.constants import (
    COMPANY_ALPHA,
    COMPANY_DEPARTMENT_SIZE,
    COMPANY_DEPARTMENTS,
    COMPANY_MALE_SHARE,
    COMPANY_SWITCH_PROBABILITY,
    EDUCATION_ALPHA,
    EDUCATION_GROUP_SIZE,
    EDUCATION_P_IN,
    EDUCATION_P_OUT,
    EDUCATION_PROJECTS,
    EDUCATION_SHUFFLES,
    EDUCATION_STUDENTS,
    SYNTH_ALPHA,
    SYNTH_BLOCK_SIZE,
    SYNTH_BLOCKS,
    SYNTH_CAPACITY_SLACK,
    SYNTH_P_IN,
    SYNTH_P_OUT,
    SYNTH_TASKS,
)
from tfc.exceptions import InstanceError
from tfc.services.model import Assignment, Instance
from tfc.services.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

MALE = "male"
FEMALE = "female"


class PreferenceFunction(str, enum.Enum):
    INVERSE = "inverse"
    LINNORM = "linnorm"

    def score(self, rank: int | np.ndarray, n_tasks: int) -> float | np.ndarray:
        """Satisfaction in (0, 1] for a rank (1 = best)."""
        rank = np.asarray(rank, dtype=np.float64)
        if self is PreferenceFunction.INVERSE:
            return 1.0 / rank
        return (n_tasks - rank + 1.0) / n_tasks


@dataclass(frozen=True)
class RankingData:
    """Per individual a ranking of all projects, best first, plus undirected friend pairs."""

    rankings: Mapping[str, tuple[str, ...]]
    friends: tuple[tuple[str, str], ...] = ()

    def validate(self, node_ids: Sequence[str], task_ids: Sequence[str]) -> None:
        tasks = set(task_ids)
        nodes = set(node_ids)
        missing = [v for v in node_ids if v not in self.rankings]
        if missing:
            raise InstanceError(f"Missing ranking for {missing[0]!r}.")
        for node, ranking in self.rankings.items():
            if node not in nodes:
                raise InstanceError(f"Ranking for unknown individual {node!r}.")
            if len(ranking) != len(tasks) or set(ranking) != tasks:
                raise InstanceError(f"Ranking of {node!r} is not a permutation of the task set.")
        for u, v in self.friends:
            if u not in nodes or v not in nodes:
                raise InstanceError(f"Friend pair ({u!r}, {v!r}) references an unknown individual.")

    def rank_matrix(self, node_ids: Sequence[str], task_ids: Sequence[str]) -> np.ndarray:
        """(n x k) integer matrix with rank_v(t), 1 = best."""
        column = {t: j for j, t in enumerate(task_ids)}
        ranks = np.zeros((len(node_ids), len(task_ids)), dtype=np.int64)
        for i, node in enumerate(node_ids):
            try:
                ranking = self.rankings[node]
            except KeyError as exc:
                raise InstanceError(f"Missing ranking for {node!r}.") from exc
            for position, task in enumerate(ranking, start=1):
                ranks[i, column[task]] = position
        return ranks

    def friend_graph(self, node_ids: Sequence[str]) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(node_ids)
        graph.add_edges_from(self.friends)
        return graph


@dataclass
class Dataset:
    name: str
    instance: Instance
    seed: int | None = None
    blocks: np.ndarray | None = None  # planted block per node
    groups: np.ndarray | None = None  # e.g. gender label per node
    initial: Assignment | None = None
    rankings: RankingData | None = None
    params: dict = field(default_factory=dict)


# ----------------------------------------------------------------------
# Construction rules
# ----------------------------------------------------------------------
def _friend_matrix(friend_pairs: Iterable[tuple[str, str]], node_ids: Sequence[str]) -> np.ndarray:
    index = {v: i for i, v in enumerate(node_ids)}
    n = len(node_ids)
    friends = np.zeros((n, n), dtype=bool)
    for u, v in friend_pairs:
        if u == v:
            raise InstanceError(f"Self-loop friend pair on {u!r}.")
        try:
            a, b = index[u], index[v]
        except KeyError as exc:
            raise InstanceError(f"Friend pair references unknown individual {exc}") from exc
        friends[a, b] = friends[b, a] = True
    return friends


def complement_edges(friends: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (u < v) that are NOT friends."""
    conflict = np.triu(~friends, k=1)
    eu, ev = np.nonzero(conflict)
    return eu.astype(np.int64), ev.astype(np.int64)


def friends_to_conflicts(
    friend_pairs: Iterable[tuple[str, str]],
    node_ids: Sequence[str],
) -> list[tuple[str, str, float]]:
    """All unordered non-friend pairs with unit weight."""
    nodes = list(node_ids)
    eu, ev = complement_edges(_friend_matrix(friend_pairs, nodes))
    return [(nodes[u], nodes[v], 1.0) for u, v in zip(eu, ev)]


def preferences_from_rankings(
    rankings: RankingData,
    node_ids: Sequence[str],
    task_ids: Sequence[str],
    function: PreferenceFunction = PreferenceFunction.INVERSE,
) -> np.ndarray:
    ranks = rankings.rank_matrix(node_ids, task_ids)
    return np.asarray(PreferenceFunction(function).score(ranks, len(task_ids)), dtype=np.float64)


def education_instance(
    rankings: RankingData,
    node_ids: Sequence[str],
    task_ids: Sequence[str],
    capacities: Sequence[int],
    function: PreferenceFunction = PreferenceFunction.INVERSE,
    *,
    alpha: float | None = None,
    lam: float | None = None,
) -> Instance:
    rankings.validate(node_ids, task_ids)
    eu, ev = complement_edges(_friend_matrix(rankings.friends, node_ids))
    pref = preferences_from_rankings(rankings, node_ids, task_ids, function)
    return Instance.from_arrays(
        node_ids,
        task_ids,
        capacities,
        eu,
        ev,
        np.ones(len(eu)),
        sparse.csr_matrix(pref),
        lam=lam,
        alpha=alpha,
    )


def _graph_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def _ids(prefix: str, count: int) -> list[str]:
    width = len(str(max(count - 1, 0)))
    return [f"{prefix}{i:0{width}d}" for i in range(count)]


def _block_labels(graph: nx.Graph, n: int) -> np.ndarray:
    labels = np.zeros(n, dtype=np.int64)
    for block, members in enumerate(graph.graph["partition"]):
        labels[list(members)] = block
    return labels


def _check_parameters(counts: Mapping[str, int], probabilities: Mapping[str, float] | None = None) -> None:
    for name, value in counts.items():
        if value < 1:
            raise InstanceError(f"{name} must be at least 1, got {value}.")
    for name, value in (probabilities or {}).items():
        if not (0.0 <= value <= 1.0):
            raise InstanceError(f"{name} must lie in [0, 1], got {value}.")


# ----------------------------------------------------------------------
# Generators
# ----------------------------------------------------------------------
def generate_synth_tf(
    seed: SeedLike = 0,
    *,
    blocks: int = SYNTH_BLOCKS,
    block_size: int = SYNTH_BLOCK_SIZE,
    n_tasks: int = SYNTH_TASKS,
    p_in: float = SYNTH_P_IN,
    p_out: float = SYNTH_P_OUT,
    capacity_slack: float = SYNTH_CAPACITY_SLACK,
    alpha: float = SYNTH_ALPHA,
) -> Dataset:
    """
    Planted-partition friend graph, conflicts are its complement. Every block
    gets a primary project (c = 1) and every node one extra uniformly random
    project (c = 1).
    """
    _check_parameters({"blocks": blocks, "block_size": block_size, "n_tasks": n_tasks}, {"p_in": p_in, "p_out": p_out})
    if capacity_slack < 1.0:
        raise InstanceError(f"capacity_slack must be at least 1, got {capacity_slack}.")
    rng = make_rng(seed)
    n = blocks * block_size
    graph = nx.planted_partition_graph(blocks, block_size, p_in, p_out, seed=_graph_seed(rng))
    friends = nx.to_numpy_array(graph, nodelist=range(n), dtype=bool)
    eu, ev = complement_edges(friends)
    labels = _block_labels(graph, n)

    primary = np.resize(rng.permutation(n_tasks), blocks)
    pref = np.zeros((n, n_tasks))
    pref[np.arange(n), primary[labels]] = 1.0
    pref[np.arange(n), rng.integers(0, n_tasks, size=n)] = 1.0

    capacity = int(math.ceil(capacity_slack * n / n_tasks))
    inst = Instance.from_arrays(
        _ids("v", n),
        _ids("t", n_tasks),
        [capacity] * n_tasks,
        eu,
        ev,
        np.ones(len(eu)),
        sparse.csr_matrix(pref),
        alpha=alpha,
    )
    logger.info(
        "Synth-TF generated: %d nodes, %d tasks, %d conflict edges (friend edges %d)",
        n,
        n_tasks,
        inst.n_edges,
        graph.number_of_edges(),
    )
    return Dataset(
        "synth-tf",
        inst,
        seed=seed if isinstance(seed, int) else None,
        blocks=labels,
        params={"blocks": blocks, "block_size": block_size, "p_in": p_in, "p_out": p_out},
    )


def generate_company(
    seed: SeedLike = 0,
    *,
    department_size: int = COMPANY_DEPARTMENT_SIZE,
    departments: Sequence[str] = COMPANY_DEPARTMENTS,
    male_share: Mapping[str, float] | None = None,
    switch_probability: float = COMPANY_SWITCH_PROBABILITY,
    alpha: float = COMPANY_ALPHA,
) -> Dataset:
    """
    Employees of equally sized departments; conflict edges join every pair of
    male employees. Everyone prefers their own department and with
    `switch_probability` one other department as well.
    """
    _check_parameters({"department_size": department_size, "departments": len(departments)}, {"switch_probability": switch_probability})
    shares = dict(COMPANY_MALE_SHARE if male_share is None else male_share)
    missing = [d for d in departments if d not in shares]
    if missing:
        raise InstanceError(f"No male share configured for departments: {', '.join(missing)}")
    rng = make_rng(seed)
    n_dept = len(departments)
    n = n_dept * department_size
    home = np.repeat(np.arange(n_dept), department_size)

    male = np.zeros(n, dtype=bool)
    for d, name in enumerate(departments):
        count = int(round(shares[name] * department_size))
        chosen = rng.permutation(department_size)[:count]
        male[d * department_size + chosen] = True

    males = np.flatnonzero(male)
    iu, iv = np.triu_indices(len(males), k=1)
    eu, ev = males[iu], males[iv]

    pref = np.zeros((n, n_dept))
    pref[np.arange(n), home] = 1.0
    if n_dept > 1:
        switching = np.flatnonzero(rng.random(n) < switch_probability)
        other = (home[switching] + rng.integers(1, n_dept, size=len(switching))) % n_dept
        pref[switching, other] = 1.0

    inst = Instance.from_arrays(
        _ids("e", n),
        list(departments),
        [department_size] * n_dept,
        eu,
        ev,
        np.ones(len(eu)),
        sparse.csr_matrix(pref),
        alpha=alpha,
    )
    logger.info("Company generated: %d employees, %d males, %d conflict edges", n, len(males), inst.n_edges)
    return Dataset(
        "company",
        inst,
        seed=seed if isinstance(seed, int) else None,
        groups=np.where(male, MALE, FEMALE),
        initial=Assignment(home),
        params={"department_size": department_size, "male_share": shares, "switch_probability": switch_probability},
    )


def _group_sizes(students: int, group_size: int) -> list[int]:
    full, rest = divmod(students, group_size)
    sizes = [group_size] * full
    if rest:
        sizes.append(rest)
    return sizes


def generate_education(
    seed: SeedLike = 0,
    *,
    students: int = EDUCATION_STUDENTS,
    projects: int = EDUCATION_PROJECTS,
    group_size: int = EDUCATION_GROUP_SIZE,
    p_in: float = EDUCATION_P_IN,
    p_out: float = EDUCATION_P_OUT,
    shuffles: int = EDUCATION_SHUFFLES,
    alpha: float = EDUCATION_ALPHA,
    preference: PreferenceFunction = PreferenceFunction.INVERSE,
) -> Dataset:
    """Class-sized instance: friend groups share a base project ranking, perturbed by a few swaps."""
    preference = PreferenceFunction(preference)
    _check_parameters({"students": students, "projects": projects, "group_size": group_size}, {"p_in": p_in, "p_out": p_out})
    if shuffles < 0:
        raise InstanceError(f"shuffles must be non-negative, got {shuffles}.")
    rng = make_rng(seed)
    sizes = _group_sizes(students, group_size)
    graph = nx.random_partition_graph(sizes, p_in, p_out, seed=_graph_seed(rng))
    nodes = _ids("s", students)
    tasks = _ids("p", projects)
    labels = _block_labels(graph, students)

    base = [rng.permutation(projects) for _ in sizes]
    rankings: dict[str, tuple[str, ...]] = {}
    for i, node in enumerate(nodes):
        order = base[labels[i]].copy()
        for _ in range(shuffles):
            a, b = rng.integers(0, projects, size=2)
            order[a], order[b] = order[b], order[a]
        rankings[node] = tuple(tasks[j] for j in order)

    friends = tuple(sorted((nodes[u], nodes[v]) for u, v in graph.edges() if u != v))
    data = RankingData(rankings, friends)
    capacity = int(math.ceil(students / projects)) + 1
    inst = education_instance(data, nodes, tasks, [capacity] * projects, preference, alpha=alpha)
    logger.info(
        "Education-style instance generated: %d students, %d projects, %d friend pairs, %d conflict edges",
        students,
        projects,
        len(friends),
        inst.n_edges,
    )
    return Dataset(
        "education",
        inst,
        seed=seed if isinstance(seed, int) else None,
        blocks=labels,
        rankings=data,
        params={"group_size": group_size, "p_in": p_in, "p_out": p_out, "shuffles": shuffles, "preference": preference.value},
    )


GENERATORS = {
    "synth-tf": generate_synth_tf,
    "company": generate_company,
    "education": generate_education,
}
