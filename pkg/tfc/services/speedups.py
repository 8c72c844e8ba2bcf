# tfc/services/speedups.py
"""
Speedups applied before the relaxation: Sparsify (drop conflict edges at
random) and Compact (coarsen individuals into supernodes, solve a
size-weighted relaxation, unroll). Linearization itself lives in `relax`.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

import networkx as nx
import numpy as np
from scipy import sparse

from tfc.constants import DEFAULT_SUPERNODE_SIZE, PREFERENCE_MERGE_TOL
from tfc.exceptions import InstanceError, IterationLimitError
from tfc.services.model import FractionalSolution, Instance
from tfc.services.relax import LPResult, RelaxationKind, solve_compact_relaxation
from tfc.services.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

PREFERENCE_AGGREGATION = "member-mean"


# ----------------------------------------------------------------------
# Sparsify
# ----------------------------------------------------------------------
def sparsify(inst: Instance, p: float, seed: SeedLike) -> Instance:
    """Keep each conflict edge independently with probability p; weights are not rescaled."""
    if not (0.0 < p <= 1.0):
        raise InstanceError(f"Sparsify probability must lie in (0, 1], got {p}.")
    rng = make_rng(seed)
    keep = rng.random(inst.n_edges) < p
    sparse_inst = inst.with_edge_mask(keep)
    logger.info("Sparsify p=%g kept %d of %d conflict edges", p, sparse_inst.n_edges, inst.n_edges)
    return sparse_inst


# ----------------------------------------------------------------------
# Compact
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Supernode:
    id: str
    members: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.members)


Partitioner = Callable[[Instance, int, SeedLike], list[Supernode]]


def find_twins(inst: Instance) -> list[list[int]]:
    """Classes (size >= 2) of individuals with identical conflict rows and identical preference rows."""
    adjacency = inst.adjacency.tocsr()
    adjacency.sort_indices()
    pref = inst.pref_dense
    classes: dict[tuple, list[int]] = defaultdict(list)
    for v in range(inst.n_nodes):
        start, end = adjacency.indptr[v], adjacency.indptr[v + 1]
        key = (
            adjacency.indices[start:end].tobytes(),
            adjacency.data[start:end].tobytes(),
            pref[v].tobytes(),
        )
        classes[key].append(v)
    return [members for members in classes.values() if len(members) > 1]


def friend_matrix(inst: Instance) -> np.ndarray:
    """Complement of the conflict graph as a dense boolean matrix."""
    n = inst.n_nodes
    friends = np.ones((n, n), dtype=bool)
    friends[inst.edge_u, inst.edge_v] = False
    friends[inst.edge_v, inst.edge_u] = False
    np.fill_diagonal(friends, False)
    return friends


def _chunks(groups: list[list[int]], target: int) -> list[list[int]]:
    out: list[list[int]] = []
    current: list[int] = []
    for group in groups:
        if len(group) > target:
            out.extend(group[i:i + target] for i in range(0, len(group), target))
            continue
        if len(current) + len(group) > target:
            out.append(current)
            current = []
        current = current + group
    if current:
        out.append(current)
    return out


def label_propagation_partition(
    inst: Instance,
    target_supernode_size: int = DEFAULT_SUPERNODE_SIZE,
    seed: SeedLike = 0,
    *,
    merge_tol: float = PREFERENCE_MERGE_TOL,
) -> list[Supernode]:
    """
    Label propagation on the friend graph. Twin classes are forced into one
    community, friend-adjacent communities whose mean preference vectors
    differ by at most `merge_tol` (L-infinity) are merged while the result
    stays within the target size, and oversized communities are split
    without breaking twin classes.
    """
    if target_supernode_size < 1:
        raise InstanceError("Target supernode size must be at least 1.")
    n = inst.n_nodes
    friends = friend_matrix(inst)
    graph = nx.from_numpy_array(friends.astype(np.int8))
    lpa_seed = seed if isinstance(seed, int) else int(make_rng(seed).integers(0, 2**31 - 1))
    community = np.empty(n, dtype=np.int64)
    found = sorted((sorted(c) for c in nx.community.asyn_lpa_communities(graph, seed=lpa_seed)), key=lambda c: c[0])
    for label, members in enumerate(found):
        community[members] = label

    twins = find_twins(inst)
    for members in twins:
        community[members] = community[members[0]]

    groups: dict[int, list[int]] = defaultdict(list)
    for v in range(n):
        groups[int(community[v])].append(v)
    blocks = sorted(groups.values(), key=lambda c: c[0])

    pref = inst.pref_dense
    merged = True
    while merged:
        merged = False
        means = [pref[b].mean(axis=0) for b in blocks]
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                if len(blocks[i]) + len(blocks[j]) > target_supernode_size:
                    continue
                if np.max(np.abs(means[i] - means[j]), initial=0.0) > merge_tol:
                    continue
                if not friends[np.ix_(blocks[i], blocks[j])].any():
                    continue
                blocks[i] = sorted(blocks[i] + blocks[j])
                del blocks[j]
                merged = True
                break
            if merged:
                break

    twin_of = {v: members for members in twins for v in members}
    final: list[list[int]] = []
    for block in blocks:
        if len(block) <= target_supernode_size:
            final.append(block)
            continue
        units: list[list[int]] = []
        seen: set[int] = set()
        for v in block:
            if v in seen:
                continue
            unit = twin_of.get(v, [v])
            seen.update(unit)
            units.append(list(unit))
        final.extend(_chunks(units, target_supernode_size))

    final.sort(key=lambda members: min(members))
    partition = [Supernode(f"S{i}", tuple(sorted(members))) for i, members in enumerate(final)]
    logger.info(
        "Compact partition: %d supernodes for %d individuals (largest %d, %d twin classes)",
        len(partition),
        n,
        max((s.size for s in partition), default=0),
        len(twins),
    )
    return partition


def compact_partition(
    inst: Instance,
    target_supernode_size: int = DEFAULT_SUPERNODE_SIZE,
    *,
    seed: SeedLike = 0,
    partitioner: Partitioner | None = None,
) -> list[Supernode]:
    partitioner = partitioner or label_propagation_partition
    partition = partitioner(inst, target_supernode_size, seed)
    validate_partition(inst, partition)
    return partition


def validate_partition(inst: Instance, partition: list[Supernode]) -> None:
    counts = np.zeros(inst.n_nodes, dtype=np.int64)
    for supernode in partition:
        if supernode.size < 1:
            raise InstanceError(f"Supernode {supernode.id} is empty.")
        np.add.at(counts, list(supernode.members), 1)
    if np.any(counts != 1):
        v = int(np.flatnonzero(counts != 1)[0])
        raise InstanceError(f"Partition covers {inst.node_ids[v]!r} {counts[v]} times.")


@dataclass
class SuperInstance:
    base: Instance
    sizes: np.ndarray
    supernodes: list[Supernode]
    member_of: np.ndarray
    ignored_weight: float  # conflict weight inside supernodes
    preference_spread: float  # max |c_vt - mean_S c_St| over members

    def unroll(self, y: FractionalSolution) -> FractionalSolution:
        return FractionalSolution(y.values[self.member_of])


def build_super_instance(inst: Instance, partition: list[Supernode]) -> SuperInstance:
    validate_partition(inst, partition)
    m = len(partition)
    member_of = np.empty(inst.n_nodes, dtype=np.int64)
    for s, supernode in enumerate(partition):
        member_of[list(supernode.members)] = s
    sizes = np.bincount(member_of, minlength=m).astype(np.float64)

    pref = inst.pref_dense
    mean_pref = np.zeros((m, inst.n_tasks))
    np.add.at(mean_pref, member_of, pref)
    mean_pref /= sizes[:, None]
    spread = float(np.abs(pref - mean_pref[member_of]).max(initial=0.0))

    su, sv = member_of[inst.edge_u], member_of[inst.edge_v]
    inside = su == sv
    ignored = float(inst.edge_w[inside].sum())
    a, b = np.minimum(su[~inside], sv[~inside]), np.maximum(su[~inside], sv[~inside])
    keys, inverse = np.unique(a * m + b, return_inverse=True)
    weights = np.bincount(inverse, weights=inst.edge_w[~inside], minlength=len(keys))
    eu, ev = np.divmod(keys, m)

    base = Instance.from_arrays(
        [s.id for s in partition],
        inst.task_ids,
        inst.capacities,
        eu,
        ev,
        weights,
        sparse.csr_matrix(mean_pref),
        lam=inst.lam,
    )
    return SuperInstance(base, sizes, list(partition), member_of, ignored, spread)


@dataclass
class CompactOutcome:
    super_instance: SuperInstance
    lp: LPResult
    solution: FractionalSolution | None


def compact_relax(
    inst: Instance,
    partition: list[Supernode],
    kind: RelaxationKind,
    *,
    engine: str | None = None,
) -> CompactOutcome:
    compact = build_super_instance(inst, partition)
    lp = solve_compact_relaxation(compact, kind, engine=engine)
    solution = compact.unroll(lp.solution) if lp.solution is not None else None
    if compact.ignored_weight > 0 or compact.preference_spread > 0:
        logger.info(
            "Compact approximation: %.6g conflict weight inside supernodes ignored, preference spread %.3g",
            compact.ignored_weight,
            compact.preference_spread,
        )
    return CompactOutcome(compact, lp, solution)


def compact_solve(
    inst: Instance,
    partition: list[Supernode],
    kind: RelaxationKind,
    *,
    engine: str | None = None,
) -> FractionalSolution:
    """Size-weighted relaxation over supernodes, unrolled to every member."""
    outcome = compact_relax(inst, partition, kind, engine=engine)
    if outcome.solution is None:
        raise IterationLimitError(f"Compact {kind.value} relaxation hit the iteration limit.")
    return outcome.solution


def symmetrize_twins(y: FractionalSolution, u: int, v: int) -> FractionalSolution:
    """Average y with its u<->v row swap: rows u and v both become their mean."""
    values = np.array(y.values, dtype=np.float64)
    swapped = values.copy()
    swapped[[u, v]] = swapped[[v, u]]
    return FractionalSolution((values + swapped) / 2.0)
