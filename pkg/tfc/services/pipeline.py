# tfc/services/pipeline.py
"""
Relax-Round orchestration shared by the `solve` and `sweep` commands.

Sparsify and Compact only change the instance the relaxation is solved on;
rounding and every reported objective use the original instance.
Randomized algorithms run `repetitions` times with seeds seed, seed+1, ...
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from tfc.constants import (
    DEFAULT_ALGORITHM,
    DEFAULT_SEED,
    DEFAULT_SUPERNODE_SIZE,
    RANDOMIZED_ALGORITHMS,
)
from tfc.exceptions import IterationLimitError
from tfc.services.baselines import greedy, random_assign
from tfc.services.exact import solve_exact
from tfc.services.instance_files import instance_fingerprint
from tfc.services.metrics import check_balancing, ratio_from_values, run_statistics
from tfc.services.model import (
    Assignment,
    FractionalSolution,
    Instance,
    ObjectiveBreakdown,
    evaluate_F,
    total_conflict_weight,
)
from tfc.services.relax import (
    LPResult,
    RelaxationKind,
    build_compact_program,
    build_program,
    solve_relaxation,
    write_lp_dump,
)
from tfc.services.rounding import pipage_round, randomized_pipage_round
from tfc.services.schemas import (
    InstanceInfo,
    ObjectiveModel,
    RelaxationInfo,
    RunConfig,
    RunRecord,
    SolveReport,
    Summary,
    Timing,
)
from tfc.services.speedups import (
    PREFERENCE_AGGREGATION,
    SuperInstance,
    build_super_instance,
    compact_partition,
    compact_relax,
    sparsify,
)

logger = logging.getLogger(__name__)

RELAXATION_OF = {
    "pipage-l1": RelaxationKind.L1,
    "rpipage-l2": RelaxationKind.L2,
}
GUARANTEE_FACTOR = {
    "pipage-l1": 0.5,
    "rpipage-l2": 0.75,
}


@dataclass(frozen=True)
class SolverOptions:
    algorithm: str = DEFAULT_ALGORITHM
    seed: int = DEFAULT_SEED
    repetitions: int = 1
    sparsify: Optional[float] = None
    compact: bool = False
    supernode_size: int = DEFAULT_SUPERNODE_SIZE
    engine: Optional[str] = None
    exact_budget: Optional[int] = None
    dump_lp: Optional[Path] = None

    def replace(self, **changes) -> "SolverOptions":
        return replace(self, **changes)

    @classmethod
    def from_config(cls, config: RunConfig, **extra) -> "SolverOptions":
        return cls(
            algorithm=config.algorithm,
            seed=config.seed,
            repetitions=config.repetitions,
            sparsify=config.sparsify,
            compact=config.compact,
            supernode_size=config.supernode_size,
            engine=config.engine,
            **extra,
        )


@dataclass
class RunOutcome:
    seed: Optional[int]
    assignment: Assignment
    breakdown: ObjectiveBreakdown
    seconds: float = 0.0


@dataclass
class RelaxOutcome:
    lp: LPResult
    solution: FractionalSolution
    sparsified_edges: Optional[int] = None
    super_instance: Optional[SuperInstance] = None


@dataclass
class AlgorithmRun:
    algorithm: str
    runs: list[RunOutcome]
    relaxation: Optional[RelaxOutcome] = None
    exact_value: Optional[float] = None
    seconds: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def best(self) -> RunOutcome:
        return max(self.runs, key=lambda run: run.breakdown.total)

    @property
    def values(self) -> list[float]:
        return [run.breakdown.total for run in self.runs]


def relax(inst: Instance, kind: RelaxationKind, options: SolverOptions) -> RelaxOutcome:
    """Solve the relaxation, applying Sparsify and/or Compact first when requested."""
    target = inst
    sparsified_edges = None
    if options.sparsify is not None:
        target = sparsify(inst, options.sparsify, options.seed)
        if target.n_edges < inst.n_edges:
            sparsified_edges = target.n_edges

    if options.compact:
        partition = compact_partition(target, options.supernode_size, seed=options.seed)
        if options.dump_lp is not None:
            write_lp_dump(build_compact_program(build_super_instance(target, partition), kind), options.dump_lp)
        outcome = compact_relax(target, partition, kind, engine=options.engine)
        lp, solution, compact = outcome.lp, outcome.solution, outcome.super_instance
    else:
        if options.dump_lp is not None:
            write_lp_dump(build_program(target, kind), options.dump_lp)
        lp = solve_relaxation(target, kind, engine=options.engine)
        solution, compact = lp.solution, None

    if solution is None:
        raise IterationLimitError(
            f"Relaxation {kind.value} stopped at the iteration limit after {lp.iterations} iterations ({lp.engine})."
        )
    return RelaxOutcome(lp, solution, sparsified_edges, compact)


def _timed(seed: Optional[int], inst: Instance, produce) -> RunOutcome:
    started = time.perf_counter()
    x = produce()
    breakdown = evaluate_F(inst, x)
    return RunOutcome(seed, x, breakdown, time.perf_counter() - started)


def run_algorithm(inst: Instance, options: SolverOptions) -> AlgorithmRun:
    started = time.perf_counter()
    algorithm = options.algorithm
    repetitions = options.repetitions if algorithm in RANDOMIZED_ALGORITHMS else 1
    seeds = [options.seed + i for i in range(repetitions)]
    relaxation: Optional[RelaxOutcome] = None
    exact_value: Optional[float] = None

    if algorithm == "exact":
        result = solve_exact(inst, options.exact_budget)
        exact_value = result.value
        runs = [_timed(None, inst, lambda: result.assignment)]
    elif algorithm == "greedy":
        runs = [_timed(None, inst, lambda: greedy(inst))]
    elif algorithm == "random":
        runs = [_timed(s, inst, lambda s=s: random_assign(inst, s)) for s in seeds]
    elif algorithm == "pipage-l1":
        relaxation = relax(inst, RelaxationKind.L1, options)
        y = relaxation.solution
        runs = [_timed(None, inst, lambda: pipage_round(inst, y))]
    elif algorithm == "rpipage-l2":
        relaxation = relax(inst, RelaxationKind.L2, options)
        y = relaxation.solution
        runs = [_timed(s, inst, lambda s=s: randomized_pipage_round(inst, y, s)) for s in seeds]
    else:
        raise ValueError(f"Unknown algorithm {algorithm!r}.")

    run = AlgorithmRun(algorithm, runs, relaxation, exact_value, time.perf_counter() - started)
    logger.info(
        "%s finished: %d run(s), best F=%.6f in %.3fs",
        algorithm,
        len(runs),
        run.best.breakdown.total,
        run.seconds,
    )
    return run


def _objective_model(breakdown: ObjectiveBreakdown) -> ObjectiveModel:
    return ObjectiveModel(
        task_satisfaction=breakdown.task_satisfaction,
        social_satisfaction=breakdown.social_satisfaction,
        lam=breakdown.lam,
        total=breakdown.total,
    )


def instance_info(inst: Instance, path: Optional[str] = None) -> InstanceInfo:
    return InstanceInfo(
        path=path,
        fingerprint=instance_fingerprint(inst),
        n_nodes=inst.n_nodes,
        n_tasks=inst.n_tasks,
        n_edges=inst.n_edges,
        lam=inst.lam,
        alpha=inst.alpha,
        total_conflict_weight=total_conflict_weight(inst),
    )


def build_report(inst: Instance, config: RunConfig, run: AlgorithmRun) -> SolveReport:
    stats = run_statistics(run.values)
    best = run.best
    relaxation_info = None
    guarantee = factor = None
    approximation = None
    balancing = check_balancing(inst, run.relaxation.solution if run.relaxation else None)

    if run.relaxation is not None:
        lp = run.relaxation.lp
        compact = run.relaxation.super_instance
        relaxation_info = RelaxationInfo(
            kind=lp.kind.value,
            value=lp.objective_value,
            engine=lp.engine,
            status=lp.status.value,
            iterations=lp.iterations,
            sparsified_edges=run.relaxation.sparsified_edges,
            supernodes=len(compact.supernodes) if compact else None,
            compaction_ignored_weight=compact.ignored_weight if compact else None,
            preference_aggregation=PREFERENCE_AGGREGATION if compact else None,
        )
        factor = GUARANTEE_FACTOR[run.algorithm]
        guarantee = factor * lp.objective_value
        if run.relaxation.sparsified_edges is None and compact is None:
            # the relaxation optimum bounds the integral optimum from above
            approximation = ratio_from_values(best.breakdown.total, lp.objective_value, "lp_bound").to_model()
    if run.exact_value is not None:
        approximation = ratio_from_values(best.breakdown.total, run.exact_value, "exact").to_model()

    return SolveReport(
        config=config,
        instance=instance_info(inst, config.instance),
        algorithm=run.algorithm,
        objective=_objective_model(best.breakdown),
        relaxation=relaxation_info,
        runs=[
            RunRecord(
                seed=r.seed,
                objective=r.breakdown.total,
                task_satisfaction=r.breakdown.task_satisfaction,
                social_satisfaction=r.breakdown.social_satisfaction,
            )
            for r in run.runs
        ],
        summary=Summary(
            runs=stats.runs,
            mean=stats.mean,
            std=stats.std,
            standard_error=stats.standard_error,
            best=stats.best,
            worst=stats.worst,
            guarantee=guarantee,
            guarantee_factor=factor,
        ),
        approximation=approximation,
        balancing=balancing.to_model(),
        assignment=best.assignment.as_mapping(inst),
        timing=Timing(
            total=run.seconds,
            relaxation=run.relaxation.lp.seconds if run.relaxation else None,
            runs=[r.seconds for r in run.runs],
        ),
    )
