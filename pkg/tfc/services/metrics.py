# tfc/services/metrics.py
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any, Iterable, Sequence

import numpy as np
import pandas as pd

from tfc.exceptions import TFCError
from tfc.services.generators import FEMALE, MALE, RankingData
from tfc.services.model import Assignment, FractionalSolution, Instance, evaluate_F, total_conflict_weight
from tfc.services.schemas import BalancingModel, QualityMetricsModel, RatioModel, SweepRow

if TYPE_CHECKING:
    from tfc.services.pipeline import SolverOptions

logger = logging.getLogger(__name__)

UNIT_PREFERENCE = 1.0 - 1e-12


# ----------------------------------------------------------------------
# Quality (M-preference) metrics
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class QualityMetrics:
    """
    Ranks r(v, x) of the assigned tasks and same-team friend counts, each as
    max / avg / population std.
    """

    max_rank: float
    avg_rank: float
    std_rank: float
    max_friends: float
    avg_friends: float
    std_friends: float

    def to_model(self) -> QualityMetricsModel:
        return QualityMetricsModel(**asdict(self))


def _max_avg_std(values: np.ndarray) -> tuple[float, float, float]:
    if values.size == 0:
        return 0.0, 0.0, 0.0
    return float(values.max()), float(values.mean()), float(values.std())


def quality_metrics(inst: Instance, rankings: RankingData, x: Assignment) -> QualityMetrics:
    labels = x.labels
    ranks = rankings.rank_matrix(inst.node_ids, inst.task_ids)
    assigned_rank = ranks[np.arange(inst.n_nodes), labels].astype(np.float64)

    index = inst.node_index
    counts = np.zeros(inst.n_nodes)
    if rankings.friends:
        fu = np.array([index[u] for u, _ in rankings.friends], dtype=np.int64)
        fv = np.array([index[v] for _, v in rankings.friends], dtype=np.int64)
        together = labels[fu] == labels[fv]
        np.add.at(counts, fu[together], 1.0)
        np.add.at(counts, fv[together], 1.0)

    return QualityMetrics(*_max_avg_std(assigned_rank), *_max_avg_std(counts))


# ----------------------------------------------------------------------
# Approximation ratio
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ApproximationRatio:
    mode: str  # "exact" | "lp_bound"
    reference: float
    value: float | None
    degenerate: bool = False

    @property
    def qualifier(self) -> str:
        # against an upper bound the true ratio can only be larger
        return "=" if self.mode == "exact" else ">="

    def to_model(self) -> RatioModel:
        return RatioModel(
            mode=self.mode,
            reference=self.reference,
            value=self.value,
            qualifier=self.qualifier,
            degenerate=self.degenerate,
        )


def approximation_ratio(inst: Instance, x: Assignment, reference: float, mode: str = "exact") -> ApproximationRatio:
    if mode not in {"exact", "lp_bound"}:
        raise ValueError(f"Unknown approximation reference mode {mode!r}.")
    value = evaluate_F(inst, x).total
    return ratio_from_values(value, reference, mode)


def ratio_from_values(value: float, reference: float, mode: str) -> ApproximationRatio:
    if reference <= 0:
        if abs(value) > 0:
            logger.warning("Approximation ratio undefined: reference %.6g with F = %.6g", reference, value)
            return ApproximationRatio(mode, reference, None, degenerate=True)
        return ApproximationRatio(mode, reference, 1.0)
    return ApproximationRatio(mode, reference, value / reference)


# ----------------------------------------------------------------------
# Balancing assumption
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class BalancingReport:
    lam: float
    threshold: float  # w(E) / |V|
    sufficient: bool
    exact_margin: float | None = None  # lambda * sum c y - w(E)
    exact: bool | None = None

    @property
    def note(self) -> str:
        if self.exact is False or not self.sufficient:
            return "balancing assumption not met: the 3/4 expectation guarantee does not apply"
        return "the 3/4 expectation guarantee holds only under the balancing assumption"

    def to_model(self) -> BalancingModel:
        return BalancingModel(
            lam=self.lam,
            threshold=self.threshold,
            sufficient=self.sufficient,
            exact_margin=self.exact_margin,
            exact=self.exact,
            note=self.note,
        )


def check_balancing(inst: Instance, y: FractionalSolution | None = None) -> BalancingReport:
    weight = total_conflict_weight(inst)
    threshold = weight / inst.n_nodes if inst.n_nodes else 0.0
    sufficient = inst.lam >= threshold * (1.0 - 1e-12)
    margin = exact = None
    if y is not None:
        margin = inst.lam * float(np.sum(inst.pref_dense * y.values)) - weight
        exact = margin >= -1e-9 * max(1.0, weight)
    return BalancingReport(inst.lam, threshold, sufficient, margin, exact)


# ----------------------------------------------------------------------
# Run statistics
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class RunStatistics:
    runs: int
    mean: float
    std: float
    standard_error: float
    best: float
    worst: float


def run_statistics(values: Sequence[float]) -> RunStatistics:
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise ValueError("No runs to summarise.")
    se = float(data.std(ddof=1) / math.sqrt(data.size)) if data.size > 1 else 0.0
    return RunStatistics(int(data.size), float(data.mean()), float(data.std()), se, float(data.max()), float(data.min()))


# ----------------------------------------------------------------------
# Alpha sweep
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SweepPoint:
    alpha: float
    lam: float
    algorithm: str
    task_satisfaction: float | None = None
    social_satisfaction: float | None = None
    objective: float | None = None
    unit_preference_share: float | None = None
    status: str = "ok"
    error: str = ""

    def to_row(self) -> SweepRow:
        return SweepRow(
            alpha=self.alpha,
            lam=self.lam,
            algorithm=self.algorithm,
            task_satisfaction=self.task_satisfaction,
            social_satisfaction=self.social_satisfaction,
            objective=self.objective,
            unit_preference_share=self.unit_preference_share,
            status=self.status,
            error=self.error,
        )


def unit_preference_share(inst: Instance, x: Assignment) -> float:
    if inst.n_nodes == 0:
        return 0.0
    got = inst.pref_dense[np.arange(inst.n_nodes), x.labels]
    return float(np.mean(got >= UNIT_PREFERENCE))


def alpha_sweep(
    inst: Instance,
    alphas: Iterable[float],
    algorithms: Sequence[str],
    options: "SolverOptions | None" = None,
) -> list[SweepPoint]:
    """
    Re-solve the instance for every alpha (lambda = alpha * w(E) / |V|) and
    algorithm; points come back ordered by alpha, then algorithm order. A
    point whose solver raises a toolkit error (numerical engine failures
    arrive as LPError) is recorded with status "failed" and the sweep goes on.
    """
    from tfc.services.pipeline import SolverOptions, run_algorithm

    base = options or SolverOptions()
    points: list[SweepPoint] = []
    for alpha in sorted(float(a) for a in alphas):
        if alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {alpha}.")
        variant = inst.with_alpha(alpha)
        for algorithm in algorithms:
            try:
                run = run_algorithm(variant, base.replace(algorithm=algorithm))
            except TFCError as exc:
                logger.warning("Sweep point alpha=%g %s failed: %s", alpha, algorithm, exc)
                points.append(SweepPoint(alpha, variant.lam, algorithm, status="failed", error=str(exc)))
                continue
            best = run.best
            points.append(
                SweepPoint(
                    alpha,
                    variant.lam,
                    algorithm,
                    best.breakdown.task_satisfaction,
                    best.breakdown.social_satisfaction,
                    best.breakdown.total,
                    unit_preference_share(variant, best.assignment),
                )
            )
    return points


def sweep_table(points: Sequence[SweepPoint]) -> pd.DataFrame:
    columns = list(SweepRow.model_fields)
    rows = [p.to_row().model_dump(by_alias=False) for p in points]
    frame = pd.DataFrame(rows, columns=columns)
    return frame.rename(columns={"lam": "lambda"})


# ----------------------------------------------------------------------
# Company diversity
# ----------------------------------------------------------------------
def changed_fraction(initial: Assignment, x: Assignment) -> float:
    """Share of individuals whose task differs from the initial assignment."""
    if initial.labels.shape != x.labels.shape:
        raise ValueError("Assignments cover different numbers of individuals.")
    if x.labels.size == 0:
        return 0.0
    return float(np.mean(initial.labels != x.labels))


def group_counts(inst: Instance, groups: np.ndarray, x: Assignment) -> pd.DataFrame:
    """Per task: members of each group and their share in percent."""
    groups = np.asarray(groups)
    names = sorted(set(groups.tolist()))
    frame = pd.DataFrame({"task": np.asarray(inst.task_ids)[x.labels], "group": groups})
    counts = (
        frame.groupby(["task", "group"]).size().unstack(fill_value=0).reindex(index=list(inst.task_ids), columns=names, fill_value=0)
    )
    totals = counts.sum(axis=1)
    for name in names:
        counts[f"{name}_pct"] = np.where(totals > 0, 100.0 * counts[name] / totals.where(totals > 0, 1), 0.0)
    counts["total"] = totals
    counts.index.name = "task"
    counts.columns.name = None
    return counts.reset_index()


def average_gap(inst: Instance, groups: np.ndarray, x: Assignment, pair: tuple[str, str] = (MALE, FEMALE)) -> float:
    """Mean over staffed tasks of |share(pair[0]) - share(pair[1])| in percent."""
    table = group_counts(inst, groups, x)
    staffed = table[table["total"] > 0]
    if staffed.empty:
        return 0.0
    first = staffed[f"{pair[0]}_pct"] if f"{pair[0]}_pct" in staffed else 0.0
    second = staffed[f"{pair[1]}_pct"] if f"{pair[1]}_pct" in staffed else 0.0
    return float(np.mean(np.abs(np.asarray(first) - np.asarray(second))))


def company_sweep(
    inst: Instance,
    groups: np.ndarray,
    initial: Assignment,
    alphas: Iterable[float],
    options: "SolverOptions | None" = None,
) -> pd.DataFrame:
    """alpha against (changed fraction, average gap) for one algorithm."""
    from tfc.services.pipeline import SolverOptions, run_algorithm

    options = options or SolverOptions()
    rows: list[dict[str, Any]] = []
    for alpha in sorted(float(a) for a in alphas):
        variant = inst.with_alpha(alpha)
        run = run_algorithm(variant, options)
        rows.append(
            {
                "alpha": alpha,
                "lambda": variant.lam,
                "algorithm": options.algorithm,
                "changed_fraction": changed_fraction(initial, run.best.assignment),
                "average_gap": average_gap(variant, groups, run.best.assignment),
            }
        )
    return pd.DataFrame(rows, columns=["alpha", "lambda", "algorithm", "changed_fraction", "average_gap"])
