# tfc/services/schemas.py
from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from tfc.constants import (
    ALGORITHMS,
    DEFAULT_ALGORITHM,
    DEFAULT_SEED,
    DEFAULT_SUPERNODE_SIZE,
    EVALUATE_SCHEMA,
    REPORT_SCHEMA,
)

EngineLiteral = Literal["auto", "simplex", "highs"]
RatioModeLiteral = Literal["exact", "lp_bound"]


# ------------------------------------------------------------
# Configuration echo
# ------------------------------------------------------------
class RunConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    subcommand: str = "solve"
    instance: Optional[str] = None
    instance_format: Literal["canonical", "education"] = "canonical"
    algorithm: str = DEFAULT_ALGORITHM
    alpha: Optional[float] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    sparsify: Optional[float] = None
    compact: bool = False
    supernode_size: int = DEFAULT_SUPERNODE_SIZE
    seed: int = DEFAULT_SEED
    repetitions: int = 1
    engine: EngineLiteral = "auto"
    output: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.alpha is not None and self.lam is not None:
            raise ValueError("Specify either alpha or lambda, not both.")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("alpha must be non-negative.")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be non-negative.")
        if self.sparsify is not None and not (0.0 < self.sparsify <= 1.0):
            raise ValueError("Sparsify probability must lie in (0, 1].")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1.")
        if self.supernode_size < 1:
            raise ValueError("supernode size must be at least 1.")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"Unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}.")
        return self


# ------------------------------------------------------------
# Report pieces
# ------------------------------------------------------------
class InstanceInfo(BaseModel):
    path: Optional[str] = None
    fingerprint: str
    n_nodes: int
    n_tasks: int
    n_edges: int
    lam: float = Field(alias="lambda")
    alpha: Optional[float] = None
    total_conflict_weight: float

    model_config = ConfigDict(populate_by_name=True)


class ObjectiveModel(BaseModel):
    task_satisfaction: float
    social_satisfaction: float
    lam: float = Field(alias="lambda")
    total: float

    model_config = ConfigDict(populate_by_name=True)


class RelaxationInfo(BaseModel):
    kind: Literal["l1", "l2"]
    value: float
    engine: str
    status: str
    iterations: int
    # retained edge count, set only when Sparsify dropped at least one edge
    sparsified_edges: Optional[int] = None
    supernodes: Optional[int] = None
    compaction_ignored_weight: Optional[float] = None
    preference_aggregation: Optional[str] = None


class RunRecord(BaseModel):
    seed: Optional[int] = None
    objective: float
    task_satisfaction: float
    social_satisfaction: float


class Timing(BaseModel):
    total: float = 0.0
    relaxation: Optional[float] = None
    runs: List[float] = Field(default_factory=list)


class Summary(BaseModel):
    runs: int
    mean: float
    std: float
    standard_error: float
    best: float
    worst: float
    # 3/4 * L2(y*) for rpipage-l2, 1/2 * L1(y*) for pipage-l1
    guarantee: Optional[float] = None
    guarantee_factor: Optional[float] = None


class RatioModel(BaseModel):
    mode: RatioModeLiteral
    reference: float
    value: Optional[float] = None
    qualifier: Literal["=", ">="] = "="
    degenerate: bool = False


class BalancingModel(BaseModel):
    lam: float = Field(alias="lambda")
    threshold: float
    sufficient: bool
    exact_margin: Optional[float] = None
    exact: Optional[bool] = None
    note: str = ""

    model_config = ConfigDict(populate_by_name=True)


class SolveReport(BaseModel):
    schema_version: str = REPORT_SCHEMA
    config: RunConfig
    instance: InstanceInfo
    algorithm: str
    objective: ObjectiveModel
    relaxation: Optional[RelaxationInfo] = None
    runs: List[RunRecord]
    summary: Summary
    approximation: Optional[RatioModel] = None
    balancing: BalancingModel
    assignment: Dict[str, str]
    timing: Timing = Field(default_factory=Timing)

    def comparable(self) -> Dict[str, Any]:
        """Report payload without the wall-clock timing section."""
        return self.model_dump(by_alias=True, exclude={"timing"})


# ------------------------------------------------------------
# Evaluation / sweeps
# ------------------------------------------------------------
class QualityMetricsModel(BaseModel):
    max_rank: float
    avg_rank: float
    std_rank: float
    max_friends: float
    avg_friends: float
    std_friends: float


class EvaluateEntry(BaseModel):
    name: str
    objective: ObjectiveModel
    quality: Optional[QualityMetricsModel] = None
    approximation: Optional[RatioModel] = None
    # changed_fraction / average_gap when group labels are supplied
    diversity: Optional[Dict[str, float]] = None


class EvaluateReport(BaseModel):
    schema_version: str = EVALUATE_SCHEMA
    config: Dict[str, Any]
    instance: InstanceInfo
    entries: List[EvaluateEntry]


class SweepRow(BaseModel):
    alpha: float
    lam: float = Field(alias="lambda")
    algorithm: str
    task_satisfaction: Optional[float] = None
    social_satisfaction: Optional[float] = None
    objective: Optional[float] = None
    unit_preference_share: Optional[float] = None
    status: str = "ok"
    error: str = ""

    model_config = ConfigDict(populate_by_name=True)
