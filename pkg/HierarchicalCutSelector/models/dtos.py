import enum
import math
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator


class RowRelation(enum.Enum):
    """Enum for constraint relations accepted in instance files."""
    LE = "<="
    GE = ">="
    EQ = "="

    def __str__(self):
        return self.value


class LpStatus(enum.Enum):
    """Enum for LP relaxation outcomes."""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"

    def __str__(self):
        return self.value


class SolveStatus(enum.Enum):
    """Enum for branch-and-cut termination states."""
    OPTIMAL_PROVEN = "optimal_proven"
    TIME_LIMIT = "time_limit"
    NODE_LIMIT = "node_limit"
    INFEASIBLE = "infeasible"

    def __str__(self):
        return self.value


class ClockKind(enum.Enum):
    """Enum for the clock used to timestamp bound events."""
    WALL = "wall"
    WORK = "work"

    def __str__(self):
        return self.value


class RewardKind(enum.Enum):
    """Enum for rollout reward definitions."""
    NEG_SOLVE_TIME = "neg_solve_time"
    NEG_PD_INTEGRAL = "neg_pd_integral"
    NEG_DUAL_BOUND_IMPROVEMENT = "neg_dual_bound_improvement"

    def __str__(self):
        return self.value


class Family(enum.Enum):
    """Enum for the synthetic instance families."""
    SET_COVERING = "set_covering"
    MAX_INDEPENDENT_SET = "max_independent_set"
    MULTIPLE_KNAPSACK = "multiple_knapsack"

    def __str__(self):
        return self.value


class PolicyVariant(enum.Enum):
    """Enum for the trainable sequence-model variants."""
    HEM = "hem"
    HEM_NO_H = "hem_no_h"
    HEM_RATIO = "hem_ratio"

    def __str__(self):
        return self.value


class DecodeMode(enum.Enum):
    """Enum for pointer-network decoding."""
    SAMPLE = "sample"
    GREEDY = "greedy"

    def __str__(self):
        return self.value


class SelectorName(enum.Enum):
    """Enum for every selector the evaluation harness knows how to build."""
    NOCUTS = "nocuts"
    RANDOM = "random"
    NV = "nv"
    EFF = "eff"
    RANDOM_ALL = "random_all"
    RANDOM_NV = "random_nv"
    SBP = "sbp"
    HEM = "hem"
    HEM_NO_H = "hem_no_h"
    HEM_RATIO = "hem_ratio"
    HEM_RATIO_ORDER = "hem_ratio_order"

    def __str__(self):
        return self.value

    @property
    def is_learned(self) -> bool:
        return self in _LEARNED_SELECTORS


_LEARNED_SELECTORS = {
    SelectorName.SBP,
    SelectorName.HEM,
    SelectorName.HEM_NO_H,
    SelectorName.HEM_RATIO,
    SelectorName.HEM_RATIO_ORDER,
}


# ---------------------------------------------------------------------------
# Instance file format
# ---------------------------------------------------------------------------

class RowDTO(BaseModel):
    coefs: List[Tuple[int, float]]
    rhs: float
    rel: RowRelation = RowRelation.LE

    @field_serializer('rel')
    def serialize_rel(self, rel: RowRelation):
        return rel.value


class InstanceDTO(BaseModel):
    '''On-disk MILP instance. ``"inf"`` encodes an infinite upper bound.'''
    name: str = Field(min_length=1)
    n: int = Field(ge=0)
    m: int = Field(ge=0)
    c: List[float]
    rows: List[RowDTO]
    integers: List[int] = []
    bounds: List[Tuple[float, float]]

    @field_validator('bounds', mode='before')
    @classmethod
    def parse_bounds(cls, value: Any) -> Any:
        parsed = []
        for pair in value:
            lo, hi = pair
            if isinstance(lo, str):
                raise ValueError("Lower bounds must be finite numbers")
            if isinstance(hi, str):
                if hi.strip().lower() != 'inf':
                    raise ValueError(f"Invalid upper bound: {hi}")
                hi = math.inf
            parsed.append((lo, hi))
        return parsed

    @field_serializer('bounds')
    def serialize_bounds(self, bounds: List[Tuple[float, float]]):
        return [[lo, 'inf' if math.isinf(hi) else hi] for lo, hi in bounds]

    @model_validator(mode='after')
    def check_dimensions(self) -> 'InstanceDTO':
        if len(self.c) != self.n:
            raise ValueError(f"Objective has {len(self.c)} entries, expected n={self.n}")
        if len(self.rows) != self.m:
            raise ValueError(f"File lists {len(self.rows)} rows, expected m={self.m}")
        if len(self.bounds) != self.n:
            raise ValueError(f"Bounds has {len(self.bounds)} entries, expected n={self.n}")
        return self


# ---------------------------------------------------------------------------
# Solver results
# ---------------------------------------------------------------------------

class SolveStatsDTO(BaseModel):
    time: float
    work_units: int = 0
    nodes: int
    status: SolveStatus
    pd_gap: Optional[float] = None
    pd_integral: float
    primal_events: List[Tuple[float, float]] = []
    dual_events: List[Tuple[float, float]] = []
    numerical_trouble: bool = False

    @field_serializer('status')
    def serialize_status(self, status: SolveStatus):
        return status.value


# ---------------------------------------------------------------------------
# Typed configuration views
# ---------------------------------------------------------------------------

class SolveConfig(BaseModel):
    '''Branch-and-cut limits. ``time_limit`` is in the units of ``clock``.'''
    model_config = ConfigDict(frozen=True)

    time_limit: float = Field(default=60.0, gt=0)
    node_limit: int = Field(default=10_000, ge=1)
    separation_rounds: int = Field(default=1, ge=0)
    seed: int = 0
    gap_init: float = 100.0
    clock: ClockKind = ClockKind.WALL
    work_unit_seconds: float = Field(default=1e-3, gt=0)
    max_lp_iterations: int = Field(default=5_000, ge=1)


class GenSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Family
    n_rows: int = Field(default=30, ge=1)
    n_cols: int = Field(default=60, ge=1)
    n_nodes: int = Field(default=25, ge=2)
    affinity: int = Field(default=4, ge=1)
    n_items: int = Field(default=12, ge=1)
    n_knapsacks: int = Field(default=3, ge=1)
    density: float = Field(default=0.05, gt=0, le=1)
    seed: int = 0
    count: int = Field(default=10, ge=0)

    @model_validator(mode='after')
    def check_graph(self) -> 'GenSpec':
        if self.family == Family.MAX_INDEPENDENT_SET and self.affinity >= self.n_nodes:
            raise ValueError("affinity must be smaller than n_nodes")
        return self

    def scaled(self, factor: float) -> 'GenSpec':
        """Return a copy whose size parameters are multiplied by *factor*."""
        grow = lambda v: max(1, int(round(v * factor)))
        return self.model_copy(update={
            'n_rows': grow(self.n_rows),
            'n_cols': grow(self.n_cols),
            'n_nodes': max(self.affinity + 1, grow(self.n_nodes)),
            'n_items': grow(self.n_items),
            'n_knapsacks': grow(self.n_knapsacks),
        })


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=100, ge=0)
    lr_low: float = Field(default=1e-4, gt=0)
    lr_high: float = Field(default=5e-4, gt=0)
    delay_freq: int = Field(default=2, ge=1)
    reward: RewardKind = RewardKind.NEG_SOLVE_TIME
    baseline: bool = True
    normalize_rewards: bool = True
    variant: PolicyVariant = PolicyVariant.HEM
    fixed_ratio: float = Field(default=0.2, gt=0, le=1)
    hidden_size: int = Field(default=128, ge=1)
    workers: int = Field(default=1, ge=1)
    checkpoint_every: int = Field(default=10, ge=1)
    eval_size: int = Field(default=4, ge=0)
    seed: int = 0


class EsConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    population: int = Field(default=16, ge=2)
    sigma: float = Field(default=0.05, gt=0)
    step_size: float = Field(default=0.01, gt=0)
    generations: int = Field(default=50, ge=0)
    mini_pool: int = Field(default=4, ge=1)
    ratio: float = Field(default=0.2, gt=0, le=1)
    hidden_size: int = Field(default=128, ge=1)
    seed: int = 0

    @field_validator('population')
    @classmethod
    def even_population(cls, value: int) -> int:
        if value % 2:
            raise ValueError("population must be even (antithetic pairs)")
        return value


# ---------------------------------------------------------------------------
# Checkpoints and manifests
# ---------------------------------------------------------------------------

class TensorDTO(BaseModel):
    shape: List[int]
    values: List[float]

    @model_validator(mode='after')
    def check_size(self) -> 'TensorDTO':
        size = math.prod(self.shape) if self.shape else 1
        if size != len(self.values):
            raise ValueError(f"Tensor of shape {self.shape} needs {size} values, got {len(self.values)}")
        return self


class CheckpointDTO(BaseModel):
    '''Versioned parameter checkpoint: named groups of named tensors.'''
    schema_version: int = 1
    kind: str
    groups: Dict[str, Dict[str, TensorDTO]]
    metadata: Dict[str, Any] = {}


class SplitManifestDTO(BaseModel):
    family: Family
    preset: str
    seed: int
    spec: GenSpec
    train: List[str]
    test: List[str]


class RunManifestDTO(BaseModel):
    command: str
    preset: str
    config_hash: str
    seeds: List[int]
    versions: Dict[str, str]
    settings: Dict[str, Any]


class MethodSummary(BaseModel):
    '''One row of an evaluation table: mean and stdev per metric.'''
    method: str
    runs: int
    time_mean: float
    time_std: float
    work_mean: float
    work_std: float
    nodes_mean: float
    nodes_std: float
    pd_gap_mean: Optional[float] = None
    pd_gap_std: Optional[float] = None
    pd_integral_mean: float
    pd_integral_std: float
    improvement_time: Optional[float] = None
    improvement_pd_integral: Optional[float] = None
