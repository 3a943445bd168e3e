"""
Types for the uRNN experiment runner
"""

from enum import Enum
from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import Any, List, Optional


class Task(str, Enum):
    """
    Enum for the experiment subcommands
    """

    COPYMEM = "copymem"
    SYSID = "sysid"
    CAPACITY = "capacity"
    GRADCHECK = "gradcheck"


class RecurrenceKind(str, Enum):
    """Which unitary recurrence a model carries"""

    RESTRICTED = "restricted"
    FULL = "full"


class LossKind(str, Enum):
    MSE = "mse"
    CROSS_ENTROPY = "cross_entropy"


class Origin(str, Enum):
    """Set a system-identification target matrix is drawn from"""

    # compose of one restricted draw
    RESTRICTED = "W_u"
    # product of two restricted draws
    WIDE = "W_g"


class Preset(str, Enum):
    PAPER = "paper"
    DESK = "desk"


class Split(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


class FitMethod(str, Enum):
    # fixed-step gradient descent
    GRADIENT = "gradient"
    # trust-region least squares with basin hops between descents
    LEAST_SQUARES = "least_squares"


class CapacityVerdict(BaseModel):
    """Parameter count of the restricted parameterization against dim U(n)"""

    n: int
    param_count: int
    manifold_dim: int
    provably_restricted: bool


class MetricsRecord(BaseModel):
    """One row of the per-iteration metrics log; field order is the file's key order"""

    iteration: int
    epoch: int
    split: Split
    loss: float
    metric_name: str
    metric: Optional[float] = None
    unitarity_defect: float
    wall_ms: Optional[float] = None
    seed: int


class GradcheckGroup(BaseModel):
    """Finite-difference comparison for one parameter group"""

    name: str
    size: int
    max_abs_error: float
    max_rel_error: float
    passed: bool


class GradcheckReport(BaseModel):
    """Analytic vs central-difference gradients for one model instance"""

    n: int
    recurrence: RecurrenceKind
    loss: LossKind
    step: float
    rtol: float
    atol: float
    groups: List[GradcheckGroup]
    passed: bool


class CapacityRow(BaseModel):
    """Capacity-fit outcome for one hidden dimension"""

    n: int
    param_count: int
    manifold_dim: int
    provably_restricted: bool
    in_image_residual: float
    wide_residual: float
    ratio: float


class SysidRow(BaseModel):
    """Best test NMSE of one recurrence on one system-identification grid cell"""

    n: int
    origin: Origin
    recurrence: RecurrenceKind
    provably_restricted: bool
    best_test: float
    best_seed: int


class InitResult(BaseModel):
    """Outcome of one training run from one initialization seed"""

    seed: int
    iterations: int
    best_valid: Optional[float] = None
    best_test: Optional[float] = None
    final_test: Optional[float] = None
    final_metric: Optional[float] = None
    unitarity_defect: float


class ExperimentConfig(BaseModel):
    """Declarative description of one experiment run"""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    task: Task
    preset: Preset = Preset.DESK

    # model
    recurrence: RecurrenceKind = RecurrenceKind.FULL
    n: int = Field(32, ge=1)
    match_params: bool = False
    train_h0: bool = False
    u_init_scale: float = Field(1.0, ge=0)

    # optimizers
    lr: float = Field(1e-3, gt=0)
    stiefel_lr: float = Field(1e-3, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    averaging: float = Field(0.1, gt=0, le=1)
    epsilon: float = Field(1e-8, gt=0)
    grad_scale: bool = False
    grad_scale_decay: float = Field(0.9, gt=0, lt=1)
    batch_size: int = Field(20, ge=1)
    iterations: int = Field(10000, ge=0)
    epochs: int = Field(20, ge=0)
    eval_every: int = Field(100, ge=1)

    # copy memory
    t_delay: int = Field(100, ge=1)
    test_batch: int = Field(100, ge=1)

    # system identification
    seq_len: int = Field(150, ge=1)
    origin: Origin = Origin.WIDE
    train_count: int = Field(2000, ge=1)
    valid_count: int = Field(200, ge=1)
    test_count: int = Field(200, ge=1)
    init_seeds: int = Field(3, ge=1)
    oracle_freeze: bool = True
    # when set, run both recurrences for every n (and origin) instead of one model
    sysid_dims: List[int] = []
    sysid_origins: List[Origin] = []

    # capacity fit
    capacity_dims: List[int] = [4, 6, 7, 8, 16]
    fit_restarts: int = Field(8, ge=1)
    fit_iters: int = Field(3000, ge=0)
    fit_lr: float = Field(1e-2, gt=0)
    fit_method: FitMethod = FitMethod.LEAST_SQUARES
    fit_hop_scale: float = Field(0.3, gt=0)

    # gradient check
    gradcheck_dims: List[int] = [2, 4, 8]
    gradcheck_len: int = Field(10, ge=0)
    gradcheck_batch: int = Field(3, ge=1)
    gradcheck_io: int = Field(2, ge=1)
    gradcheck_step: float = Field(1e-6, gt=0)
    gradcheck_rtol: float = Field(1e-6, gt=0)

    # bookkeeping
    seed_data: int = Field(0, ge=0)
    seed_init: int = Field(0, ge=0)
    out_dir: str = "runs"
    write_csv: bool = True
    record_timing: bool = False
    dump_data: bool = False
    checkpoint_every: int = Field(1000, ge=1)
    resume_from: Optional[str] = None

    @field_validator("capacity_dims", "gradcheck_dims", "sysid_dims", mode="before")
    @classmethod
    def _split_dims(cls, value: Any) -> Any:
        if value is None:
            return []
        if isinstance(value, str):
            return [int(part) for part in value.split(",") if part.strip()]
        return value

    @field_validator("sysid_origins", mode="before")
    @classmethod
    def _split_origins(cls, value: Any) -> Any:
        if value is None:
            return []
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("capacity_dims", "gradcheck_dims")
    @classmethod
    def _positive_dims(cls, value: List[int]) -> List[int]:
        if not value or any(d < 1 for d in value):
            raise ValueError("dimension grids must be non-empty and positive")
        return value

    @field_validator("sysid_dims")
    @classmethod
    def _optional_dims(cls, value: List[int]) -> List[int]:
        if any(d < 1 for d in value):
            raise ValueError("dimension grids must be positive")
        return value


class RunSummary(BaseModel):
    """Final summary document written at the end of a run"""

    task: Task
    config: ExperimentConfig
    recurrence_dim: Optional[int] = None
    parameter_count: Optional[int] = None
    baseline: Optional[float] = None
    best_test: Optional[float] = None
    inits: List[InitResult] = []
    capacity: List[CapacityRow] = []
    sysid: List[SysidRow] = []
    gradcheck: List[GradcheckReport] = []
    passed: Optional[bool] = None
