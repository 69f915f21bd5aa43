"""
Data contracts for Cutpoint.

Configuration and report objects are pydantic models so they validate on
construction and serialize straight to JSON. Numeric containers that carry
numpy arrays (pools, labeled batches, solver paths) are frozen dataclasses.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from contracts.errors import ArgumentError

KernelFamily = Literal["gaussian", "epanechnikov", "higher_order"]
ModelName = Literal["logistic", "binary_response", "conditional_mean"]
MethodName = Literal["passive_pf", "twostep_pf", "passive_lr", "twostep_lr"]
MetricName = Literal["l1", "l2", "linf", "pred_err"]

ALL_METHODS: List[str] = ["passive_pf", "twostep_pf", "passive_lr", "twostep_lr"]
ALL_METRICS: List[str] = ["l1", "l2", "linf", "pred_err"]


# ============================================================================
# Kernel and solver configuration
# ============================================================================

class KernelSpec(BaseModel):
    """
    A symmetric kernel of order `order`.

    support_radius is None for kernels with unbounded support; tail_coefficient
    (C_N) is then the cut point used when reporting the tail mass beyond C_N/2.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    family: KernelFamily = "gaussian"
    order: int = Field(default=1, ge=1)
    support_radius: Optional[float] = Field(default=None, gt=0)
    tail_coefficient: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_family(self) -> "KernelSpec":
        if self.family == "epanechnikov" and self.support_radius != 1.0:
            raise ValueError("epanechnikov kernel is supported on [-1, 1]")
        if self.family != "epanechnikov" and self.support_radius is not None:
            raise ValueError(f"{self.family} kernel has unbounded support")
        if self.family in ("gaussian", "epanechnikov") and self.order != 1:
            raise ValueError(f"{self.family} kernel has order 1")
        return self

    @classmethod
    def gaussian(cls, budget: Optional[float] = None) -> "KernelSpec":
        return cls(family="gaussian", order=1, tail_coefficient=default_tail_coefficient(budget))

    @classmethod
    def epanechnikov(cls) -> "KernelSpec":
        return cls(family="epanechnikov", order=1, support_radius=1.0, tail_coefficient=2.0)

    @classmethod
    def higher_order(cls, order: int, budget: Optional[float] = None) -> "KernelSpec":
        return cls(family="higher_order", order=order, tail_coefficient=default_tail_coefficient(budget))

    @property
    def bounded(self) -> bool:
        return self.support_radius is not None


def default_tail_coefficient(budget: Optional[float]) -> Optional[float]:
    """C_N = sqrt(log N) for unbounded kernels, when a budget is known."""
    if budget is None or budget <= 1:
        return None
    return float(np.sqrt(np.log(budget)))


class SolverConfig(BaseModel):
    """
    Path-following / proximal-gradient settings.

    Exactly one of `phi` and `T` drives the path; when both are set, T wins
    and phi is recomputed as (lambda_tgt / lambda_0) ** (1 / T).

    The constraint set Omega is the l2 ball of radius `ball_radius` around
    `ball_center` (the origin when no center is given).
    """
    model_config = ConfigDict(extra="forbid")

    eta: float = Field(default=1.0, gt=0)
    nu: float = Field(default=0.25, gt=0, lt=1)
    phi: Optional[float] = Field(default=None, gt=0, lt=1)
    T: Optional[int] = Field(default=20, ge=1)
    lambda_tgt: Optional[float] = Field(default=None, gt=0)
    eps_tgt: float = Field(default=1e-6, gt=0)
    max_inner_iters: int = Field(default=500, ge=1)
    max_halvings: int = Field(default=30, ge=0)
    ball_radius: Optional[float] = Field(default=None, gt=0)
    ball_center: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_path_control(self) -> "SolverConfig":
        if self.phi is None and self.T is None:
            raise ValueError("solver needs either phi or T")
        if self.ball_center is not None and self.ball_radius is None:
            raise ValueError("ball_center needs a ball_radius")
        return self

    def within(self, center, radius: float) -> "SolverConfig":
        """Copy of this config constrained to the ball of `radius` around `center`."""
        return self.model_copy(update={"ball_center": [float(v) for v in center], "ball_radius": float(radius)})

    def start_point(self, d: int) -> np.ndarray:
        """Origin, or the ball center when the constraint set is off-origin."""
        if self.ball_center is None:
            return np.zeros(d)
        return np.array(self.ball_center, dtype=float)

    def targeting(self, lambda_tgt: float, eps_tgt: Optional[float] = None) -> "SolverConfig":
        """Copy of this config aimed at a specific target penalty."""
        update: Dict[str, float] = {"lambda_tgt": float(lambda_tgt)}
        if eps_tgt is not None:
            update["eps_tgt"] = float(eps_tgt)
        return self.model_copy(update=update)


# ============================================================================
# Solver outputs
# ============================================================================

@dataclass
class StageRecord:
    """Diagnostics for one lambda stage of the path."""
    lam: float
    omega: float
    inner_iters: int
    objective: float
    support_size: int
    objective_trace: List[float] = field(default_factory=list)


@dataclass
class PathResult:
    theta_hat: np.ndarray
    per_stage: List[StageRecord]
    converged: bool
    degenerate: bool = False
    lambda_0: float = 0.0

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.theta_hat)


# ============================================================================
# Data containers
# ============================================================================

class SealedLabels:
    """
    Labels that travel with a simulated pool but cannot be read by sampling code.

    Only the label oracle (and the CSV writer) unseal them.
    """

    __slots__ = ("_values",)

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        self._values = values

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"SealedLabels(<{len(self._values)} hidden>)"

    def unseal(self) -> np.ndarray:
        return self._values


@dataclass(frozen=True)
class UnlabeledPool:
    """Covariates (x, z) for n rows; row_ids index the original dataset."""
    x: np.ndarray
    z: np.ndarray
    row_ids: np.ndarray
    hidden_y: Optional[SealedLabels] = None

    def __post_init__(self):
        if self.z.ndim != 2:
            raise ArgumentError("z must be an n x d matrix")
        if len(self.x) != self.z.shape[0] or len(self.row_ids) != len(self.x):
            raise ArgumentError(
                f"x has {len(self.x)} rows but z has {self.z.shape[0]} and row_ids {len(self.row_ids)}"
            )

    @classmethod
    def from_arrays(cls, x, z, hidden_y=None) -> "UnlabeledPool":
        x = np.asarray(x, dtype=float)
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[0] != len(x) and z.shape[1] == len(x):
            z = z.T
        sealed = None if hidden_y is None else SealedLabels(hidden_y)
        return cls(x=x, z=z, row_ids=np.arange(len(x)), hidden_y=sealed)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def take(self, idx: np.ndarray) -> "UnlabeledPool":
        """Row subset; labels stay sealed in the parent and are reached through row_ids."""
        idx = np.asarray(idx, dtype=int)
        return UnlabeledPool(x=self.x[idx], z=self.z[idx], row_ids=self.row_ids[idx], hidden_y=self.hidden_y)


@dataclass(frozen=True)
class ActiveSetSpec:
    """The band |x - theta_ref'z| <= b * sqrt(1 + ||theta_ref||^2)."""
    theta_ref: np.ndarray
    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ArgumentError(f"active-set half-width must be positive, got {self.b}")

    @property
    def half_width(self) -> float:
        return float(self.b * np.sqrt(1.0 + np.dot(self.theta_ref, self.theta_ref)))


@dataclass(frozen=True)
class ClassWeights:
    w_plus: float
    w_minus: float

    def gamma(self, y: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(y) > 0, self.w_plus, self.w_minus)


@dataclass(frozen=True)
class LabeledBatch:
    """
    Labeled records selected from one batch D_k.

    Only selected rows are stored; batch_size_total is |D_k| and scale is the
    1/|D_k| (= K/n) factor in front of the empirical risk.
    """
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    batch_size_total: int
    scale: float
    row_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.z.ndim != 2 or self.z.shape[0] != len(self.x) or len(self.y) != len(self.x):
            raise ArgumentError("labeled batch arrays have inconsistent shapes")
        if len(self.y) and not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ArgumentError("labels must be -1 or +1")
        if len(self.y) > self.batch_size_total:
            raise ArgumentError(
                f"{len(self.y)} labeled records exceed the batch size {self.batch_size_total}"
            )
        if not self.scale > 0:
            raise ArgumentError("batch scale must be positive")

    @classmethod
    def from_records(cls, x, z, y, batch_size_total: Optional[int] = None,
                     scale: Optional[float] = None) -> "LabeledBatch":
        x = np.asarray(x, dtype=float).reshape(-1)
        z = np.asarray(z, dtype=float)
        if z.ndim != 2:
            z = z.reshape(len(x), -1)
        y = np.asarray(y, dtype=float).reshape(-1)
        total = len(x) if batch_size_total is None else int(batch_size_total)
        total = max(total, 1)
        return cls(x=x, z=z, y=y, batch_size_total=total,
                   scale=1.0 / total if scale is None else float(scale))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def subset(self, idx: np.ndarray, scale: Optional[float] = None) -> "LabeledBatch":
        idx = np.asarray(idx, dtype=int)
        return LabeledBatch(
            x=self.x[idx], z=self.z[idx], y=self.y[idx],
            batch_size_total=self.batch_size_total,
            scale=self.scale if scale is None else scale,
            row_ids=None if self.row_ids is None else self.row_ids[idx],
        )


@dataclass(frozen=True)
class TruthSpec:
    """Ground truth for a simulation: sparse unit-norm theta_star and the model."""
    d: int
    s: int
    theta_star: np.ndarray
    model: str = "conditional_mean"
    sigma: float = 0.5
    mu: float = 2.0
    eps_sd: float = 0.1

    def __post_init__(self):
        if np.count_nonzero(self.theta_star) != self.s:
            raise ArgumentError(f"theta_star has {np.count_nonzero(self.theta_star)} nonzeros, expected {self.s}")
        if abs(np.linalg.norm(self.theta_star) - 1.0) > 1e-12:
            raise ArgumentError("theta_star must have unit l2 norm")


# ============================================================================
# Model selection
# ============================================================================

class CvPoint(BaseModel):
    lam: float
    mean_cv: float
    fold_scores: List[float]


class CvResult(BaseModel):
    """Outcome of M-fold CV with the one-standard-error rule."""
    lambda_hat: float = Field(gt=0)
    lambda_bar: float = Field(gt=0)
    cv_curve: List[CvPoint]
    cv_min: float
    se_min: float = Field(ge=0)


class BCandidate(BaseModel):
    b: float
    cv_min: float
    lambda_hat: float
    labels: int
    p_hat: float


# ============================================================================
# Pipeline configuration and reports
# ============================================================================

class TheoryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    beta: float = 2.0
    s: int = Field(default=10, ge=1)
    c1: float = Field(default=1.0, gt=0)
    c2: float = Field(default=1.0, gt=0)
    c3: float = Field(default=1.0, gt=0)


def _check_fractions(values: List[float], name: str) -> List[float]:
    if any(v <= 0 for v in values):
        raise ValueError(f"{name} fractions must be positive")
    if abs(sum(values) - 1.0) > 1e-12:
        raise ValueError(f"{name} fractions must sum to 1, got {sum(values)!r}")
    return values


class PipelineConfig(BaseModel):
    """Settings for one K-step or data-driven two-step run."""
    model_config = ConfigDict(extra="forbid")

    k: int = Field(default=2, ge=1)
    budget: float = Field(default=2000.0, gt=0)
    split: Optional[List[float]] = None
    cv_split: List[float] = Field(default_factory=lambda: [0.125, 0.25, 0.625])
    delta: List[float] = Field(default_factory=lambda: [1.0])
    lambdas: Optional[List[float]] = None
    b: Optional[List[float]] = None
    b_coverage: float = Field(default=0.3, gt=0, le=1)
    b_grid: Optional[List[float]] = None
    folds: int = Field(default=5, ge=2)
    lambda_grid_size: int = Field(default=20, ge=1)
    lambda_grid_ratio: float = Field(default=1e-3, gt=0, lt=1)
    mode: Literal["cv", "theory"] = "cv"
    loss: Literal["smoothed", "logistic"] = "smoothed"
    min_batch_size: int = Field(default=50, ge=1)
    min_cv_labels: int = Field(default=20, ge=2)
    band_floor: float = Field(default=3.0, ge=0)
    trust_radius: Optional[float] = Field(default=0.5, gt=0)
    kernel: KernelSpec = Field(default_factory=KernelSpec.gaussian)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    theory: TheoryConfig = Field(default_factory=TheoryConfig)

    @field_validator("split")
    @classmethod
    def _split_fractions(cls, v):
        return v if v is None else _check_fractions(v, "split")

    @field_validator("cv_split")
    @classmethod
    def _cv_split_fractions(cls, v):
        if len(v) != 3:
            raise ValueError("cv_split needs three fractions (step 1, b selection, step 3)")
        return _check_fractions(v, "cv_split")

    @field_validator("delta", "lambdas", "b", "b_grid")
    @classmethod
    def _positive_list(cls, v):
        if v is not None:
            if not v:
                raise ValueError("list must not be empty")
            if any(x <= 0 for x in v):
                raise ValueError("values must be positive")
        return v

    @model_validator(mode="after")
    def _check_lengths(self) -> "PipelineConfig":
        if self.split is not None and len(self.split) != self.k:
            raise ValueError(f"split has {len(self.split)} fractions for k={self.k}")
        return self

    def budget_split(self) -> List[float]:
        if self.split is not None:
            return list(self.split)
        if self.k == 2:
            return [1 / 8, 7 / 8]
        return [1.0 / self.k] * self.k

    def delta_for(self, k: int) -> float:
        """Bandwidth of iteration k (1-based); the last entry repeats."""
        return self.delta[min(k, len(self.delta)) - 1]

    def lambda_for(self, k: int) -> Optional[float]:
        if self.lambdas is None:
            return None
        return self.lambdas[min(k, len(self.lambdas)) - 1]

    def b_for(self, k: int) -> Optional[float]:
        """Half-width b_{k-1} used by iteration k >= 2."""
        if self.b is None:
            return None
        return self.b[min(k - 1, len(self.b)) - 1]


class ScheduleRow(BaseModel):
    k: int
    n_k: float
    delta: float
    lam: float
    b_prev: Optional[float] = None


class TheorySchedule(BaseModel):
    regime: Literal["smooth", "intermediate", "lipschitz"]
    beta: float
    K: int
    rows: List[ScheduleRow]


class FitReport(BaseModel):
    """Per-iteration record of one pipeline run."""
    mode: str
    loss: str
    k: int
    theta_per_iter: List[List[float]] = Field(default_factory=list)
    labels_used_per_iter: List[int] = Field(default_factory=list)
    p_hat_per_iter: List[float] = Field(default_factory=list)
    c_per_iter: List[float] = Field(default_factory=list)
    clamped_per_iter: List[bool] = Field(default_factory=list)
    lambda_per_iter: List[float] = Field(default_factory=list)
    b_per_iter: List[Optional[float]] = Field(default_factory=list)
    delta_per_iter: List[float] = Field(default_factory=list)
    omega_per_iter: List[float] = Field(default_factory=list)
    converged_per_iter: List[bool] = Field(default_factory=list)
    timings: List[float] = Field(default_factory=list)
    cv_per_iter: List[Optional[CvResult]] = Field(default_factory=list)
    b_candidates: List[BCandidate] = Field(default_factory=list)
    b_hat: Optional[float] = None
    labels_total: int = 0

    @property
    def theta_hat(self) -> np.ndarray:
        return np.asarray(self.theta_per_iter[-1], dtype=float)


# ============================================================================
# Benchmarks
# ============================================================================

class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelName = "conditional_mean"
    n: int = Field(default=20000, ge=1)
    d: int = Field(default=200, ge=1)
    s: int = Field(default=10, ge=1)
    budget: float = Field(default=2000.0, gt=0)
    methods: List[MethodName] = Field(default_factory=lambda: list(ALL_METHODS))
    reps: int = Field(default=50, ge=1)
    seed: int = 0
    sweep: Optional[Union[List[float], Literal["auto10"]]] = None
    scaling: Optional[List[float]] = None
    eval_n: int = Field(default=100_000, ge=1)
    workers: Optional[int] = Field(default=None, ge=1)
    detail: bool = False
    sigma: float = Field(default=0.5, gt=0)
    mu: float = Field(default=2.0, gt=0)
    eps_sd: float = Field(default=0.1, gt=0)

    @model_validator(mode="after")
    def _check_dims(self) -> "ExperimentConfig":
        if self.s > self.d:
            raise ValueError(f"s={self.s} exceeds d={self.d}")
        return self


class BenchmarkRow(BaseModel):
    model: str
    method: str
    metric: MetricName
    b: Optional[float] = None
    N: Optional[float] = None
    mean: float
    sd: float = Field(ge=0)
    reps: int
    degenerate_sd: bool = False


class ReplicateRow(BaseModel):
    model: str
    method: str
    rep: int
    b: Optional[float] = None
    N: Optional[float] = None
    l1: float
    l2: float
    linf: float
    pred_err: float
    labels_used: int
    seconds: float


class BenchmarkReport(BaseModel):
    rows: List[BenchmarkRow] = Field(default_factory=list)
    replicates: List[ReplicateRow] = Field(default_factory=list)
    failures: int = 0
    slopes: Dict[str, float] = Field(default_factory=dict)
