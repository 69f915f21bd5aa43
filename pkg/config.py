# config.py
"""
Configuration for Cutpoint.

Precedence, lowest to highest: built-in defaults, environment (.env),
config file (TOML with [pipeline], [theory], [kernel], [solver], [data] and
[bench] sections), then CLI overrides (`--set key=value` and dedicated flags).
"""
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from contracts.errors import ConfigError
from contracts.models import (
    ALL_METHODS,
    ExperimentConfig,
    KernelFamily,
    MethodName,
    ModelName,
    PipelineConfig,
    SolverConfig,
    TheoryConfig,
)
from services.kernels import make_kernel

# Load environment variables from .env file
load_dotenv()

# ============================================================================
# Environment Defaults
# ============================================================================
SEED = int(os.environ.get("CUTPOINT_SEED", "0"))
WORKERS = int(os.environ.get("CUTPOINT_WORKERS", str(os.cpu_count() or 1)))
LOG_LEVEL = os.environ.get("CUTPOINT_LOG_LEVEL", "INFO").upper()

# Rows in the fresh evaluation pool used for prediction error
EVAL_N = int(os.environ.get("CUTPOINT_EVAL_N", "100000"))

# Per-stage cap on proximal-gradient steps
MAX_INNER_ITERS = int(os.environ.get("CUTPOINT_MAX_INNER_ITERS", "500"))

# ============================================================================
# Config Key Registry
# ============================================================================
CONFIG_KEYS: Dict[str, str] = {
    "seed": "global seed for splits, selection, folds and simulation",
    "workers": "parallel replicate workers for benchmark/sweep",
    # pipeline
    "pipeline.k": "number of sampling iterations K (default 2)",
    "pipeline.budget": "expected label budget N",
    "pipeline.split": "budget fractions per iteration, sum 1 (default 1/8, 7/8 for K=2)",
    "pipeline.cv_split": "two-step CV budget fractions (N1, Ncv, N2)/N (default 1/8, 1/4, 5/8)",
    "pipeline.delta": "bandwidth per iteration; the last value repeats (default [1.0])",
    "pipeline.lambdas": "fixed penalty per iteration; unset = CV",
    "pipeline.b": "fixed half-width per iteration k >= 2; unset = CV or coverage quantile",
    "pipeline.b_coverage": "coverage fraction choosing b when K-step runs without b (default 0.3)",
    "pipeline.b_grid": "candidate half-widths for the two-step b selection; unset = 10 coverage quantiles",
    "pipeline.folds": "CV folds M (default 5)",
    "pipeline.lambda_grid_size": "CV lambda grid size (default 20)",
    "pipeline.lambda_grid_ratio": "smallest / largest CV lambda (default 1e-3)",
    "pipeline.mode": "'cv' (data-driven) or 'theory' (schedule tuning)",
    "pipeline.loss": "'smoothed' or 'logistic'",
    "pipeline.min_batch_size": "minimum rows per pool batch (default 50)",
    "pipeline.min_cv_labels": "labels a two-step b candidate needs before it is scored (default 20)",
    "pipeline.band_floor": "smallest automatic band half-width, in bandwidths delta (default 3; 0 = off)",
    "pipeline.trust_radius": "two-step final fits stay within this multiple of sqrt(1 + |theta_1|^2) "
                             "of theta_1 (default 0.5; unset = off)",
    # theory
    "theory.beta": "smoothness level beta >= 1 for theory mode",
    "theory.s": "sparsity s used by the theory schedule (default 10)",
    "theory.c1": "bandwidth constant",
    "theory.c2": "penalty constant",
    "theory.c3": "half-width constant",
    # kernel
    "kernel.name": "'gaussian', 'epanechnikov' or 'higher_order'",
    "kernel.order": "order of the higher_order kernel",
    # solver
    "solver.eta": "initial step size (halved by backtracking)",
    "solver.nu": "intermediate stage precision factor",
    "solver.phi": "lambda decay per stage",
    "solver.T": "number of stages (wins over phi)",
    "solver.eps_tgt": "final-stage precision",
    "solver.max_inner_iters": "proximal-gradient step cap per stage",
    "solver.max_halvings": "backtracking halvings per step",
    "solver.ball_radius": "l2 radius of the constraint set; unset = unconstrained",
    # data
    "data.model": "'logistic', 'binary_response' or 'conditional_mean'",
    "data.n": "pool size",
    "data.d": "covariate dimension",
    "data.s": "sparsity of theta*",
    "data.sigma": "binary_response noise scale",
    "data.mu": "conditional_mean class separation",
    "data.eps_sd": "conditional_mean noise sd",
    # bench
    "bench.methods": f"subset of {ALL_METHODS}",
    "bench.reps": "replicates per configuration",
    "bench.sweep": "b grid for the sweep, or 'auto10'",
    "bench.scaling": "budget grid for rate scaling (>= 3 values)",
    "bench.eval_n": "evaluation pool size for prediction error",
    "bench.detail": "also write the per-replicate CSV",
}


def describe_keys() -> str:
    """One line per config key, for --help."""
    width = max(len(k) for k in CONFIG_KEYS)
    return "\n".join(f"  {key.ljust(width)}  {text}" for key, text in CONFIG_KEYS.items())


# ============================================================================
# Validated Sections
# ============================================================================

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class KernelConfig(_Section):
    name: KernelFamily = "gaussian"
    order: Optional[int] = Field(default=None, ge=1)


class DataConfig(_Section):
    model: ModelName = "conditional_mean"
    n: int = Field(default=20000, ge=1)
    d: int = Field(default=200, ge=1)
    s: int = Field(default=10, ge=1)
    sigma: float = Field(default=0.5, gt=0)
    mu: float = Field(default=2.0, gt=0)
    eps_sd: float = Field(default=0.1, gt=0)


class BenchConfig(_Section):
    methods: List[MethodName] = Field(default_factory=lambda: list(ALL_METHODS))
    reps: int = Field(default=50, ge=1)
    sweep: Optional[Union[List[float], Literal["auto10"]]] = None
    scaling: Optional[List[float]] = None
    eval_n: int = Field(default_factory=lambda: EVAL_N, ge=1)
    detail: bool = False


class PipelineSection(_Section):
    k: int = 2
    budget: float = 2000.0
    split: Optional[List[float]] = None
    cv_split: List[float] = Field(default_factory=lambda: [0.125, 0.25, 0.625])
    delta: List[float] = Field(default_factory=lambda: [1.0])
    lambdas: Optional[List[float]] = None
    b: Optional[List[float]] = None
    b_coverage: float = 0.3
    b_grid: Optional[List[float]] = None
    folds: int = 5
    lambda_grid_size: int = 20
    lambda_grid_ratio: float = 1e-3
    mode: str = "cv"
    loss: str = "smoothed"
    min_batch_size: int = 50
    min_cv_labels: int = 20
    band_floor: float = 3.0
    trust_radius: Optional[float] = 0.5


class SolverSection(_Section):
    eta: float = 1.0
    nu: float = 0.25
    phi: Optional[float] = None
    T: Optional[int] = 20
    eps_tgt: float = 1e-6
    max_inner_iters: int = Field(default_factory=lambda: MAX_INNER_ITERS)
    max_halvings: int = 30
    ball_radius: Optional[float] = None


class AppConfig(_Section):
    seed: int = Field(default_factory=lambda: SEED)
    workers: Optional[int] = Field(default=None, ge=1)
    pipeline: PipelineSection = Field(default_factory=PipelineSection)
    theory: TheoryConfig = Field(default_factory=TheoryConfig)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    solver: SolverSection = Field(default_factory=SolverSection)
    data: DataConfig = Field(default_factory=DataConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)

    def pipeline_config(self) -> PipelineConfig:
        """Fully validated pipeline settings, kernel tail coefficient tied to the budget."""
        try:
            kernel = make_kernel(self.kernel.name, self.kernel.order, self.pipeline.budget)
        except ValueError as e:
            raise ConfigError(str(e), key="kernel.order") from e
        try:
            solver = SolverConfig(**self.solver.model_dump())
        except ValidationError as e:
            raise _config_error(e, "solver") from e
        try:
            return PipelineConfig(**self.pipeline.model_dump(), kernel=kernel, solver=solver, theory=self.theory)
        except ValidationError as e:
            raise _config_error(e, "pipeline") from e

    def experiment_config(self) -> ExperimentConfig:
        try:
            return ExperimentConfig(
                model=self.data.model, n=self.data.n, d=self.data.d, s=self.data.s,
                sigma=self.data.sigma, mu=self.data.mu, eps_sd=self.data.eps_sd,
                budget=self.pipeline.budget, seed=self.seed, workers=self.workers,
                methods=self.bench.methods, reps=self.bench.reps, sweep=self.bench.sweep,
                scaling=self.bench.scaling, eval_n=self.bench.eval_n, detail=self.bench.detail,
            )
        except ValidationError as e:
            raise _config_error(e, "data") from e


def _config_error(e: ValidationError, section: str) -> ConfigError:
    first = e.errors()[0]
    loc = ".".join(str(part) for part in first["loc"])
    if not loc:
        key = section or None
    elif "." in loc or loc in CONFIG_KEYS or not section:
        key = loc
    else:
        key = f"{section}.{loc}"
    return ConfigError(f"invalid value for '{key}': {first['msg']}", key=key)


# ============================================================================
# Loading
# ============================================================================

def _flatten(tree: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for name, value in tree.items():
        key = f"{prefix}{name}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{key}."))
        else:
            flat[key] = value
    return flat


def _nest(flat: Dict[str, Any]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for key, value in flat.items():
        node = tree
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return tree


def _check_known(keys: Iterable[str]):
    for key in keys:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}'", key=key)


def parse_override(item: str) -> Dict[str, Any]:
    """
    Parse `key=value`. The value is read as a TOML literal (numbers, lists,
    booleans, quoted strings); anything else is kept as a bare string.
    """
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form key=value")
    key, raw = (part.strip() for part in item.split("=", 1))
    if not key:
        raise ConfigError(f"override '{item}' has an empty key")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return {key: value}


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            tree = tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return _flatten(tree)


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = (),
                extra: Optional[Dict[str, Any]] = None) -> AppConfig:
    """
    Merge file values, `--set` overrides and dedicated CLI flags into an AppConfig.

    Args:
        path: optional TOML file
        overrides: "key=value" strings
        extra: already-typed dotted keys from dedicated flags (highest precedence)

    Raises:
        ConfigError: unknown key (named), bad syntax or invalid value
    """
    flat: Dict[str, Any] = {}
    if path is not None:
        flat.update(read_config_file(path))
    for item in overrides:
        flat.update(parse_override(item))
    flat.update({k: v for k, v in (extra or {}).items() if v is not None})
    _check_known(flat)
    try:
        return AppConfig(**_nest(flat))
    except ValidationError as e:
        raise _config_error(e, "") from e
