# bench_harness.py
"""
Replicated simulation experiments.

- run_comparison: every method arm on fresh (theta*, pool) per replicate
- run_b_sweep: two-step arms at fixed half-widths b, passive arms as reference
- run_rate_scaling: comparison over a grid of budgets N plus log-log slopes

Arms within a replicate share theta*, the pool and the evaluation pool, each
with its own label oracle. Replicates run in a process pool and are merged
by replicate index, so results do not depend on the worker count.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from contracts.errors import ArgumentError, CutpointError
from contracts.models import (
    ALL_METRICS,
    BenchmarkReport,
    BenchmarkRow,
    ExperimentConfig,
    PipelineConfig,
    ReplicateRow,
    TruthSpec,
    UnlabeledPool,
)
from infra.logging import log_error, log_event
from infra.random_streams import stream
from pipeline import coverage_b_grid, k_step_fit, two_step_cv_fit
from services.active_sampling import SimulationOracle
from services.datagen import generate_pool, make_truth
from services.scoring import estimation_errors, prediction_error

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["model", "method", "metric", "b", "N", "mean", "sd", "reps"]
PASSIVE_METHODS = ("passive_pf", "passive_lr")


@dataclass(frozen=True)
class ReplicateTask:
    exp: ExperimentConfig
    pipe: PipelineConfig
    rep: int
    budget: float
    b_grid: Optional[Tuple[float, ...]] = None
    record_n: bool = False


def replicate_seed(seed: int, rep: int) -> int:
    """Per-replicate seed derived from the experiment seed."""
    return int(stream(seed, "replicate", rep).integers(0, 2 ** 62))


def _truth(exp: ExperimentConfig, seed: int) -> TruthSpec:
    return make_truth(exp.model, exp.d, exp.s, seed, sigma=exp.sigma, mu=exp.mu, eps_sd=exp.eps_sd)


def arm_config(pipe: PipelineConfig, method: str, budget: float, b: Optional[float] = None) -> PipelineConfig:
    """Pipeline settings of one method arm."""
    loss = "logistic" if method.endswith("_lr") else "smoothed"
    update = {"budget": budget, "loss": loss, "mode": "cv"}
    split = pipe.split if pipe.split is not None and len(pipe.split) == 2 else None
    if method in PASSIVE_METHODS:
        update.update(k=1, b=None, split=None)
    elif b is not None:
        update.update(k=2, b=[b], split=split)
    else:
        update.update(k=2, b=None, split=split)
    return pipe.model_copy(update=update)


def run_arm(method: str, pool: UnlabeledPool, truth: TruthSpec, eval_pool: UnlabeledPool,
            pipe: PipelineConfig, budget: float, seed: int, rep: int, model: str,
            b: Optional[float] = None, record_n: bool = False) -> ReplicateRow:
    """Fit one method on the shared pool with its own oracle and score it."""
    cfg = arm_config(pipe, method, budget, b)
    oracle = SimulationOracle.from_pool(pool, budget)
    started = time.perf_counter()
    if method in PASSIVE_METHODS or b is not None:
        report = k_step_fit(pool, oracle, cfg, seed)
    else:
        report = two_step_cv_fit(pool, oracle, cfg, seed)
    seconds = time.perf_counter() - started

    theta_hat = report.theta_hat
    errors = estimation_errors(theta_hat, truth.theta_star)
    return ReplicateRow(
        model=model, method=method, rep=rep, b=b, N=budget if record_n else None,
        pred_err=prediction_error(theta_hat, eval_pool),
        labels_used=report.labels_total, seconds=seconds, **errors,
    )


def run_replicate(task: ReplicateTask) -> Tuple[List[ReplicateRow], int]:
    """
    All arms of one replicate.

    Passive arms are fit once and copied to every b of a sweep grid.

    Returns:
        (rows, number of failed arms)
    """
    exp = task.exp
    seed = replicate_seed(exp.seed, task.rep)
    truth = _truth(exp, seed)
    pool = generate_pool(truth, exp.n, seed, key="pool")
    eval_pool = generate_pool(truth, exp.eval_n, seed, key="eval")

    rows: List[ReplicateRow] = []
    failures = 0
    grid: Sequence[Optional[float]] = task.b_grid or (None,)
    for method in exp.methods:
        b_values = (None,) if method in PASSIVE_METHODS else grid
        for b in b_values:
            try:
                row = run_arm(method, pool, truth, eval_pool, task.pipe, task.budget, seed, task.rep,
                              exp.model, b=b, record_n=task.record_n)
            except CutpointError as e:
                failures += 1
                log_error(str(e), method=method, rep=task.rep, b=b, budget=task.budget,
                          error_type=type(e).__name__)
                continue
            if method in PASSIVE_METHODS and task.b_grid:
                rows.extend(row.model_copy(update={"b": bv}) for bv in task.b_grid)
            else:
                rows.append(row)
    log_event("replicate_finished", rep=task.rep, budget=task.budget, arms=len(rows), failures=failures)
    return rows, failures


def _execute(tasks: List[ReplicateTask], workers: Optional[int]) -> Tuple[List[ReplicateRow], int]:
    workers = workers or config.WORKERS
    if workers <= 1 or len(tasks) <= 1:
        results = [run_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_replicate, tasks))
    rows = [row for batch, _ in results for row in batch]
    return rows, sum(f for _, f in results)


# ============================================================================
# Aggregation and CSV
# ============================================================================

def replicate_frame(replicates: Sequence[ReplicateRow]) -> pd.DataFrame:
    columns = list(ReplicateRow.model_fields)
    return pd.DataFrame([r.model_dump() for r in replicates], columns=columns)


def aggregate(replicates: Sequence[ReplicateRow]) -> List[BenchmarkRow]:
    """
    Mean and sd (ddof=1) per (model, method, b, N, metric).

    A group with a single replicate reports sd = 0 and degenerate_sd = True.
    """
    if not replicates:
        return []
    long = replicate_frame(replicates).melt(
        id_vars=["model", "method", "rep", "b", "N"], value_vars=ALL_METRICS,
        var_name="metric", value_name="value",
    )
    grouped = long.groupby(["model", "method", "b", "N", "metric"], dropna=False, sort=False)["value"]
    stats = grouped.agg(mean="mean", sd="std", reps="count").reset_index()

    rows = []
    for rec in stats.itertuples(index=False):
        single = rec.reps < 2
        rows.append(BenchmarkRow(
            model=rec.model, method=rec.method, metric=rec.metric,
            b=None if pd.isna(rec.b) else float(rec.b),
            N=None if pd.isna(rec.N) else float(rec.N),
            mean=float(rec.mean), sd=0.0 if single else float(rec.sd),
            reps=int(rec.reps), degenerate_sd=single,
        ))
    return rows


def report_frame(report: BenchmarkReport) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in report.rows], columns=REPORT_COLUMNS + ["degenerate_sd"])[REPORT_COLUMNS]


def write_report_csv(report: BenchmarkReport, path: Union[str, Path],
                     detail_path: Optional[Union[str, Path]] = None) -> Path:
    """Summary CSV `model,method,metric,b,N,mean,sd,reps`; optional per-replicate CSV."""
    path = Path(path)
    report_frame(report).to_csv(path, index=False, float_format="%.10g")
    if detail_path is not None:
        replicate_frame(report.replicates).to_csv(detail_path, index=False, float_format="%.10g")
    log_event("report_written", path=str(path), rows=len(report.rows), failures=report.failures)
    return path


# ============================================================================
# Experiments
# ============================================================================

def run_comparison(exp: ExperimentConfig, pipe: Optional[PipelineConfig] = None,
                   workers: Optional[int] = None) -> BenchmarkReport:
    """Mean(sd) of every metric for every method over exp.reps replicates."""
    pipe = pipe or PipelineConfig()
    tasks = [ReplicateTask(exp=exp, pipe=pipe, rep=r, budget=exp.budget) for r in range(exp.reps)]
    replicates, failures = _execute(tasks, workers or exp.workers)
    return BenchmarkReport(rows=aggregate(replicates), replicates=replicates, failures=failures)


def sweep_grid(exp: ExperimentConfig) -> List[float]:
    """The configured b grid, or the auto10 coverage grid on a pilot pool."""
    if exp.sweep is None:
        raise ArgumentError("sweep needs a b grid (list of values or 'auto10')")
    if exp.sweep == "auto10":
        truth = _truth(exp, exp.seed)
        pilot = generate_pool(truth, exp.n, exp.seed, key="pilot")
        return coverage_b_grid(pilot, truth.theta_star)
    if not exp.sweep:
        raise ArgumentError("sweep grid is empty")
    return sorted(float(b) for b in exp.sweep)


def run_b_sweep(exp: ExperimentConfig, pipe: Optional[PipelineConfig] = None,
                workers: Optional[int] = None) -> BenchmarkReport:
    """Two-step arms at each fixed b; passive rows repeated per b for side-by-side plotting."""
    pipe = pipe or PipelineConfig()
    grid = tuple(sweep_grid(exp))
    log_event("sweep_grid", b_grid=list(grid))
    tasks = [ReplicateTask(exp=exp, pipe=pipe, rep=r, budget=exp.budget, b_grid=grid) for r in range(exp.reps)]
    replicates, failures = _execute(tasks, workers or exp.workers)
    return BenchmarkReport(rows=aggregate(replicates), replicates=replicates, failures=failures)


def log_log_slopes(rows: Sequence[BenchmarkRow], metric: str = "l2") -> Dict[str, float]:
    """Least-squares slope of log mean error against log N, per method."""
    frame = pd.DataFrame([r.model_dump() for r in rows if r.metric == metric and r.N is not None])
    slopes = {}
    if frame.empty:
        return slopes
    for method, grp in frame.groupby("method", sort=False):
        grp = grp.sort_values("N")
        if len(grp) >= 2 and np.all(grp["mean"] > 0):
            slopes[method] = float(np.polyfit(np.log(grp["N"]), np.log(grp["mean"]), 1)[0])
    return slopes


def run_rate_scaling(exp: ExperimentConfig, pipe: Optional[PipelineConfig] = None,
                     workers: Optional[int] = None) -> BenchmarkReport:
    """Comparison at every budget in exp.scaling, with l2 log-log slopes per method."""
    if not exp.scaling or len(exp.scaling) < 3:
        raise ArgumentError("rate scaling needs at least 3 budgets")
    pipe = pipe or PipelineConfig()
    tasks = [ReplicateTask(exp=exp, pipe=pipe, rep=r, budget=float(N), record_n=True)
             for N in sorted(exp.scaling) for r in range(exp.reps)]
    replicates, failures = _execute(tasks, workers or exp.workers)
    rows = aggregate(replicates)
    slopes = log_log_slopes(rows)
    log_event("rate_scaling_finished", slopes=slopes, failures=failures)
    return BenchmarkReport(rows=rows, replicates=replicates, failures=failures, slopes=slopes)
