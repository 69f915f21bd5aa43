# pipeline.py
"""
Orchestrator for budgeted active subsampling.

- k_step_fit: K iterations; iteration 1 samples its batch uniformly, later
  iterations sample inside the band around the previous estimate
- two_step_cv_fit: the data-driven two-step variant that picks lambda by CV
  in both steps and the band half-width b by CV on a dedicated batch
- theory_schedule: the (K, N_k, delta_k, lambda_k, b_{k-1}) schedules of the
  three smoothness regimes

The pool is split once into disjoint batches. In k_step_fit, D0 (when K >= 2)
is never labeled; it only serves to estimate the active-set inclusion
probability. two_step_cv_fit has no D0 and estimates it on the unlabeled rows
of the batch it samples.
"""
import logging
import math
import time
import uuid
from typing import List, Optional, Sequence, Tuple

import numpy as np

from contracts.errors import ArgumentError, CutpointError, SamplingDegenerateError, UnsupportedRegimeError
from contracts.models import (
    ActiveSetSpec,
    BCandidate,
    ClassWeights,
    CvResult,
    FitReport,
    LabeledBatch,
    PathResult,
    PipelineConfig,
    ScheduleRow,
    SolverConfig,
    TheorySchedule,
    UnlabeledPool,
)
from infra.logging import log_event, log_warning
from services.active_sampling import (
    LabelOracle,
    draw_and_label,
    estimate_inclusion_prob,
    sampling_rate,
    split_pool,
    standardized_margins,
)
from services.model_selection import cv_b, cv_lambda, lambda_grid, lambda_max
from services.prox_solver import path_following
from services.surrogate_risk import build_loss, class_weights_from

logger = logging.getLogger(__name__)

# Smoothness above which two iterations reach the parametric rate.
BETA_FAST = (1.0 + math.sqrt(3.0)) / 2.0
COVERAGE_LEVELS = tuple(np.round(np.arange(1, 11) / 10.0, 1))


# ============================================================================
# Theory schedules
# ============================================================================

def _strict_ceil(x: float) -> int:
    """Smallest integer strictly greater than x."""
    return int(math.floor(x)) + 1


def theory_schedule(beta: float, s: int, d: int, n: int, N: float,
                    c1: float = 1.0, c2: float = 1.0, c3: float = 1.0) -> TheorySchedule:
    """
    Iteration count and per-iteration tuning for a smoothness level beta >= 1.

    Regimes:
    - beta > (1 + sqrt 3)/2: K = 2
    - 1 < beta <= (1 + sqrt 3)/2: K = ceil(log_r(1 - (beta+1)/(2 beta^2))) + 1,
      r = beta/(2 beta + 1), with log-inflated half-widths for k < K
    - beta = 1: K = ceil(log_3(log N)), every rate carries an extra K

    ceil is the strict ceiling. Budgets are split evenly, N_k = N / K.
    """
    if beta < 1 and not math.isclose(beta, 1.0):
        raise UnsupportedRegimeError(f"no tuning schedule for beta={beta} < 1")
    if not 1 <= s <= d:
        raise ArgumentError(f"s must lie in [1, d={d}], got {s}")
    if d < 2 or n < 1 or N <= 1:
        raise ArgumentError("schedule needs d >= 2, n >= 1 and N > 1")

    log_d = math.log(d)
    ratio = s * log_d / N

    if math.isclose(beta, 1.0):
        K = max(1, _strict_ceil(math.log(math.log(N), 3)))
        kratio = K * ratio
        if kratio >= 1:
            raise ArgumentError(f"budget N={N:g} too small for K s log d = {kratio * N:.4g}")
        rows = [ScheduleRow(k=1, n_k=N / K, delta=c1 * kratio ** (1 / 3),
                            lam=c2 * math.sqrt(N * K * log_d / (n ** 2 * c1 * kratio ** (1 / 3))))]
        log_term = math.log(1.0 / kratio)
        for k in range(2, K + 1):
            b = c3 * log_term ** ((3 - 3.0 ** -(k - 2)) / 4) * kratio ** ((1 - 3.0 ** -(k - 1)) / 2)
            delta = c1 * (b * kratio) ** (1 / 3)
            lam = c2 * math.sqrt(N * K * log_d / (n ** 2 * b * delta))
            rows.append(ScheduleRow(k=k, n_k=N / K, delta=delta, lam=lam, b_prev=b))
        return TheorySchedule(regime="lipschitz", beta=beta, K=K, rows=rows)

    if ratio >= 1:
        raise ArgumentError(f"budget N={N:g} too small for s log d = {ratio * N:.4g}")
    if beta > BETA_FAST:
        regime, K = "smooth", 2
    else:
        r = beta / (2 * beta + 1)
        regime = "intermediate"
        K = _strict_ceil(math.log(1 - (beta + 1) / (2 * beta ** 2)) / math.log(r)) + 1

    delta_1 = c1 * ratio ** (1 / (2 * beta + 1))
    rows = [ScheduleRow(k=1, n_k=N / K, delta=delta_1, lam=c2 * math.sqrt(N * log_d / (n ** 2 * delta_1)))]
    r = beta / (2 * beta + 1)
    log_term = math.log(1.0 / ratio)
    for k in range(2, K + 1):
        if k < K and regime == "intermediate":
            shrink = 1 - r ** (k - 1)
            b = c3 * log_term ** ((2 * beta + 1) * shrink / (2 * (beta + 1))) * ratio ** (beta / (beta + 1) * shrink)
            delta = c1 * (b * ratio) ** (1 / (2 * beta + 1))
        else:
            b = c3 * ratio ** (1 / (2 * beta))
            delta = c1 * ratio ** (1 / (2 * beta))
        lam = c2 * math.sqrt(N * log_d / (n ** 2 * b * delta))
        rows.append(ScheduleRow(k=k, n_k=N / K, delta=delta, lam=lam, b_prev=b))
    return TheorySchedule(regime=regime, beta=beta, K=K, rows=rows)


# ============================================================================
# Shared iteration machinery
# ============================================================================

def coverage_b_grid(pool: UnlabeledPool, theta_ref: np.ndarray,
                    levels: Sequence[float] = COVERAGE_LEVELS) -> List[float]:
    """Half-widths whose bands cover the given fractions of the pool."""
    margins = standardized_margins(pool, theta_ref)
    grid = np.quantile(margins, levels)
    return sorted({float(b) for b in grid if b > 0})


def _batch_fractions(k: int) -> List[float]:
    """D0..DK of equal size; a single passive batch keeps the whole pool."""
    if k == 1:
        return [1.0]
    return [1.0 / (k + 1)] * (k + 1)


def _check_batch_sizes(batches: Sequence[UnlabeledPool], minimum: int):
    smallest = min(len(b) for b in batches)
    if smallest < minimum:
        raise ArgumentError(
            f"pool too small: smallest batch has {smallest} rows, need at least {minimum}"
        )


def _select_lambda(batch: LabeledBatch, delta: float, weights: ClassWeights, cfg: PipelineConfig,
                   fixed: Optional[float], seed: int, key: str,
                   solver: Optional[SolverConfig] = None) -> Tuple[float, Optional[CvResult]]:
    if fixed is not None:
        return fixed, None
    loss = build_loss(cfg.loss, batch, delta, cfg.kernel, weights)
    lam_0 = lambda_max(loss)
    if not lam_0 > 0:
        raise SamplingDegenerateError("gradient vanishes at zero; cannot build a lambda grid")
    grid = lambda_grid(lam_0, cfg.lambda_grid_size, cfg.lambda_grid_ratio)
    cv = cv_lambda(batch, delta, cfg.kernel, weights, grid, cfg.folds, solver or cfg.solver, seed,
                   loss=cfg.loss, key=key)
    return cv.lambda_hat, cv


def _solve(batch: LabeledBatch, delta: float, lam: float, weights: ClassWeights, cfg: PipelineConfig,
           theta_init: Optional[np.ndarray], solver: Optional[SolverConfig] = None) -> PathResult:
    loss = build_loss(cfg.loss, batch, delta, cfg.kernel, weights)
    return path_following(loss, (solver or cfg.solver).targeting(lam), theta_init=theta_init)


def _margin_scale(theta: np.ndarray) -> float:
    return math.sqrt(1.0 + float(np.dot(theta, theta)))


def trust_region(cfg: PipelineConfig, theta_1: np.ndarray) -> SolverConfig:
    """
    Solver settings for fits around theta_1: the l2 ball of radius
    trust_radius * sqrt(1 + ||theta_1||^2) centered at theta_1.
    """
    if cfg.trust_radius is None:
        return cfg.solver
    return cfg.solver.within(theta_1, cfg.trust_radius * _margin_scale(theta_1))


def _active_rate(spec: Optional[ActiveSetSpec], d0: Optional[UnlabeledPool], n_k: float,
                 batch: UnlabeledPool, run_id: str, iteration) -> Tuple[float, float, bool]:
    p_hat = 1.0 if spec is None else estimate_inclusion_prob(d0, spec)
    c, clamped = sampling_rate(n_k, len(batch), p_hat)
    if clamped:
        expected = len(batch) * p_hat
        log_warning("sampling_rate_clamped", run_id=run_id, iteration=str(iteration),
                    target_labels=n_k, expected_labels=expected, shortfall=n_k - expected)
    return p_hat, c, clamped


def _record(report: FitReport, batch: LabeledBatch, path: PathResult, lam: float, delta: float,
            p_hat: float, c: float, clamped: bool, b: Optional[float], cv: Optional[CvResult],
            started: float):
    report.theta_per_iter.append(path.theta_hat.tolist())
    report.labels_used_per_iter.append(len(batch))
    report.p_hat_per_iter.append(p_hat)
    report.c_per_iter.append(c)
    report.clamped_per_iter.append(clamped)
    report.lambda_per_iter.append(lam)
    report.b_per_iter.append(b)
    report.delta_per_iter.append(delta)
    report.omega_per_iter.append(path.per_stage[-1].omega)
    report.converged_per_iter.append(path.converged)
    report.cv_per_iter.append(cv)
    report.timings.append(time.perf_counter() - started)


# ============================================================================
# K-step active subsampling
# ============================================================================

def k_step_fit(pool: UnlabeledPool, oracle: LabelOracle, cfg: PipelineConfig, seed: int,
               truth_s: Optional[int] = None) -> FitReport:
    """
    Run K iterations of active subsampling.

    In "cv" mode each iteration uses the configured lambda_k or CV, and the
    configured b_{k-1} or the b_coverage quantile of the standardized margins
    on D0. In "theory" mode K and every tuning value come from
    theory_schedule with the budget split evenly.

    Args:
        pool: unlabeled rows
        oracle: the only source of labels; charged per labeled row
        cfg: pipeline settings
        seed: drives the batch split, row selection and CV folds
        truth_s: sparsity for theory mode, defaults to cfg.theory.s

    Returns:
        FitReport with one entry per iteration
    """
    run_id = str(uuid.uuid4())
    schedule = None
    if cfg.mode == "theory":
        schedule = theory_schedule(cfg.theory.beta, truth_s or cfg.theory.s, pool.d, len(pool), cfg.budget,
                                   cfg.theory.c1, cfg.theory.c2, cfg.theory.c3)
        K = schedule.K
        budgets = [row.n_k for row in schedule.rows]
    else:
        K = cfg.k
        budgets = [cfg.budget * f for f in cfg.budget_split()]

    batches = split_pool(pool, _batch_fractions(K), seed)
    _check_batch_sizes(batches, cfg.min_batch_size)
    d0 = batches[0] if K > 1 else None
    work = batches[1:] if K > 1 else batches

    report = FitReport(mode=cfg.mode, loss=cfg.loss, k=K)
    weights: Optional[ClassWeights] = None
    theta_prev: Optional[np.ndarray] = None
    log_event("fit_started", run_id=run_id, algorithm="k_step", k=K, budget=cfg.budget, n=len(pool), d=pool.d)

    for k in range(1, K + 1):
        started = time.perf_counter()
        oracle.iteration = k
        try:
            if schedule is not None:
                row = schedule.rows[k - 1]
                delta, fixed_lam, b = row.delta, row.lam, row.b_prev
            else:
                delta, fixed_lam, b = cfg.delta_for(k), cfg.lambda_for(k), None
                if k >= 2:
                    b = cfg.b_for(k)
                    if b is None:
                        b = float(np.quantile(standardized_margins(d0, theta_prev), cfg.b_coverage))

            spec = None if k == 1 else ActiveSetSpec(theta_ref=theta_prev, b=b)
            p_hat, c, clamped = _active_rate(spec, d0, budgets[k - 1], work[k - 1], run_id, k)
            batch = draw_and_label(work[k - 1], spec, c, oracle, seed, k)
            if weights is None:
                weights = class_weights_from(batch)

            lam, cv = _select_lambda(batch, delta, weights, cfg, fixed_lam, seed, f"iter{k}")
            path = _solve(batch, delta, lam, weights, cfg, theta_prev)
        except CutpointError as e:
            raise e.annotate(k)

        _record(report, batch, path, lam, delta, p_hat, c, clamped, b, cv, started)
        theta_prev = path.theta_hat
        log_event("iteration_finished", run_id=run_id, iteration=k, labels=len(batch), p_hat=p_hat,
                  rate=c, lam=lam, b=b, delta=delta, support=len(path.support),
                  converged=path.converged)

    report.labels_total = oracle.labels_issued
    return report


# ============================================================================
# Data-driven two-step subsampling
# ============================================================================

def candidate_b_grid(cfg: PipelineConfig, d_cv: UnlabeledPool, d2: UnlabeledPool, theta_1: np.ndarray,
                     n2: float, run_id: Optional[str] = None) -> List[float]:
    """
    Half-widths tried in step 2.

    A configured b_grid is taken as given. Otherwise the candidates are the
    coverage deciles of D_cv around theta_1 whose raw half-width
    b * sqrt(1 + ||theta_1||^2) reaches band_floor * delta_2; when none does,
    the floor itself is the only candidate. Bands holding fewer than N2 rows
    of D2 are dropped as long as a wider candidate is left.
    """
    if cfg.b_grid:
        grid = sorted(cfg.b_grid)
    else:
        floor = cfg.band_floor * cfg.delta_for(2) / _margin_scale(theta_1)
        grid = [b for b in coverage_b_grid(d_cv, theta_1) if b >= floor]
        if not grid and floor > 0:
            grid = [floor]
    if not grid:
        raise SamplingDegenerateError("no positive half-width covers any row of the b selection batch")

    feasible = [b for b in grid
                if estimate_inclusion_prob(d2, ActiveSetSpec(theta_ref=theta_1, b=b)) * len(d2) >= n2]
    if len(feasible) < len(grid):
        log_event("b_candidates_dropped", run_id=run_id, dropped=[b for b in grid if b not in feasible],
                  target_labels=n2)
    return feasible or grid[-1:]


def two_step_cv_fit(pool: UnlabeledPool, oracle: LabelOracle, cfg: PipelineConfig, seed: int) -> FitReport:
    """
    Two-step active subsampling with CV for lambda and b.

    The pool is split into D1, D_cv and D2 in proportion to
    cfg.cv_split = (N1, N_cv, N2) / N, so every step samples at the overall
    rate N/n. Inclusion probabilities are estimated on the unlabeled rows of
    the batch being sampled.

    Step 1 samples D1 uniformly, picks lambda_1 by CV and fits theta_1.
    Step 2 samples D_cv independently for every candidate b at rate
    N_cv / (|Delta| |D_cv| p_hat_b), runs the lambda CV on each sample that
    holds at least min_cv_labels labels of both classes, and keeps the b with
    the lowest CV minimum.
    Step 3 samples D2 with b_hat, picks lambda_2 by CV and fits theta_2 warm
    started from theta_1. Step 2 and step 3 fits stay inside the trust region
    around theta_1.

    A configured b_grid with a single value is a fixed b and runs k_step_fit.
    """
    if cfg.b_grid is not None and len(cfg.b_grid) == 1:
        report = k_step_fit(pool, oracle, cfg.model_copy(update={"k": 2, "b": list(cfg.b_grid)}), seed)
        report.b_hat = cfg.b_grid[0]
        return report

    run_id = str(uuid.uuid4())
    d1, d_cv, d2 = split_pool(pool, cfg.cv_split, seed)
    _check_batch_sizes([d1, d_cv, d2], cfg.min_batch_size)
    n1, n_cv, n2 = (cfg.budget * f for f in cfg.cv_split)
    min_labels = max(cfg.min_cv_labels, 2 * cfg.folds)

    report = FitReport(mode="cv", loss=cfg.loss, k=2)
    log_event("fit_started", run_id=run_id, algorithm="two_step_cv", budget=cfg.budget, n=len(pool), d=pool.d)

    # Step 1
    started = time.perf_counter()
    oracle.iteration = 1
    try:
        delta_1 = cfg.delta_for(1)
        p_hat, c, clamped = _active_rate(None, None, n1, d1, run_id, 1)
        batch_1 = draw_and_label(d1, None, c, oracle, seed, 1)
        weights = class_weights_from(batch_1)
        lam_1, cv_1 = _select_lambda(batch_1, delta_1, weights, cfg, cfg.lambda_for(1), seed, "iter1")
        path_1 = _solve(batch_1, delta_1, lam_1, weights, cfg, None)
    except CutpointError as e:
        raise e.annotate(1)
    _record(report, batch_1, path_1, lam_1, delta_1, p_hat, c, clamped, None, cv_1, started)
    theta_1 = path_1.theta_hat
    solver = trust_region(cfg, theta_1)

    # Step 2
    started = time.perf_counter()
    delta_2 = cfg.delta_for(2)
    candidates: List[BCandidate] = []
    oracle.iteration = 2
    try:
        grid = candidate_b_grid(cfg, d_cv, d2, theta_1, n2, run_id)
        for j, b in enumerate(grid):
            spec = ActiveSetSpec(theta_ref=theta_1, b=b)
            p_hat_b, c_b, _ = _active_rate(spec, d_cv, n_cv / len(grid), d_cv, run_id, f"cv b={b:.4g}")
            batch_b = draw_and_label(d_cv, spec, c_b, oracle, seed, f"cv{j}")
            if len(batch_b) < min_labels or len(np.unique(batch_b.y)) < 2:
                log_warning("b_candidate_skipped", run_id=run_id, b=b, labels=len(batch_b), needed=min_labels)
                continue
            lam_b, cv_b_result = _select_lambda(batch_b, delta_2, weights, cfg, None, seed, f"cv{j}", solver)
            candidates.append(BCandidate(b=b, cv_min=cv_b_result.cv_min, lambda_hat=lam_b,
                                         labels=len(batch_b), p_hat=p_hat_b))
        if not candidates:
            raise SamplingDegenerateError(
                f"no b candidate reached {min_labels} labels of both classes for cross-validation"
            )
        b_hat = cv_b(candidates)
    except CutpointError as e:
        raise e.annotate(2)
    log_event("b_selected", run_id=run_id, b_hat=b_hat, candidates=len(candidates),
              seconds=time.perf_counter() - started)

    # Step 3
    started = time.perf_counter()
    try:
        spec = ActiveSetSpec(theta_ref=theta_1, b=b_hat)
        p_hat, c, clamped = _active_rate(spec, d2, n2, d2, run_id, 2)
        batch_2 = draw_and_label(d2, spec, c, oracle, seed, 2)
        lam_2, cv_2 = _select_lambda(batch_2, delta_2, weights, cfg, cfg.lambda_for(2), seed, "iter2", solver)
        path_2 = _solve(batch_2, delta_2, lam_2, weights, cfg, theta_1, solver)
    except CutpointError as e:
        raise e.annotate(2)
    _record(report, batch_2, path_2, lam_2, delta_2, p_hat, c, clamped, b_hat, cv_2, started)

    report.b_candidates = candidates
    report.b_hat = b_hat
    report.labels_total = oracle.labels_issued
    log_event("fit_finished", run_id=run_id, labels_total=report.labels_total, support=len(path_2.support))
    return report


def fit(pool: UnlabeledPool, oracle: LabelOracle, cfg: PipelineConfig, seed: int) -> FitReport:
    """Dispatch: theory mode, K != 2 or a fixed b run k_step_fit; otherwise two_step_cv_fit."""
    if cfg.mode == "theory" or cfg.k != 2 or cfg.b is not None:
        return k_step_fit(pool, oracle, cfg, seed)
    return two_step_cv_fit(pool, oracle, cfg, seed)
