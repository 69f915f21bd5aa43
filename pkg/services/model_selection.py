# services/model_selection.py
"""
M-fold cross-validation with the one-standard-error rule for lambda, and the
CV-driven choice of the active-set half-width b.
"""
import logging
from typing import List, Sequence, Tuple, Union

import numpy as np

from contracts.errors import ArgumentError
from contracts.models import BCandidate, ClassWeights, CvPoint, CvResult, KernelSpec, LabeledBatch, SolverConfig
from infra.logging import log_event
from infra.random_streams import Key, stream
from services.kernels import surrogate_loss
from services.prox_solver import proximal_gradient
from services.surrogate_risk import LossOracle, build_loss

logger = logging.getLogger(__name__)


def lambda_grid(lambda_0: float, size: int = 20, ratio: float = 1e-3) -> List[float]:
    """`size` log-spaced penalties from lambda_0 down to ratio * lambda_0, descending."""
    if not lambda_0 > 0:
        raise ArgumentError(f"lambda_0 must be positive, got {lambda_0}")
    if size == 1:
        return [float(lambda_0)]
    return np.geomspace(lambda_0, lambda_0 * ratio, size).tolist()


def lambda_max(loss: LossOracle) -> float:
    """||grad f(0)||_inf, the smallest penalty with an all-zero solution."""
    return float(np.max(np.abs(loss.gradient(np.zeros(loss.d)))))


def one_se_rule(curve: Sequence[CvPoint]) -> Tuple[float, float, float, float]:
    """
    Apply the one-standard-error rule to a CV curve.

    Returns:
        (lambda_hat, lambda_bar, cv_min, se_min) where lambda_bar minimizes the
        mean score (largest lambda on ties), se_min = sd(fold scores at
        lambda_bar) / sqrt(M), and lambda_hat is the largest lambda whose mean
        lies within cv_min + se_min
    """
    if not curve:
        raise ArgumentError("empty CV curve")
    points = sorted(curve, key=lambda p: p.lam, reverse=True)
    means = np.array([p.mean_cv for p in points])
    best = int(np.argmin(means))
    scores = np.asarray(points[best].fold_scores, dtype=float)
    se = float(np.std(scores, ddof=1) / np.sqrt(len(scores))) if len(scores) > 1 else 0.0
    cv_min = float(means[best])
    within = [p.lam for p in points if p.mean_cv <= cv_min + se]
    return max(within), points[best].lam, cv_min, se


def fold_assignment(n: int, folds: int, seed: int, key: Key = "cv") -> np.ndarray:
    """Balanced random fold labels 0..folds-1 for n records."""
    perm = stream(seed, "folds", key).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % folds
    return labels


def _held_out_score(theta: np.ndarray, batch: LabeledBatch, delta: float, kernel: KernelSpec,
                    weights: ClassWeights) -> float:
    u = batch.y * (batch.x - batch.z @ theta)
    return float(np.mean(weights.gamma(batch.y) * surrogate_loss(u, delta, kernel)))


def cv_lambda(batch: LabeledBatch, delta: float, kernel: KernelSpec, weights: ClassWeights,
              lambda_grid: Sequence[float], folds: int, solver: SolverConfig, seed: int,
              loss: str = "smoothed", key: Key = "cv") -> CvResult:
    """
    Choose lambda by M-fold CV and the one-standard-error rule.

    Each training split is rescaled by M/(M-1) so its risk stays on the scale
    of the whole batch. Fits walk the descending grid, each warm-started from
    the previous penalty. Held-out folds are scored with the smoothed
    surrogate at the same delta, whatever the training loss.

    Args:
        batch: labeled records of one iteration
        delta: bandwidth of the surrogate
        kernel: kernel specification
        weights: frozen class weights of the run
        lambda_grid: candidate penalties, any order
        folds: M >= 2
        solver: proximal-gradient settings (eps_tgt is the per-penalty precision)
        seed: fold-assignment seed
        loss: training loss, "smoothed" or "logistic"
        key: extra stream key so different CV calls use different folds
    """
    if folds < 2:
        raise ArgumentError(f"CV needs at least 2 folds, got {folds}")
    if len(batch) < 2 * folds:
        raise ArgumentError(f"CV with {folds} folds needs at least {2 * folds} labeled records, got {len(batch)}")
    grid = sorted({float(lam) for lam in lambda_grid}, reverse=True)
    if not grid:
        raise ArgumentError("lambda grid is empty")

    labels = fold_assignment(len(batch), folds, seed, key)
    train_scale = batch.scale * folds / (folds - 1)
    scores = np.zeros((len(grid), folds))

    for m in range(folds):
        train = batch.subset(np.flatnonzero(labels != m), scale=train_scale)
        held_out = batch.subset(np.flatnonzero(labels == m))
        if len(np.unique(train.y)) < 2:
            log_event("cv_single_class_fold", fold=m, records=len(train))
        fold_loss = build_loss(loss, train, delta, kernel, weights)
        theta = solver.start_point(batch.d)
        for i, lam in enumerate(grid):
            theta, _ = proximal_gradient(fold_loss, lam, solver.eps_tgt, theta, solver)
            scores[i, m] = _held_out_score(theta, held_out, delta, kernel, weights)

    curve = [CvPoint(lam=lam, mean_cv=float(np.mean(scores[i])), fold_scores=scores[i].tolist())
             for i, lam in enumerate(grid)]
    lambda_hat, lambda_bar, cv_min, se_min = one_se_rule(curve)
    log_event("cv_selected", key=str(key), lambda_hat=lambda_hat, lambda_bar=lambda_bar,
              cv_min=cv_min, se_min=se_min, records=len(batch))
    return CvResult(lambda_hat=lambda_hat, lambda_bar=lambda_bar, cv_curve=curve, cv_min=cv_min, se_min=se_min)


def cv_b(candidates: Sequence[Union[BCandidate, Tuple[float, float]]]) -> float:
    """argmin of the CV scores over b; ties go to the smaller b."""
    if not candidates:
        raise ArgumentError("no b candidates to choose from")
    pairs = [(c.cv_min, c.b) if isinstance(c, BCandidate) else (float(c[1]), float(c[0])) for c in candidates]
    score, b = min(pairs)
    logger.debug("b selected: %.4g (cv %.5g) among %d candidates", b, score, len(pairs))
    return b
