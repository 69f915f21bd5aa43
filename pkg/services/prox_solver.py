# services/prox_solver.py
"""
l1-regularized first-order solver.

- soft_threshold: the prox of t * ||.||_1, optionally followed by projection
  onto an l2 ball (the constraint set Omega)
- omega_criterion: first-order stationarity gap of f + lambda * ||.||_1
- proximal_gradient: prox-gradient iterations at one lambda, with
  backtracking on the step size
- path_following: geometric sequence of lambdas from ||grad f(0)||_inf down
  to the target, each stage warm-started from the last

Works with any LossOracle (smoothed risk or logistic).
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from contracts.errors import ArgumentError, NumericalError
from contracts.models import PathResult, SolverConfig, StageRecord
from infra.logging import log_event
from services.surrogate_risk import LossOracle

logger = logging.getLogger(__name__)

# Slack allowed in the sufficient-decrease test for floating-point noise.
DESCENT_SLACK = 1e-12
# Reference decay for the warm-start lambda_0 when only T is configured.
DEFAULT_PHI = 0.9


def soft_threshold(v, t: float, ball_radius: Optional[float] = None, center=None) -> np.ndarray:
    """
    Componentwise sign(v) * max(|v| - t, 0), then projection onto the l2 ball
    of radius ball_radius (around `center`, default the origin) when one is given.
    """
    if t < 0:
        raise ArgumentError(f"threshold must be non-negative, got {t}")
    v = np.asarray(v, dtype=float)
    out = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    if ball_radius is not None:
        origin = np.zeros_like(out) if center is None else np.asarray(center, dtype=float)
        offset = out - origin
        norm = np.linalg.norm(offset)
        if norm > ball_radius:
            out = origin + offset * (ball_radius / norm)
    return out


def omega_criterion(theta, grad, lam: float) -> float:
    """
    l_inf distance from -grad to lam * subdifferential of ||theta||_1.

    Coordinates with theta_j != 0 contribute |grad_j + lam sign(theta_j)|,
    zero coordinates contribute max(|grad_j| - lam, 0).
    """
    if not lam > 0:
        raise ArgumentError(f"lambda must be positive, got {lam}")
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.size == 0:
        return 0.0
    active = theta != 0
    gaps = np.where(active,
                    np.abs(grad + lam * np.sign(theta)),
                    np.maximum(np.abs(grad) - lam, 0.0))
    return float(np.max(gaps))


def _objective(value: float, theta: np.ndarray, lam: float) -> float:
    return value + lam * float(np.sum(np.abs(theta)))


def _check_finite(value: float, grad: np.ndarray, stage: Optional[int]):
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericalError("loss or gradient is not finite", stage=stage)


def proximal_gradient(loss: LossOracle, lam: float, eps: float, theta0, config: SolverConfig,
                      stage: Optional[int] = None,
                      trace: Optional[List[float]] = None) -> Tuple[np.ndarray, int]:
    """
    Prox-gradient iterations theta <- S_{lam eta}(theta - eta grad f(theta)).

    Stops once omega_lam(theta) <= eps (checked before the first step and after
    every accepted step) or after config.max_inner_iters steps. The step size
    starts at config.eta and is halved until the quadratic upper model holds,
    so the penalized objective never increases.

    Args:
        loss: value/gradient oracle
        lam: penalty level
        eps: stationarity tolerance
        theta0: starting point
        config: solver settings
        stage: stage index, attached to numerical errors
        trace: if given, objective values are appended per iterate

    Returns:
        (theta, number of accepted steps)
    """
    if not eps > 0:
        raise ArgumentError(f"precision eps must be positive, got {eps}")
    theta = np.array(theta0, dtype=float, copy=True)
    value, grad = loss.value_and_grad(theta)
    _check_finite(value, grad, stage)
    if trace is not None:
        trace.append(_objective(value, theta, lam))
    if omega_criterion(theta, grad, lam) <= eps:
        return theta, 0

    eta = config.eta
    iters = 0
    while iters < config.max_inner_iters:
        halvings = 0
        while True:
            candidate = soft_threshold(theta - eta * grad, lam * eta, config.ball_radius, config.ball_center)
            step = candidate - theta
            cand_value, cand_grad = loss.value_and_grad(candidate)
            _check_finite(cand_value, cand_grad, stage)
            model = value + float(grad @ step) + float(step @ step) / (2.0 * eta)
            if cand_value <= model + DESCENT_SLACK or halvings >= config.max_halvings:
                break
            eta *= 0.5
            halvings += 1

        if halvings >= config.max_halvings and cand_value > model + DESCENT_SLACK:
            logger.debug("stage %s: backtracking exhausted at eta=%.3e", stage, eta)
            break

        theta, value, grad = candidate, cand_value, cand_grad
        iters += 1
        if trace is not None:
            trace.append(_objective(value, theta, lam))
        if omega_criterion(theta, grad, lam) <= eps or not np.any(step):
            break
    return theta, iters


def _stage_lambdas(lambda_0: float, config: SolverConfig) -> List[float]:
    """lambda_t = phi^t lambda_0 for t = 1..T-1, then the target itself."""
    target = config.lambda_tgt
    if config.T is not None:
        T = config.T
        phi = (target / lambda_0) ** (1.0 / T)
    else:
        phi = config.phi
        T = max(1, math.ceil(math.log(target / lambda_0) / math.log(phi)))
    lambdas = [lambda_0 * phi ** t for t in range(1, T)]
    lambdas = [lam for lam in lambdas if lam > target]
    lambdas.append(target)
    return lambdas


def warm_start_floor(config: SolverConfig) -> float:
    """Smallest lambda_0 of a warm-started path: lambda_tgt / phi**T."""
    phi = config.phi or DEFAULT_PHI
    stages = config.T if config.T is not None else 1
    return config.lambda_tgt / phi ** stages


def path_following(loss: LossOracle, config: SolverConfig, theta_init=None) -> PathResult:
    """
    Solve min f(theta) + lambda_tgt ||theta||_1 along a decreasing lambda path.

    lambda_0 = ||grad f(0)||_inf for a cold start. With a warm start,
    lambda_0 = max(||grad f(theta_init)||_inf, lambda_tgt / phi**T), phi
    defaulting to DEFAULT_PHI and T to a single stage when only phi is set,
    so the path keeps stages above the target. Intermediate stages are solved
    to precision nu * lambda_t and the final stage to eps_tgt. If lambda_tgt
    >= lambda_0 the path is degenerate: a single stage at lambda_tgt.
    """
    if config.lambda_tgt is None:
        raise ArgumentError("solver config has no lambda_tgt")
    d = loss.d
    warm = theta_init is not None and np.any(np.asarray(theta_init) != 0)
    theta = np.zeros(d) if theta_init is None else np.array(theta_init, dtype=float, copy=True)

    _, grad0 = loss.value_and_grad(theta)
    _check_finite(0.0, grad0, 0)
    lambda_0 = float(np.max(np.abs(grad0))) if d else 0.0
    if warm:
        lambda_0 = max(lambda_0, warm_start_floor(config))

    degenerate = config.lambda_tgt >= lambda_0
    if degenerate:
        lambdas = [config.lambda_tgt]
    else:
        lambdas = _stage_lambdas(lambda_0, config)

    per_stage: List[StageRecord] = []
    converged = True
    for stage, lam in enumerate(lambdas, start=1):
        final = stage == len(lambdas)
        eps = config.eps_tgt if final else config.nu * lam
        trace: List[float] = []
        theta, iters = proximal_gradient(loss, lam, eps, theta, config, stage=stage, trace=trace)
        value, grad = loss.value_and_grad(theta)
        omega = omega_criterion(theta, grad, lam)
        converged = converged and omega <= eps
        per_stage.append(StageRecord(
            lam=lam, omega=omega, inner_iters=iters,
            objective=_objective(value, theta, lam),
            support_size=int(np.count_nonzero(theta)),
            objective_trace=trace,
        ))

    result = PathResult(theta_hat=theta, per_stage=per_stage, converged=converged,
                        degenerate=degenerate, lambda_0=lambda_0)
    log_event("path_finished", stages=len(per_stage), lambda_0=lambda_0,
              lambda_tgt=config.lambda_tgt, support=result.support.tolist(),
              converged=converged, degenerate=degenerate)
    return result
