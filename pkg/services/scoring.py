# services/scoring.py
"""Estimation and prediction errors of a fitted threshold."""
from typing import Dict, Optional

import numpy as np

from contracts.errors import ArgumentError
from contracts.models import ClassWeights, UnlabeledPool
from services.datagen import sign_pos


def estimation_errors(theta_hat, theta_star) -> Dict[str, float]:
    """l1, l2 and l_inf norms of theta_hat - theta_star."""
    diff = np.asarray(theta_hat, dtype=float) - np.asarray(theta_star, dtype=float)
    if diff.ndim != 1:
        raise ArgumentError("theta vectors must be one-dimensional")
    return {
        "l1": float(np.sum(np.abs(diff))),
        "l2": float(np.linalg.norm(diff)),
        "linf": float(np.max(np.abs(diff))) if diff.size else 0.0,
    }


def prediction_error(theta_hat, eval_pool: UnlabeledPool, weights: Optional[ClassWeights] = None) -> float:
    """
    Weighted misclassification of the rule sign(x - theta_hat'z) on a labeled pool.

    mean(gamma(y) 1{sign != y}) / mean(gamma(y)), with gamma(y) = 1/P(Y=y)
    estimated on the evaluation labels unless weights are given. Under
    balanced classes a rule independent of the data scores about 0.5.
    """
    if eval_pool.hidden_y is None:
        raise ArgumentError("prediction error needs an evaluation pool with labels")
    y = eval_pool.hidden_y.unseal()
    if weights is None:
        p = float(np.mean(y > 0))
        if p in (0.0, 1.0):
            weights = ClassWeights(w_plus=1.0, w_minus=1.0)
        else:
            weights = ClassWeights(w_plus=1.0 / p, w_minus=1.0 / (1.0 - p))
    pred = sign_pos(eval_pool.x - eval_pool.z @ np.asarray(theta_hat, dtype=float))
    gamma = weights.gamma(y)
    return float(np.mean(gamma * (pred != y)) / np.mean(gamma))
