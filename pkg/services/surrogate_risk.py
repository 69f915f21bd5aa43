# services/surrogate_risk.py
"""
Weighted smoothed empirical risk over a labeled batch, its gradient, and the
weighted logistic loss used by the LR baselines.

Risk is kept in scaled form, scale * sum_i gamma(y_i) * loss_i, where scale
is the batch's 1/|D_k| factor, so penalty levels compare across batches.
"""
from typing import Protocol, Tuple

import numpy as np
from scipy.special import expit

from contracts.errors import ArgumentError
from contracts.models import ClassWeights, KernelSpec, LabeledBatch
from services.kernels import density, surrogate_loss

# Class-probability clamp keeping both weights bounded.
P_MIN, P_MAX = 0.05, 0.95


class LossOracle(Protocol):
    """Anything the l1 solver can minimize."""

    def value(self, theta: np.ndarray) -> float: ...

    def gradient(self, theta: np.ndarray) -> np.ndarray: ...

    def value_and_grad(self, theta: np.ndarray) -> Tuple[float, np.ndarray]: ...


def class_weights_from(batch: LabeledBatch) -> ClassWeights:
    """gamma(+1) = 1/p_hat, gamma(-1) = 1/(1 - p_hat), p_hat clamped to [0.05, 0.95]."""
    if len(batch) == 0:
        raise ArgumentError("cannot estimate class weights from an empty batch")
    p_hat = float(np.clip(np.mean(batch.y > 0), P_MIN, P_MAX))
    return ClassWeights(w_plus=1.0 / p_hat, w_minus=1.0 / (1.0 - p_hat))


def _margins(theta: np.ndarray, batch: LabeledBatch) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (batch.d,):
        raise ArgumentError(f"theta has shape {theta.shape}, batch has d={batch.d}")
    return batch.y * (batch.x - batch.z @ theta)


def smoothed_risk(theta, batch: LabeledBatch, delta: float, kernel: KernelSpec,
                  weights: ClassWeights) -> float:
    """scale * sum gamma(y) L_delta(y (x - theta'z)); zero for an empty batch."""
    if len(batch) == 0:
        _margins(theta, batch)
        return 0.0
    u = _margins(theta, batch)
    return float(batch.scale * np.sum(weights.gamma(batch.y) * surrogate_loss(u, delta, kernel)))


def smoothed_risk_gradient(theta, batch: LabeledBatch, delta: float, kernel: KernelSpec,
                           weights: ClassWeights) -> np.ndarray:
    """
    Exact gradient of smoothed_risk.

    d/dtheta L_delta(y (x - theta'z)) = K(u/delta) * y z / delta.
    """
    if len(batch) == 0:
        _margins(theta, batch)
        return np.zeros(batch.d)
    u = _margins(theta, batch)
    coef = weights.gamma(batch.y) * density(u / delta, kernel) * batch.y / delta
    return batch.scale * (batch.z.T @ coef)


def logistic_loss_and_gradient(theta, batch: LabeledBatch, weights: ClassWeights) -> Tuple[float, np.ndarray]:
    """
    Weighted logistic loss scale * sum gamma(y) log(1 + exp(-y (x - theta'z))).

    The coefficient of x is fixed to 1, so the minimizer estimates the same
    threshold theta as the smoothed risk.
    """
    if len(batch) == 0:
        _margins(theta, batch)
        return 0.0, np.zeros(batch.d)
    m = _margins(theta, batch)
    gamma = weights.gamma(batch.y)
    loss = batch.scale * np.sum(gamma * np.logaddexp(0.0, -m))
    grad = batch.scale * (batch.z.T @ (gamma * expit(-m) * batch.y))
    return float(loss), grad


class SmoothedRiskLoss:
    """LossOracle over the kernel-smoothed risk of one batch."""

    def __init__(self, batch: LabeledBatch, delta: float, kernel: KernelSpec, weights: ClassWeights):
        if not delta > 0:
            raise ArgumentError(f"bandwidth delta must be positive, got {delta}")
        self.batch = batch
        self.delta = delta
        self.kernel = kernel
        self.weights = weights

    @property
    def d(self) -> int:
        return self.batch.d

    def value(self, theta: np.ndarray) -> float:
        return smoothed_risk(theta, self.batch, self.delta, self.kernel, self.weights)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return smoothed_risk_gradient(theta, self.batch, self.delta, self.kernel, self.weights)

    def value_and_grad(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return self.value(theta), self.gradient(theta)


class LogisticLoss:
    """LossOracle over the weighted logistic loss of one batch."""

    def __init__(self, batch: LabeledBatch, weights: ClassWeights):
        self.batch = batch
        self.weights = weights

    @property
    def d(self) -> int:
        return self.batch.d

    def value(self, theta: np.ndarray) -> float:
        return logistic_loss_and_gradient(theta, self.batch, self.weights)[0]

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return logistic_loss_and_gradient(theta, self.batch, self.weights)[1]

    def value_and_grad(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return logistic_loss_and_gradient(theta, self.batch, self.weights)


def build_loss(kind: str, batch: LabeledBatch, delta: float, kernel: KernelSpec,
               weights: ClassWeights) -> LossOracle:
    """Training loss for a pipeline arm: "smoothed" or "logistic"."""
    if kind == "smoothed":
        return SmoothedRiskLoss(batch, delta, kernel, weights)
    if kind == "logistic":
        return LogisticLoss(batch, weights)
    raise ArgumentError(f"unknown loss '{kind}'")
