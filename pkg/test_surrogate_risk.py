#!/usr/bin/env python3
"""
Tests for the weighted smoothed risk, its gradient and the logistic loss.
"""
import numpy as np
import pytest

from contracts.errors import ArgumentError
from contracts.models import ClassWeights, KernelSpec, LabeledBatch
from infra.random_streams import normals, stream
from services.kernels import surrogate_loss
from services.surrogate_risk import (
    LogisticLoss,
    SmoothedRiskLoss,
    build_loss,
    class_weights_from,
    logistic_loss_and_gradient,
    smoothed_risk,
    smoothed_risk_gradient,
)

GAUSS = KernelSpec.gaussian()
EVEN = ClassWeights(w_plus=2.0, w_minus=2.0)


def _labels(plus: int, total: int) -> LabeledBatch:
    y = np.array([1.0] * plus + [-1.0] * (total - plus))
    return LabeledBatch.from_records(np.zeros(total), np.zeros((total, 1)), y)


def _random_batch(key: str, n: int = 20, d: int = 5) -> LabeledBatch:
    gen = stream(11, "test", key)
    z = normals(gen, (n, d))
    x = normals(gen, n)
    y = np.where(gen.random(n) < 0.4, 1.0, -1.0)
    return LabeledBatch.from_records(x, z, y)


def _fd_gradient(fn, theta: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(theta)
    for j in range(len(theta)):
        e = np.zeros_like(theta)
        e[j] = h
        grad[j] = (fn(theta + e) - fn(theta - e)) / (2 * h)
    return grad


def test_class_weights():
    """Balanced, one-sided (clamped) and skewed label proportions."""
    w = class_weights_from(_labels(50, 100))
    assert (w.w_plus, w.w_minus) == pytest.approx((2.0, 2.0))
    w = class_weights_from(_labels(100, 100))
    assert (w.w_plus, w.w_minus) == pytest.approx((1 / 0.95, 20.0))
    w = class_weights_from(_labels(30, 100))
    assert w.w_plus == pytest.approx(3.3333, abs=1e-4)
    assert w.w_minus == pytest.approx(1.4286, abs=1e-4)


def test_class_weights_empty_batch():
    with pytest.raises(ArgumentError):
        class_weights_from(LabeledBatch.from_records([], np.zeros((0, 1)), []))


def test_single_record_risk():
    """One record on the boundary: gamma * L(0) = 2 * 0.5."""
    batch = LabeledBatch.from_records([0.0], np.zeros((1, 2)), [1.0])
    assert smoothed_risk(np.zeros(2), batch, 1.0, GAUSS, EVEN) == pytest.approx(1.0)


def test_empty_batch_risk_is_zero():
    batch = LabeledBatch.from_records([], np.zeros((0, 2)), [])
    assert smoothed_risk(np.zeros(2), batch, 1.0, GAUSS, EVEN) == 0.0
    np.testing.assert_array_equal(smoothed_risk_gradient(np.zeros(2), batch, 1.0, GAUSS, EVEN), np.zeros(2))


def test_risk_matches_brute_force():
    batch = _random_batch("brute", n=5, d=3)
    theta = np.array([0.3, -0.2, 0.5])
    weights = ClassWeights(w_plus=2.5, w_minus=1.25)
    expected = 0.0
    for xi, zi, yi in zip(batch.x, batch.z, batch.y):
        gamma = 2.5 if yi > 0 else 1.25
        expected += gamma * float(surrogate_loss(yi * (xi - zi @ theta), 0.5, GAUSS))
    assert smoothed_risk(theta, batch, 0.5, GAUSS, weights) == pytest.approx(expected * batch.scale, rel=1e-12)


def test_gradient_at_boundary_record():
    """x = 0, z = (1, 0), y = +1 at theta = 0 gives gamma * K(0) on the first coordinate."""
    batch = LabeledBatch.from_records([0.0], np.array([[1.0, 0.0]]), [1.0])
    grad = smoothed_risk_gradient(np.zeros(2), batch, 1.0, GAUSS, EVEN)
    np.testing.assert_allclose(grad, [2 * 0.398942, 0.0], atol=1e-6)


@pytest.mark.parametrize("kernel", [GAUSS, KernelSpec.epanechnikov(), KernelSpec.higher_order(4)],
                         ids=["gaussian", "epanechnikov", "ho4"])
@pytest.mark.parametrize("delta", [0.1, 1.0, 10.0])
def test_gradient_matches_finite_differences(kernel, delta):
    batch = _random_batch("fd")
    weights = class_weights_from(batch)
    gen = stream(5, "test", "fd-theta", kernel.family, int(delta * 10))
    for _ in range(20):
        theta = 0.5 * normals(gen, batch.d)
        exact = smoothed_risk_gradient(theta, batch, delta, kernel, weights)
        fd = _fd_gradient(lambda t: smoothed_risk(t, batch, delta, kernel, weights), theta)
        assert np.linalg.norm(exact - fd) <= 1e-5 * np.linalg.norm(exact) + 1e-7


def test_risk_bounds():
    batch = _random_batch("bounds", n=40)
    weights = class_weights_from(batch)
    upper = batch.scale * np.sum(weights.gamma(batch.y))
    gen = stream(2, "test", "bounds")
    for _ in range(10):
        value = smoothed_risk(3 * normals(gen, batch.d), batch, 0.3, GAUSS, weights)
        assert 0.0 <= value <= upper + 1e-12


def test_small_bandwidth_limit():
    """Margins at least 0.1 away from zero: delta -> 0 recovers the weighted 0-1 risk."""
    gen = stream(4, "test", "limit")
    z = normals(gen, (30, 3))
    theta = np.array([0.2, 0.0, -0.4])
    u = 0.1 + gen.random(30)
    y = np.where(gen.random(30) < 0.5, 1.0, -1.0)
    sign = np.where(gen.random(30) < 0.5, 1.0, -1.0)
    # y (x - theta'z) = sign * u by construction
    x = z @ theta + y * sign * u
    batch = LabeledBatch.from_records(x, z, y)
    weights = class_weights_from(batch)
    zero_one = batch.scale * np.sum(weights.gamma(y) * (sign < 0))
    assert smoothed_risk(theta, batch, 1e-4, GAUSS, weights) == pytest.approx(zero_one, abs=1e-6)


def test_logistic_single_record():
    batch = LabeledBatch.from_records([0.0], np.zeros((1, 3)), [-1.0])
    value, grad = logistic_loss_and_gradient(np.zeros(3), batch, ClassWeights(1.0, 1.0))
    assert value == pytest.approx(np.log(2.0))
    np.testing.assert_array_equal(grad, np.zeros(3))


def test_logistic_gradient_and_convexity():
    batch = _random_batch("logit", n=30)
    loss = LogisticLoss(batch, class_weights_from(batch))
    gen = stream(6, "test", "logit-theta")
    for _ in range(50):
        theta = normals(gen, batch.d)
        exact = loss.gradient(theta)
        fd = _fd_gradient(loss.value, theta)
        assert np.linalg.norm(exact - fd) <= 1e-6 * np.linalg.norm(exact) + 1e-8
    for _ in range(100):
        a, b = 2 * normals(gen, batch.d), 2 * normals(gen, batch.d)
        assert loss.value((a + b) / 2) <= (loss.value(a) + loss.value(b)) / 2 + 1e-12


def test_build_loss():
    batch = _random_batch("build")
    weights = class_weights_from(batch)
    assert isinstance(build_loss("smoothed", batch, 1.0, GAUSS, weights), SmoothedRiskLoss)
    assert isinstance(build_loss("logistic", batch, 1.0, GAUSS, weights), LogisticLoss)
    with pytest.raises(ArgumentError):
        build_loss("hinge", batch, 1.0, GAUSS, weights)
    with pytest.raises(ArgumentError):
        SmoothedRiskLoss(batch, 0.0, GAUSS, weights)
