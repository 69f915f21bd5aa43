#!/usr/bin/env python3
"""
Tests for kernels and the smoothed 0-1 surrogate.
"""
import numpy as np
import pytest

from contracts.errors import ArgumentError
from contracts.models import KernelSpec
from infra.random_streams import stream
from services.kernels import (
    make_kernel,
    polynomial_coefficients,
    surrogate_loss,
    surrogate_loss_deriv,
    tail_mass,
    tail_mass_quadrature,
    verify_kernel,
)

GAUSS = KernelSpec.gaussian()
KERNELS = [GAUSS, KernelSpec.epanechnikov(), KernelSpec.higher_order(3), KernelSpec.higher_order(4)]


def test_surrogate_values():
    """Known values of the gaussian surrogate and its derivative."""
    assert surrogate_loss(0.0, 1.0, GAUSS) == pytest.approx(0.5, abs=1e-12)
    assert surrogate_loss(0.0, 0.01, GAUSS) == pytest.approx(0.5, abs=1e-12)
    assert surrogate_loss(1.0, 1.0, GAUSS) == pytest.approx(0.158655, abs=1e-6)
    assert surrogate_loss_deriv(0.0, 1.0, GAUSS) == pytest.approx(-0.398942, abs=1e-6)
    assert surrogate_loss_deriv(0.0, 2.0, GAUSS) == pytest.approx(-0.199471, abs=1e-6)
    assert surrogate_loss_deriv(100.0, 1.0, KernelSpec.epanechnikov()) == 0.0


def test_bad_bandwidth():
    with pytest.raises(ArgumentError):
        surrogate_loss(0.0, 0.0, GAUSS)
    with pytest.raises(ArgumentError):
        surrogate_loss_deriv(0.0, -1.0, GAUSS)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: f"{k.family}{k.order}")
def test_moment_conditions(kernel):
    """Unit mass and vanishing moments up to the order."""
    report = verify_kernel(kernel)
    assert report.max_residual <= 1e-8
    assert report.checks[0].estimate == pytest.approx(1.0, abs=1e-8)
    assert report.l2_norm_sq > 0
    assert report.sup_abs > 0


def test_tail_report_uses_budget():
    report = verify_kernel(make_kernel("gaussian", budget=1000))
    assert report.tail_cut == pytest.approx(np.sqrt(np.log(1000)) / 2)
    assert 0 < report.tail_abs_mass < 0.5


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: f"{k.family}{k.order}")
def test_symmetry(kernel):
    """L(u) + L(-u) = 1 for symmetric kernels."""
    u = np.linspace(-5, 5, 101)
    total = surrogate_loss(u, 0.7, kernel) + surrogate_loss(-u, 0.7, kernel)
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_higher_order_coefficients():
    """Order 3 and 2 share P(t^2) = 1.5 - 0.5 t^2."""
    np.testing.assert_allclose(polynomial_coefficients(3), (1.5, -0.5), atol=1e-12)
    np.testing.assert_allclose(polynomial_coefficients(2), (1.5, -0.5), atol=1e-12)
    assert polynomial_coefficients(1) == (1.0,)


@pytest.mark.parametrize("kernel", [KernelSpec.higher_order(4), KernelSpec.higher_order(6),
                                    KernelSpec.epanechnikov()], ids=["ho4", "ho6", "epa"])
def test_closed_form_tail_matches_quadrature(kernel):
    t = np.array([-2.5, -1.0, -0.3, 0.0, 0.4, 0.9, 1.7, 3.0])
    np.testing.assert_allclose(tail_mass(t, kernel), tail_mass_quadrature(t, kernel), atol=1e-8)


def test_converges_to_zero_one_loss():
    """|L_delta(u) - 1{u < 0}| shrinks as delta -> 0."""
    deltas = [1.0, 0.5, 0.1, 0.01]
    for u in (-0.5, 0.3, 2.0):
        gaps = [abs(float(surrogate_loss(u, d, GAUSS)) - (1.0 if u < 0 else 0.0)) for d in deltas]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-10


def test_derivative_matches_finite_differences():
    gen = stream(1, "test", "fd")
    delta = 0.1 + 1.9 * gen.random(100)
    u = (6 * gen.random(100) - 3) * delta
    h = 1e-6
    for ui, di in zip(u, delta):
        fd_i = (surrogate_loss(ui + h, di, GAUSS) - surrogate_loss(ui - h, di, GAUSS)) / (2 * h)
        assert fd_i == pytest.approx(float(surrogate_loss_deriv(ui, di, GAUSS)), rel=1e-5)


def test_make_kernel():
    assert make_kernel("Gaussian").family == "gaussian"
    assert make_kernel("epanechnikov").bounded
    assert make_kernel("higher_order", order=4).order == 4
    with pytest.raises(ArgumentError):
        make_kernel("higher_order")
    with pytest.raises(ArgumentError):
        make_kernel("triangle")
