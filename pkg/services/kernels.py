# services/kernels.py
"""
Kernel functions of order l and the smoothed surrogate of the 0-1 loss.

The surrogate L_delta(u) is the upper-tail mass of the kernel beyond u/delta,
so it decreases from 1 to 0 and tends to 1{u < 0} as delta -> 0.

Three families ship:
- gaussian: the standard normal density (order 1)
- epanechnikov: 0.75 (1 - t^2) on [-1, 1] (order 1, bounded support)
- higher_order(l): P(t^2) * phi(t) with the coefficients of P solved so the
  moments 1..l vanish
"""
import logging
from functools import lru_cache
from typing import List, Optional

import numpy as np
from pydantic import BaseModel
from scipy import integrate, linalg
from scipy.special import factorial2
from scipy.stats import norm

from contracts.errors import ArgumentError
from contracts.models import KernelSpec

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-9
# Unbounded kernels are integrated on [-R, R]; the gaussian mass beyond is < 1e-300.
_QUAD_RADIUS = 40.0


def make_kernel(name: str, order: Optional[int] = None, budget: Optional[float] = None) -> KernelSpec:
    """
    Build a KernelSpec from its config name.

    Args:
        name: "gaussian", "epanechnikov" or "higher_order"
        order: required for higher_order
        budget: label budget N, sets the tail coefficient sqrt(log N)
    """
    name = name.strip().lower()
    if name == "gaussian":
        return KernelSpec.gaussian(budget)
    if name == "epanechnikov":
        return KernelSpec.epanechnikov()
    if name == "higher_order":
        if order is None:
            raise ArgumentError("higher_order kernel needs an integer order")
        return KernelSpec.higher_order(int(order), budget)
    raise ArgumentError(f"unknown kernel '{name}'")


@lru_cache(maxsize=None)
def _gaussian_even_moment(k: int) -> float:
    """E[t^(2k)] for t ~ N(0, 1), i.e. (2k - 1)!!."""
    return 1.0 if k == 0 else float(factorial2(2 * k - 1, exact=True))


@lru_cache(maxsize=None)
def polynomial_coefficients(order: int) -> tuple:
    """
    Coefficients a_0..a_m of P(t^2) = sum a_i t^(2i) for the order-`order` kernel.

    Solves sum_i a_i E[t^(2(i+j))] = 1{j = 0} for j = 0..m, m = order // 2.
    """
    m = order // 2
    moments = np.array([[_gaussian_even_moment(i + j) for i in range(m + 1)] for j in range(m + 1)])
    rhs = np.zeros(m + 1)
    rhs[0] = 1.0
    return tuple(linalg.solve(moments, rhs))


def density(t, kernel: KernelSpec) -> np.ndarray:
    """K(t), vectorized."""
    t = np.asarray(t, dtype=float)
    if kernel.family == "gaussian":
        return norm.pdf(t)
    if kernel.family == "epanechnikov":
        return np.where(np.abs(t) <= 1.0, 0.75 * (1.0 - t * t), 0.0)
    coefs = polynomial_coefficients(kernel.order)
    poly = np.polynomial.polynomial.polyval(t * t, coefs)
    return poly * norm.pdf(t)


def tail_mass(t, kernel: KernelSpec) -> np.ndarray:
    """Closed-form upper tail integral of K from t to infinity."""
    t = np.asarray(t, dtype=float)
    if kernel.family == "gaussian":
        return norm.sf(t)
    if kernel.family == "epanechnikov":
        inner = 0.5 - 0.75 * t + 0.25 * t ** 3
        return np.where(t <= -1.0, 1.0, np.where(t >= 1.0, 0.0, inner))

    # int_t^inf s^(2k) phi(s) ds = t^(2k-1) phi(t) + (2k-1) * (same with k-1)
    coefs = polynomial_coefficients(kernel.order)
    pdf = norm.pdf(t)
    partial = norm.sf(t)
    total = coefs[0] * partial
    for k in range(1, len(coefs)):
        partial = t ** (2 * k - 1) * pdf + (2 * k - 1) * partial
        total = total + coefs[k] * partial
    return total


def tail_mass_quadrature(t, kernel: KernelSpec) -> np.ndarray:
    """Upper tail by adaptive quadrature, used to cross-check the closed forms."""

    def one(point: float) -> float:
        upper = kernel.support_radius if kernel.bounded else _QUAD_RADIUS
        lower = max(point, -upper)
        if lower >= upper:
            return 0.0
        value, _ = integrate.quad(lambda s: float(density(s, kernel)), lower, upper,
                                  epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
        return value

    return np.vectorize(one, otypes=[float])(np.asarray(t, dtype=float))


def _check_delta(delta: float):
    if not delta > 0:
        raise ArgumentError(f"bandwidth delta must be positive, got {delta}")


def surrogate_loss(u, delta: float, kernel: KernelSpec) -> np.ndarray:
    """
    Smoothed 0-1 loss L_delta(u) = int_{u/delta}^inf K(t) dt, in [0, 1].

    Args:
        u: margin(s) y * (x - theta'z)
        delta: bandwidth > 0
        kernel: kernel specification
    """
    _check_delta(delta)
    return tail_mass(np.asarray(u, dtype=float) / delta, kernel)


def surrogate_loss_deriv(u, delta: float, kernel: KernelSpec) -> np.ndarray:
    """d/du L_delta(u) = -K(u/delta)/delta."""
    _check_delta(delta)
    return -density(np.asarray(u, dtype=float) / delta, kernel) / delta


# ============================================================================
# Kernel verification
# ============================================================================

class MomentCheck(BaseModel):
    name: str
    estimate: float
    target: Optional[float] = None
    residual: Optional[float] = None


class KernelReport(BaseModel):
    family: str
    order: int
    checks: List[MomentCheck]
    l2_norm_sq: float
    sup_abs: float
    tail_cut: Optional[float] = None
    tail_abs_mass: Optional[float] = None

    @property
    def max_residual(self) -> float:
        return max(c.residual for c in self.checks if c.residual is not None)


def _integrate(fn, kernel: KernelSpec, lower: Optional[float] = None) -> float:
    radius = kernel.support_radius if kernel.bounded else _QUAD_RADIUS
    lo = -radius if lower is None else max(lower, -radius)
    if lo >= radius:
        return 0.0
    points = [0.0] if lo < 0.0 < radius else None
    value, _ = integrate.quad(fn, lo, radius, epsabs=1e-12, epsrel=1e-12, limit=400, points=points)
    return value


def verify_kernel(kernel: KernelSpec) -> KernelReport:
    """
    Quadrature estimates of the kernel's moments with residuals against their targets.

    Reports int K, int t^j K for j = 1..order, int K^2, sup|K| and, when a tail
    coefficient is set, the tail mass int_{C_N/2}^inf |K|.
    """
    checks = []
    mass = _integrate(lambda t: float(density(t, kernel)), kernel)
    checks.append(MomentCheck(name="int K", estimate=mass, target=1.0, residual=abs(mass - 1.0)))
    for j in range(1, kernel.order + 1):
        moment = _integrate(lambda t, j=j: float(t ** j * density(t, kernel)), kernel)
        checks.append(MomentCheck(name=f"int t^{j} K", estimate=moment, target=0.0, residual=abs(moment)))

    l2 = _integrate(lambda t: float(density(t, kernel)) ** 2, kernel)
    grid = np.linspace(-(kernel.support_radius or 10.0), kernel.support_radius or 10.0, 20001)
    sup_abs = float(np.max(np.abs(density(grid, kernel))))

    tail_cut = tail_abs = None
    if kernel.tail_coefficient is not None:
        tail_cut = kernel.tail_coefficient / 2.0
        tail_abs = _integrate(lambda t: abs(float(density(t, kernel))), kernel, lower=tail_cut)

    report = KernelReport(family=kernel.family, order=kernel.order, checks=checks,
                          l2_norm_sq=l2, sup_abs=sup_abs, tail_cut=tail_cut, tail_abs_mass=tail_abs)
    logger.debug("kernel %s(order=%d) max residual %.3e", kernel.family, kernel.order, report.max_residual)
    return report
