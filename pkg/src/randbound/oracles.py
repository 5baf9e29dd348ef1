"""Adaptive-quadrature ground truth for Gaussian tails and folded-Gaussian maxima.

These never touch the Monte Carlo code paths; tests and the ``verify`` suites
use them as independent references.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

_UPPER = 40.0


def _quad(f, a, b, points=None) -> float:
    val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=500, points=points)
    return val


def gaussian_tail_integral(s: float) -> float:
    """int_s^inf exp(-x^2/2) dx = sqrt(2 pi) P(gamma > s), by quadrature on [s, 40]."""
    if s >= _UPPER:
        return 0.0
    lo = max(s, -_UPPER)
    val = _quad(lambda x: math.exp(-0.5 * x * x), lo, _UPPER)
    if s < -_UPPER:
        val += math.sqrt(2 * math.pi) - _quad(lambda x: math.exp(-0.5 * x * x), -_UPPER, _UPPER)
    return val


def folded_cdf(t: float, scale: float) -> float:
    """P(|gamma * scale| <= t)."""
    return float(special.erf(t / (scale * math.sqrt(2.0))))


def expected_max_abs(scales) -> float:
    """E max_i |gamma_i a_i| = int_0^inf (1 - prod_i P(|gamma a_i| <= t)) dt."""
    a = np.abs(np.asarray(scales, dtype=float))
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    top = float(a.max())

    def survival(t):
        return 1.0 - float(np.prod(special.erf(t / (a * math.sqrt(2.0)))))

    return top * _quad(lambda u: survival(u * top), 0.0, _UPPER)


def expected_max_sq(n: int) -> float:
    """E max_{i<=n} gamma_i^2 = int_0^inf (1 - erf(sqrt(t/2))^n) dt."""
    # substitute t = u^2 to keep the integrand smooth at 0
    return _quad(lambda u: 2.0 * u * (1.0 - special.erf(u / math.sqrt(2.0)) ** n), 0.0, _UPPER)


def expected_max_two_quad() -> float:
    """E max(gamma_1^2, gamma_2^2) by 2-d quadrature.

    By symmetry this is 8 times the integral of x^2 phi(x) phi(y) over the
    wedge 0 < y < x, which keeps the integrand smooth.
    """
    phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
    val, _ = integrate.dblquad(lambda y, x: x * x * phi(x) * phi(y), 0.0, _UPPER / 2,
                               0.0, lambda x: x, epsabs=1e-12, epsrel=1e-11)
    return 8.0 * val
