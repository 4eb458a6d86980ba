"""Radial reduction of the moment integrals behind every normalization constant.

All integrals of the form  int_{R^n} |z|^(2j) (1 +/- |z|^2)_+^p dz  are computed
twice: once through the Beta/Gamma closed form and once by adaptive 1-D
quadrature on the radial profile.  The two routes act as mutual oracles; a
relative disagreement above ``CROSS_CHECK_TOL`` is treated as a bug, not as
noise, and raises.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import IntegralDivergence

CROSS_CHECK_TOL = 1e-8


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^(n-1) in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def log_moment_closed_form(n: int, j: int, p: float, sign: int) -> float:
    """log of the closed form of int_{R^n} |z|^(2j) (1 + sign*|z|^2)_+^p dz.

    ``sign=+1`` is the heavy-tailed branch (requires -p > (n+2j)/2),
    ``sign=-1`` the compactly supported one (requires p > -1).
    """
    a = (n + 2 * j) / 2.0
    if sign > 0:
        q = -p
        if q - a <= 0:
            raise IntegralDivergence(
                f"int |z|^{2*j} (1+|z|^2)^{p} over R^{n} diverges (need p < -{a})"
            )
        return (
            (n / 2.0) * math.log(math.pi)
            + gammaln(a)
            - gammaln(n / 2.0)
            + gammaln(q - a)
            - gammaln(q)
        )
    if p <= -1:
        raise IntegralDivergence(
            f"int |z|^{2*j} (1-|z|^2)_+^{p} over R^{n} diverges (need p > -1)"
        )
    return (
        (n / 2.0) * math.log(math.pi)
        + gammaln(a)
        - gammaln(n / 2.0)
        + gammaln(p + 1.0)
        - gammaln(p + 1.0 + a)
    )


def moment_closed_form(n: int, j: int, p: float, sign: int) -> float:
    """Closed form of int_{R^n} |z|^(2j) (1 + sign*|z|^2)_+^p dz."""
    return math.exp(log_moment_closed_form(n, j, p, sign))


def moment_quadrature(n: int, j: int, p: float, sign: int) -> float:
    """Same integral as :func:`moment_closed_form` by adaptive radial quadrature."""
    a = n - 1 + 2 * j
    if sign > 0:
        if -2.0 * p <= n + 2 * j:
            raise IntegralDivergence("radial integrand is not integrable")

        def integrand(r: float) -> float:
            return r**a * (1.0 + r * r) ** p

        # Split at r=1 so the tail change of variables u = 1/r stays smooth.
        inner, _ = integrate.quad(integrand, 0.0, 1.0, limit=300,
                                  epsabs=1e-14, epsrel=1e-12)
        outer, _ = integrate.quad(
            lambda u: u ** (-a - 2) * (1.0 + u ** (-2)) ** p, 0.0, 1.0,
            limit=300, epsabs=1e-14, epsrel=1e-12,
        )
        val = inner + outer
    else:
        if p <= -1:
            raise IntegralDivergence("radial integrand is not integrable")
        val, _ = integrate.quad(
            lambda r: r**a * max(1.0 - r * r, 0.0) ** p, 0.0, 1.0,
            limit=300, epsabs=1e-14, epsrel=1e-12,
        )
    return sphere_area(n) * val


def moment_integral(n: int, j: int, p: float, sign: int) -> float:
    """Dual-route value of int |z|^(2j)(1 +/- |z|^2)_+^p dz with consistency check."""
    closed = moment_closed_form(n, j, p, sign)
    quad = moment_quadrature(n, j, p, sign)
    rel = abs(closed - quad) / max(abs(closed), 1e-300)
    if rel > CROSS_CHECK_TOL:
        raise ArithmeticError(
            f"quadrature/closed-form mismatch {rel:.3e} for (n={n}, j={j}, p={p}, sign={sign})"
        )
    return closed


def split_moment_factor(n1: int, j1: int, n2: int, j2: int) -> float:
    """Dirichlet factor relating mixed moments to the plain radial moment.

    int |w|^(2 j1) |y|^(2 j2) F(|w|^2+|y|^2) dw dy over R^(n1) x R^(n2)
    equals this factor times int |z|^(2(j1+j2)) F(|z|^2) dz over R^(n1+n2).
    """
    n = n1 + n2
    log_c = (
        gammaln(n1 / 2.0 + j1)
        + gammaln(n2 / 2.0 + j2)
        - gammaln(n1 / 2.0)
        - gammaln(n2 / 2.0)
        + gammaln(n / 2.0)
        - gammaln(n / 2.0 + j1 + j2)
    )
    return math.exp(log_c)


def positive_part_power(base: np.ndarray | float, expo: float):
    """(base)_+^expo with an exact zero outside the support (no inf/nan)."""
    arr = np.asarray(base, dtype=float)
    out = np.zeros_like(arr)
    mask = arr > 0.0
    np.power(arr, expo, where=mask, out=out)
    if np.ndim(base) == 0:
        return float(out)
    return out
