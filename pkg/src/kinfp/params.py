"""Model constants derived from the dimension d and the nonlinearity exponent m.

The admissible range is m in (m1, 1) u (1, m2) with m1 = 1 - 1/d and
m2 = 1 + 1/d; inside it the anisotropy constant A = (1+d-d*m)/(3-d+d*m)
lies in (0, 1).  ``model_params`` validates the range (exactly, in rational
arithmetic, when m is handed over as a Fraction), derives every critical
exponent, and solves the unit-mass normalization for the pressure offset
gamma_star of the stationary profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import IntegralDivergence, RangeError
from .radial import (
    log_moment_closed_form,
    moment_integral,
    moment_quadrature,
    split_moment_factor,
)

Rational = Fraction | int


def a_of_m(d: int, m):
    """Anisotropy constant A = (1+d-d*m)/(3-d+d*m); exact for rational m."""
    if isinstance(m, Rational):
        return Fraction(1 + d - d * m, 3 - d + d * m)
    return (1.0 + d - d * m) / (3.0 - d + d * m)


@dataclass(frozen=True)
class ModelParams:
    """Immutable bundle of every scalar constant of the model."""

    d: int
    m: float
    A: float
    m1: float
    m2: float
    m3: float
    m_tilde1: float
    m_c: float
    zeta: float
    k: float
    gamma_star: float
    z_m: float  # int g_star^m over phase space; nan when it diverges (m <= m_tilde1)
    strict_theorem_range: bool = True

    @property
    def p_exp(self) -> float:
        """Profile exponent 1/(m-1)."""
        return 1.0 / (self.m - 1.0)

    @property
    def sign(self) -> int:
        """+1 in the fast-diffusion regime (m < 1), -1 in the porous-medium one."""
        return 1 if self.m < 1.0 else -1

    @property
    def cv(self) -> float:
        """Coefficient of |v|^2 inside the stationary pressure, (1+A)/2."""
        return 0.5 * (1.0 + self.A)

    @property
    def cx(self) -> float:
        """Coefficient of |x|^2 inside the stationary pressure, A*(1+A)/2."""
        return 0.5 * (1.0 + self.A) * self.A


def _validate_range(d: int, m, strict: bool) -> None:
    if d < 1:
        raise RangeError(f"dimension must be a positive integer, got {d}")
    exact = isinstance(m, Rational)
    m1 = Fraction(d - 1, d) if exact else 1.0 - 1.0 / d
    m2 = Fraction(d + 1, d) if exact else 1.0 + 1.0 / d
    if m == 1:
        raise ValueError(
            "m = 1 degenerates the nonlinear change of variables (A would be 1/3)"
        )
    in_range = m1 < m < m2
    a = a_of_m(d, m)
    in_range_a = 0 < a < 1
    if in_range != in_range_a:
        raise AssertionError("range check and A-range check disagree")
    if not in_range:
        raise RangeError(f"m={m} outside admissible range ({m1}, 1) u (1, {m2}) for d={d}")
    if strict and d == 1 and not (Fraction(1, 2) if exact else 0.5) < m < (
        Fraction(3, 2) if exact else 1.5
    ):
        raise RangeError(f"m={m} outside the strict d=1 range (1/2, 3/2)")


def _two_route_k(d: int, m: float) -> float:
    k_a = 1.0 + 1.0 / (d / 2.0 + 1.0 / (m - 1.0))
    alpha = 1.0 / (d * m - d + 2.0)
    k_b = 1.0 + 2.0 * alpha * (m - 1.0)
    if abs(k_a - k_b) > 1e-12 * max(1.0, abs(k_a)):
        raise AssertionError(f"two routes to k disagree: {k_a} vs {k_b}")
    return k_a


def _log_mass_prefactor(d: int, m: float, a: float, power: float) -> float:
    """log K with int g_gamma = K * |gamma|^(power + d).

    Here ``power`` is the profile exponent 1/(m-1); the |v|^2 and |x|^2
    coefficients of the stationary pressure are (1+A)/2 and A(1+A)/2, whose
    geometric mean produces the (2/((1+A) sqrt(A)))^d Jacobian.  Computed in
    log space: near the range boundaries K itself over/underflows a double.
    The quadrature twin of the radial factor is cross-checked whenever it is
    representable.
    """
    kappa = abs((1.0 - m) / m)
    sign = 1 if m < 1.0 else -1
    log_jac = d * math.log(2.0 / ((1.0 + a) * math.sqrt(a)))
    log_integral = log_moment_closed_form(2 * d, 0, power, sign)
    # Cross-check against quadrature only where the radial integrand is well
    # conditioned; near the range boundaries the closed form is the sole route.
    well_conditioned = (
        abs(log_integral) < 500.0
        and abs(power * math.log(kappa)) < 500.0
        and (m > 1.0 or -power - d > 0.25)
        and abs(power) < 200.0
    )
    if well_conditioned:
        quad = moment_quadrature(2 * d, 0, power, sign)
        rel = abs(math.exp(log_integral) - quad) / max(abs(quad), 1e-300)
        if rel > 1e-8:
            raise ArithmeticError(
                f"quadrature/closed-form mismatch {rel:.3e} in mass prefactor"
            )
    return power * math.log(kappa) + log_jac + log_integral


def solve_gamma_star(d: int, m: float) -> float:
    """Pressure offset giving the stationary profile unit mass.

    Solves K * |gamma|^E = 1 with E = (d*m - d + 1)/(m - 1); the sign of
    gamma_star is the sign of (1 - m).
    """
    a = float(a_of_m(d, m))
    p = 1.0 / (m - 1.0)
    e = p + d
    log_k = _log_mass_prefactor(d, m, a, p)
    mag = math.exp(-log_k / e)
    return mag if m < 1.0 else -mag


def profile_mass(d: int, m: float, gamma: float) -> float:
    """Mass of the stationary profile with pressure offset gamma (g-frame)."""
    if (1.0 - m) * gamma <= 0:
        raise ValueError("profile offset must satisfy (1-m)*gamma > 0")
    a = float(a_of_m(d, m))
    p = 1.0 / (m - 1.0)
    return math.exp(_log_mass_prefactor(d, m, a, p) + (p + d) * math.log(abs(gamma)))


def gamma_for_mass(p: ModelParams, mass: float) -> float:
    """Pressure offset whose stationary profile carries the requested mass."""
    if mass <= 0:
        raise ValueError("mass must be positive")
    e = p.p_exp + p.d
    return p.gamma_star * mass ** (1.0 / e)


def _z_m(d: int, m: float, a: float, gamma: float) -> float:
    """int g_star^m; diverges exactly when m <= m_tilde1 = d/(d+1)."""
    pm = m / (m - 1.0)
    kappa = abs((1.0 - m) / m)
    sign = 1 if m < 1.0 else -1
    try:
        log_integral = log_moment_closed_form(2 * d, 0, pm, sign)
    except IntegralDivergence:
        return math.nan
    log_jac = d * math.log(2.0 / ((1.0 + a) * math.sqrt(a)))
    return math.exp(
        pm * math.log(kappa) + (pm + d) * math.log(abs(gamma)) + log_jac + log_integral
    )


def model_params(d: int, m, strict: bool = True) -> ModelParams:
    """Validate (d, m) and populate every derived constant of the model."""
    _validate_range(d, m, strict)
    mf = float(m)
    a = float(a_of_m(d, m))
    k = _two_route_k(d, mf)
    gamma = solve_gamma_star(d, mf)
    if (1.0 - mf) * gamma <= 0:
        raise AssertionError("gamma_star must carry the sign of (1-m)")
    return ModelParams(
        d=d,
        m=mf,
        A=a,
        m1=1.0 - 1.0 / d,
        m2=1.0 + 1.0 / d,
        m3=1.0 - 3.0 / d,
        m_tilde1=d / (d + 1.0),
        m_c=(d - 2.0) / d,
        zeta=-0.25 * (1.0 - mf),
        k=k,
        gamma_star=gamma,
        z_m=_z_m(d, mf, a, gamma),
        strict_theorem_range=strict,
    )


def gamma_star(p: ModelParams) -> float:
    """Unit-mass pressure offset (recomputed, dual-route checked)."""
    return solve_gamma_star(p.d, p.m)


def equilibrium_normalization(c: float, p: ModelParams) -> tuple[float, float]:
    """Constants (mu1, nu1) of the local equilibrium (mu + c|v|^2)_+^(1/(m-1)).

    mu1 inverts the spatial density, rho = (mu/mu1)^(1/(k-1)); nu1 closes the
    second-moment flux, (1/d) grad_x int |v|^2 (mu + c|v|^2)_+^(1/(m-1)) dv
    = nu1 grad_x rho^k.  Requires m > m_tilde1 so that the second v-moment of
    the equilibrium profile is part of a convergent hierarchy.
    """
    m, d = p.m, p.d
    if math.copysign(1.0, c) != math.copysign(1.0, 1.0 - m):
        raise ValueError("coefficient c must carry the sign of (1-m)")
    if m < 1.0 and m <= p.m_tilde1:
        raise IntegralDivergence(
            f"equilibrium moments diverge for m={m} <= m_tilde1={p.m_tilde1}"
        )
    pe = p.p_exp
    sign = p.sign
    ca = abs(c)
    i_mass = moment_integral(d, 0, pe, sign)
    i_mom = moment_integral(d, 1, pe, sign)
    s = 1.0 / (p.k - 1.0)  # = d/2 + 1/(m-1)
    mu1 = (ca ** (-d / 2.0) * i_mass) ** (-(p.k - 1.0))
    nu1 = (1.0 / d) * mu1 ** (s + 1.0) * ca ** (-(d / 2.0 + 1.0)) * i_mom
    if mu1 <= 0 or nu1 <= 0:
        raise AssertionError("normalization constants must be positive")
    return mu1, nu1


def profile_moment(p: ModelParams, gamma: float, a_pow: float = 1.0,
                   jv: int = 0, jx: int = 0) -> float:
    """int |v|^(2 jv) |x|^(2 jx) g_gamma^a_pow over phase space (g-frame).

    Reduces the anisotropic quadratic form to a single radial integral; the
    radial factor itself is dual-route checked in :mod:`kinfp.radial`.
    """
    m, d = p.m, p.d
    pw = a_pow / (m - 1.0)
    kappa = abs((1.0 - m) / m)
    cv, cx = p.cv, p.cx
    integral = moment_integral(2 * d, jv + jx, pw, p.sign)
    factor = split_moment_factor(d, jv, d, jx)
    g = abs(gamma)
    return (
        kappa**pw
        * g ** (pw + d + jv + jx)
        * cv ** (-(d / 2.0 + jv))
        * cx ** (-(d / 2.0 + jx))
        * factor
        * integral
    )


def h_of_gstar(p: ModelParams) -> float:
    """Value of the free-energy functional at the stationary profile.

    H[g] = int (g^m/(m-1) + (1+A)/2 (|v|^2 + A |x|^2) g); finite for m > m_tilde1.
    """
    if math.isnan(p.z_m):
        raise IntegralDivergence("H[g_star] diverges for m <= m_tilde1")
    mv = profile_moment(p, p.gamma_star, 1.0, jv=1)
    mx = profile_moment(p, p.gamma_star, 1.0, jx=1)
    return p.z_m / (p.m - 1.0) + p.cv * mv + p.cx * mx
