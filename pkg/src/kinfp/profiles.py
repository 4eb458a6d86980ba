"""Closed-form solutions and invariance orbits, as pointwise evaluators.

Everything here is pure (t, x, v) algebra: the explicit pressure solution,
the fundamental solution it generates, the stationary profiles in both
coefficient layouts, the self-similar change of variables and its inverse,
the mass/scale invariance orbits, and the half-mass ellipses of the level
sets.  Grid sampling lives in :mod:`kinfp.fields`; identities are tested
pointwise, free of resampling noise.

Point convention: for d = 1, ``x`` and ``v`` are scalars or arrays used
elementwise; for d >= 2 the last axis holds the d components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError
from .params import ModelParams, gamma_for_mass
from .radial import positive_part_power

Evaluator = Callable[..., np.ndarray]  # signature (t, x, v) -> values


def _sq_norm(z, d: int):
    arr = np.asarray(z, dtype=float)
    if d == 1:
        return arr * arr
    if arr.shape[-1] != d:
        raise ValueError(f"expected last axis of size d={d}, got shape {arr.shape}")
    return np.sum(arr * arr, axis=-1)


@dataclass(frozen=True)
class ProfileSpec:
    """Stationary profile selector: pressure offset and coefficient layout.

    ``g`` frame: offset + (1+A)/2 |v|^2 + A(1+A)/2 |x|^2 (self-similar
    variables); ``G`` frame: equal coefficients (1+A) sqrt(A)/2 on |v|^2 and
    |x|^2 (the rotation-symmetric layout used by the splitting scheme).
    """

    p: ModelParams
    gamma: float
    frame: str = "g"

    def __post_init__(self):
        if self.frame not in ("g", "G"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if (1.0 - self.p.m) * self.gamma <= 0:
            raise ValueError("nontrivial profile needs (1-m)*gamma > 0")

    @property
    def coefficients(self) -> tuple[float, float]:
        """(c_v, c_x) multiplying |v|^2 and |x|^2 inside the pressure."""
        a = self.p.A
        if self.frame == "g":
            return self.p.cv, self.p.cx
        b = 0.5 * (1.0 + a) * math.sqrt(a)
        return b, b


def profile(spec: ProfileSpec, x, v):
    """Pointwise stationary profile value ((1-m)/m (gamma + c_v|v|^2 + c_x|x|^2))_+^(1/(m-1))."""
    p = spec.p
    cv, cx = spec.coefficients
    q = spec.gamma + cv * _sq_norm(v, p.d) + cx * _sq_norm(x, p.d)
    return positive_part_power((1.0 - p.m) / p.m * q, p.p_exp)


def profile_evaluator(spec: ProfileSpec) -> Evaluator:
    """Time-independent evaluator (t, x, v) -> g_gamma(x, v)."""

    def ev(t, x, v):
        return profile(spec, x, v)

    return ev


def sandwich_specs(p: ModelParams, mass_lo: float = 0.5, mass_hi: float = 2.0,
                   frame: str = "g") -> tuple[ProfileSpec, ProfileSpec]:
    """Profiles with masses (mass_lo, mass_hi); the first lies below the second."""
    if not mass_lo < 1.0 < mass_hi:
        raise ValueError("sandwich masses must straddle 1")
    lo = ProfileSpec(p, gamma_for_mass(p, mass_lo), frame)
    hi = ProfileSpec(p, gamma_for_mass(p, mass_hi), frame)
    return lo, hi


def _beta(t: float, p: ModelParams) -> float:
    """Time-dependent pressure offset ((1-A)t)^(2(1-m)/(m-m1)) * gamma_star.

    Evaluated through exp/log: the exponent grows without bound near m = m1.
    """
    expo = 2.0 * (1.0 - p.m) / (p.m - p.m1)
    base = (1.0 - p.A) * t
    return math.exp(expo * math.log(base)) * p.gamma_star


def pressure_star(t: float, x, v, p: ModelParams):
    """Explicit quadratic-in-(x,v) solution of the pressure equation."""
    if t <= 0:
        raise DomainError("pressure_star requires t > 0")
    s = (1.0 - p.A) * t
    y_v = np.asarray(v, dtype=float) - np.asarray(x, dtype=float) / s
    y_x = np.asarray(x, dtype=float) / s
    c = (1.0 + p.A) / (2.0 * s)
    return _beta(t, p) + c * (_sq_norm(y_v, p.d) + p.A * _sq_norm(y_x, p.d))


def fundamental_solution(t: float, x, v, p: ModelParams):
    """Unit-mass self-similar solution spreading from a Dirac datum at the origin."""
    if t <= 0:
        raise DomainError("fundamental_solution requires t > 0")
    return positive_part_power(
        (1.0 - p.m) / p.m * pressure_star(t, x, v, p), p.p_exp
    )


def translated_solution(t: float, x, v, x0, v0, p: ModelParams):
    """Solution with Dirac datum at (x0, v0): translation plus Galilean boost."""
    xs = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float) - t * np.asarray(v0, dtype=float)
    vs = np.asarray(v, dtype=float) - np.asarray(v0, dtype=float)
    return fundamental_solution(t, xs, vs, p)


@dataclass(frozen=True)
class SelfSimilarMap:
    """Time-dependent rescaling R(t) = (R0^(1-A) + (1-A) t)^(1/(1-A))."""

    p: ModelParams
    r0: float = 1.0

    def __post_init__(self):
        if self.r0 < 0:
            raise DomainError("initial scale R0 must be nonnegative")

    def radius(self, t: float) -> float:
        a = self.p.A
        base = self.r0 ** (1.0 - a) + (1.0 - a) * t
        if base <= 0:
            raise DomainError(f"R(t) vanishes at t={t}")
        return base ** (1.0 / (1.0 - a))

    def tau(self, t: float) -> float:
        """Logarithmic time tau = log R(t)."""
        return math.log(self.radius(t))

    def t_of_tau(self, tau: float) -> float:
        a = self.p.A
        return (math.exp((1.0 - a) * tau) - self.r0 ** (1.0 - a)) / (1.0 - a)


def to_self_similar(f_eval: Evaluator, ssmap: SelfSimilarMap, t: float):
    """Return (tau, g-evaluator) with g(X, V) = R^(d(1+A)) f(t, R X, R^A (V + X))."""
    p = ssmap.p
    r = ssmap.radius(t)
    tau = math.log(r)
    amp = r ** (p.d * (1.0 + p.A))

    def g_eval(tt, xx, vv):
        x = r * np.asarray(xx, dtype=float)
        v = r**p.A * (np.asarray(vv, dtype=float) + np.asarray(xx, dtype=float))
        return amp * np.asarray(f_eval(t, x, v))

    return tau, g_eval


def from_self_similar(g_eval: Evaluator, ssmap: SelfSimilarMap, tau: float):
    """Return (t, f-evaluator) with f(x, v) = R^(-d(1+A)) g(x/R, v/R^A - x/R)."""
    p = ssmap.p
    t = ssmap.t_of_tau(tau)
    r = math.exp(tau)
    amp = r ** (-p.d * (1.0 + p.A))

    def f_eval(tt, xx, vv):
        xs = np.asarray(xx, dtype=float) / r
        vs = np.asarray(vv, dtype=float) / r**p.A - np.asarray(xx, dtype=float) / r
        return amp * np.asarray(g_eval(tau, xs, vs))

    return t, f_eval


def mass_rescale(f_eval: Evaluator, mass: float, p: ModelParams) -> Evaluator:
    """Orbit f_M(t,x,v) = M f(M^(2 zeta) t, M^zeta x, M^(-zeta) v)."""
    if mass <= 0:
        raise ValueError("mass factor must be positive")
    z = p.zeta

    def ev(t, x, v):
        return mass * np.asarray(
            f_eval(mass ** (2 * z) * t,
                   mass**z * np.asarray(x, dtype=float),
                   mass ** (-z) * np.asarray(v, dtype=float))
        )

    return ev


def scale_orbit(f_eval: Evaluator, lam: float, p: ModelParams) -> Evaluator:
    """Mass-preserving scale invariance f_lambda(t,x,v) = lambda^4 f(...)."""
    if lam <= 0:
        raise ValueError("scale factor must be positive")
    m = p.m

    def ev(t, x, v):
        return lam**4 * np.asarray(
            f_eval(lam ** (2 * (m - p.m1)) * t,
                   lam ** (m - p.m3) * np.asarray(x, dtype=float),
                   lam ** (p.m2 - m) * np.asarray(v, dtype=float))
        )

    return ev


# ---------------------------------------------------------------------------
# half-mass level sets (d = 1)


@dataclass(frozen=True)
class Ellipse:
    """Level set {P_star = level} in the (x, v) plane, centred at the origin."""

    t: float
    m: float
    level: float
    semi_axes: tuple[float, float]
    angle: float  # radians, orientation of the first principal axis
    center: tuple[float, float] = (0.0, 0.0)

    def points(self, n: int = 200) -> np.ndarray:
        """(n, 2) polyline tracing the ellipse."""
        phi = np.linspace(0.0, 2.0 * math.pi, n)
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        a1, a2 = self.semi_axes
        ux, uv = a1 * np.cos(phi), a2 * np.sin(phi)
        return np.stack([ca * ux - sa * uv, sa * ux + ca * uv], axis=-1)


def _pressure_form_matrix(t: float, p: ModelParams) -> np.ndarray:
    """Symmetric matrix M with P_star = beta(t) + [x v] M [x v]^T (d = 1)."""
    s = (1.0 - p.A) * t
    c = (1.0 + p.A) / (2.0 * s)
    return c * np.array([[(1.0 + p.A) / s**2, -1.0 / s], [-1.0 / s, 1.0]])


def mass_within_level(t: float, level: float, p: ModelParams) -> float:
    """Mass of the fundamental solution inside {P_star <= level} (d = 1)."""
    if p.d != 1:
        raise DomainError("level-set masses implemented for d = 1 only")
    beta = _beta(t, p)
    mat = _pressure_form_matrix(t, p)
    det = float(np.linalg.det(mat))
    u_max = level - beta
    if u_max <= 0:
        return 0.0
    if p.m > 1.0:
        u_max = min(u_max, -beta)  # support ends where the pressure changes sign

    def integrand(u: float) -> float:
        return positive_part_power((1.0 - p.m) / p.m * (beta + u), p.p_exp)

    val, _ = integrate.quad(integrand, 0.0, u_max, limit=200)
    return math.pi / math.sqrt(det) * val


def half_mass_ellipse(t: float, p: ModelParams, mass_fraction: float = 0.5,
                      tol: float = 1e-6, max_iter: int = 200) -> Ellipse:
    """Level set of P_star enclosing the requested fraction of the unit mass."""
    if t <= 0:
        raise DomainError("half_mass_ellipse requires t > 0")
    beta = _beta(t, p)
    lo = beta
    if p.m > 1.0:
        hi = 0.0
    else:
        hi = beta + 1.0
        for _ in range(200):
            if mass_within_level(t, hi, p) >= mass_fraction:
                break
            hi = beta + 2.0 * (hi - beta)
        else:
            raise ConvergenceError("failed to bracket the half-mass level")
    level = None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mass_within_level(t, mid, p) < mass_fraction:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) <= tol * max(1.0, abs(hi)):
            level = 0.5 * (lo + hi)
            break
    if level is None:
        raise ConvergenceError(f"half-mass bisection did not converge in {max_iter} iterations")
    mat = _pressure_form_matrix(t, p)
    eigvals, eigvecs = np.linalg.eigh(mat)
    semi = tuple(math.sqrt((level - beta) / ev) for ev in eigvals)
    angle = math.atan2(eigvecs[1, 0], eigvecs[0, 0])
    return Ellipse(t=t, m=p.m, level=level, semi_axes=semi, angle=angle)


def barenblatt_phase_profile(r, p: ModelParams):
    """Radial profile (1 +/- r^2)_+^(1/(m-1)) in the variable r^2 = A|x|^2 + |v|^2."""
    rr = np.asarray(r, dtype=float)
    return positive_part_power(1.0 + p.sign * rr * rr, p.p_exp)


def barenblatt_half_mass_radius(p: ModelParams) -> float:
    """Radius enclosing half the mass of the phase-space radial profile (d = 1).

    Mass is measured with the planar radial element r dr, matching the
    two-dimensional (x, v) phase plane.
    """
    if p.d != 1:
        raise DomainError("implemented for d = 1 only")

    def cum(rr: float) -> float:
        val, _ = integrate.quad(
            lambda r: r * barenblatt_phase_profile(r, p), 0.0, rr, limit=200
        )
        return val

    if p.m > 1.0:
        r_top = 1.0
        total = cum(1.0)
    else:
        total, _ = integrate.quad(
            lambda r: r * barenblatt_phase_profile(r, p), 0.0, np.inf, limit=400
        )
        r_top = 1.0
        while cum(r_top) < 0.55 * total:
            r_top *= 2.0
            if r_top > 1e9:
                raise ConvergenceError("failed to bracket the half-mass radius")
    sol = optimize.brentq(lambda rr: cum(rr) - 0.5 * total, 1e-12, r_top)
    return float(sol)
