"""Discretization and spectrum of the linearized collision-transport operator.

The linearization around the stationary profile reads
L h = m Lap_v(gstar^(m-1) h) + (1+A) div_v(v h) - v.grad_x h + A x.grad_v h
and is symmetrized into  L' f = gstar^((m-2)/2) L(gstar^((2-m)/2) f)  on plain
L^2 of a truncated domain (rectangle or ellipse) with zero Dirichlet exterior
values; the two spectra coincide in exact arithmetic while the similarity
keeps the matrix entries bounded on the truncated box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import linalg

from .errors import ConvergenceError, DomainError, RangeError, SingularShift
from .fields import PhaseGrid
from .params import ModelParams
from .profiles import ProfileSpec, profile
from .radial import positive_part_power

DENSE_LIMIT = 6000


@dataclass(frozen=True)
class Domain:
    """Truncation domain: full rectangle or inscribed ellipse of the box."""

    kind: str  # "rectangle" | "ellipse"
    lx: float
    lv: float

    def __post_init__(self):
        if self.kind not in ("rectangle", "ellipse"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.lx <= 0 or self.lv <= 0:
            raise ValueError("degenerate domain")

    @staticmethod
    def reference_rectangle() -> "Domain":
        return Domain("rectangle", 18.0, 28.0)

    @staticmethod
    def reference_ellipse() -> "Domain":
        # equal area to the reference rectangle: semi-axes 2*L/sqrt(pi)
        return Domain("ellipse", 2.0 * 18.0 / math.sqrt(math.pi),
                      2.0 * 28.0 / math.sqrt(math.pi))

    def mask(self, grid: PhaseGrid) -> np.ndarray:
        if self.kind == "rectangle":
            return np.ones(grid.shape, dtype=bool)
        xs = grid.x_centers[:, None] / self.lx
        vs = grid.v_centers[None, :] / self.lv
        return xs**2 + vs**2 < 1.0


@dataclass
class LinearOperatorAssembly:
    p: ModelParams
    domain: Domain
    grid: PhaseGrid
    matrix: sp.csr_matrix
    active_index: np.ndarray  # grid shape, -1 outside the domain
    upwind: bool = False

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray  # complex, sorted by descending real part
    residuals: np.ndarray  # backward errors ||A u - lambda u|| / ||u||
    count: int
    domain: Domain
    grid: PhaseGrid
    backend: str
    analytic_residuals: dict = dc_field(default_factory=dict)

    def largest_nonzero_real(self, kernel_radius: float = 0.1) -> float:
        """Largest real part among eigenvalues beyond the kernel neighbourhood."""
        outside = self.eigenvalues[np.abs(self.eigenvalues) > kernel_radius]
        if outside.size == 0:
            raise ConvergenceError("no eigenvalue outside the kernel neighbourhood")
        return float(np.max(outside.real))

    def nearest_to_zero(self) -> complex:
        return complex(self.eigenvalues[np.argmin(np.abs(self.eigenvalues))])


def assemble(p: ModelParams, domain: Domain, nx: int, nv: int,
             upwind: bool = False, ghost_dissipation: float = 0.02,
             include_transport: bool = True,
             freeze_diffusivity: bool = False) -> LinearOperatorAssembly:
    """Finite-difference matrix of the symmetrized linearized operator.

    Second-order centred stencils: the v-diffusion acts on the product
    gstar^(m-1) u through the 3-point second difference, the confinement term
    through centred face averages, and the two first-order transport terms
    through centred differences (optably upwinded).  Exterior cells contribute
    zero (Dirichlet truncation).

    ``ghost_dissipation`` adds a fourth-difference term in x of size
    O(dx^3) scaled by the local advection speed |v|.  Saw-tooth x-modes are
    invisible to the centred x-derivative, decouple from the transport and
    otherwise show up as spurious slowly-decaying eigenvalues (they sit well
    above the physical top of the spectrum and carry most of their energy at
    the Nyquist wavenumber); the dissipation pushes them deep into the left
    half plane while perturbing resolved modes only at third order.

    ``include_transport=False`` and ``freeze_diffusivity=True`` are diagnostic
    switches: together they reduce the matrix to the constant-coefficient
    v-Laplacian plus confinement drift, whose eigenvalues are real and
    nonpositive.
    """
    if not (p.m1 < p.m < 1.0):
        raise RangeError("spectrum computation requires m in (m1, 1)")
    if p.d != 1:
        raise DomainError("spectrum assembly implemented for d = 1")
    grid = PhaseGrid(1, nx, nv, domain.lx, domain.lv)
    mask = domain.mask(grid)
    if not np.all(mask.sum(axis=1) >= 0):
        raise AssertionError
    idx = -np.ones(grid.shape, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))

    xs = grid.x_centers[:, None]
    vs = grid.v_centers[None, :]
    spec = ProfileSpec(p, p.gamma_star, "g")
    gstar = grid.sample(lambda t, x, v: profile(spec, x, v))
    if np.any(gstar[mask] <= 0.0):
        raise DomainError("stationary profile vanishes on active cells")
    gm1 = positive_part_power(gstar, p.m - 1.0)  # gstar^(m-1)
    w = positive_part_power(gstar, 0.5 * (2.0 - p.m))  # gstar^((2-m)/2)
    if freeze_diffusivity:
        gm1 = np.ones(grid.shape)
        w = np.ones(grid.shape)
    w_inv = 1.0 / w
    dx, dv = grid.dx, grid.dv
    m, aa = p.m, p.A

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def add(coef: np.ndarray, di: int, dj: int):
        """coef(i, j) multiplies u(i+di, j+dj) = w(i+di, j+dj) f(i+di, j+dj)."""
        src_i = np.arange(max(0, -di), nx - max(0, di))
        src_j = np.arange(max(0, -dj), nv - max(0, dj))
        ii, jj = np.meshgrid(src_i, src_j, indexing="ij")
        ni, nj = ii + di, jj + dj
        ok = mask[ii, jj] & mask[ni, nj]
        r = idx[ii, jj][ok]
        c = idx[ni, nj][ok]
        v = (coef[ii, jj] * w_inv[ii, jj] * w[ni, nj])[ok]
        rows.append(r)
        cols.append(c)
        vals.append(v)

    v_plus = vs + 0.5 * dv
    v_minus = vs - 0.5 * dv

    # m * Lap_v(gstar^(m-1) u): 3-point second difference of the product, each
    # neighbour carrying its own gstar^(m-1) value
    add(-2.0 * m / dv**2 * np.broadcast_to(gm1, grid.shape), 0, 0)
    gm1_up = np.empty_like(gm1)
    gm1_up[:, :-1] = gm1[:, 1:]
    gm1_up[:, -1] = 0.0
    gm1_dn = np.empty_like(gm1)
    gm1_dn[:, 1:] = gm1[:, :-1]
    gm1_dn[:, 0] = 0.0
    add(m / dv**2 * gm1_up, 0, 1)
    add(m / dv**2 * gm1_dn, 0, -1)

    one = np.ones(grid.shape)
    if not include_transport:
        # collision operator only: confinement drift with centred faces
        add(0.5 * (1.0 + aa) / dv * (v_plus - v_minus) * one, 0, 0)
        add(0.5 * (1.0 + aa) / dv * v_plus * one, 0, 1)
        add(-0.5 * (1.0 + aa) / dv * v_minus * one, 0, -1)
        n_active = int(mask.sum())
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_active, n_active),
        ).tocsr()
        return LinearOperatorAssembly(p=p, domain=domain, grid=grid, matrix=mat,
                                      active_index=idx, upwind=upwind)
    if upwind:
        # (1+A) d/dv (v u) with donor-cell face values: the face value comes
        # from the higher-|v| side (mass drifts toward the origin)
        add((1.0 + aa) / dv * (np.where(v_plus > 0, 0.0, v_plus)
                               - np.where(v_minus > 0, v_minus, 0.0)) * one, 0, 0)
        add((1.0 + aa) / dv * np.where(v_plus > 0, v_plus, 0.0) * one, 0, 1)
        add(-(1.0 + aa) / dv * np.where(v_minus > 0, 0.0, v_minus) * one, 0, -1)
        # -v du/dx: advection with velocity +v, donor side is sign(v)
        add(-np.abs(vs) / dx * one, 0, 0)
        add(np.where(vs < 0, -vs, 0.0) / dx * one, 1, 0)
        add(np.where(vs > 0, vs, 0.0) / dx * one, -1, 0)
        # A x du/dv: coefficient c = A x, donor side is -sign(c)
        c_ax = aa * xs * one
        add(-np.abs(c_ax) / dv, 0, 0)
        add(np.where(c_ax > 0, c_ax, 0.0) / dv, 0, 1)
        add(np.where(c_ax < 0, -c_ax, 0.0) / dv, 0, -1)
    else:
        # (1+A) d/dv (v u): centred face averages
        add(0.5 * (1.0 + aa) / dv * (v_plus - v_minus) * one, 0, 0)
        add(0.5 * (1.0 + aa) / dv * v_plus * one, 0, 1)
        add(-0.5 * (1.0 + aa) / dv * v_minus * one, 0, -1)
        # -v du/dx centred
        add(-vs / (2.0 * dx) * one, 1, 0)
        add(vs / (2.0 * dx) * one, -1, 0)
        # A x du/dv centred
        add(aa * xs / (2.0 * dv) * one, 0, 1)
        add(-aa * xs / (2.0 * dv) * one, 0, -1)

    if ghost_dissipation > 0.0:
        eps = ghost_dissipation * (np.abs(vs) + 0.1) / dx * one
        for off, stencil in ((-2, -1.0), (-1, 4.0), (0, -6.0), (1, 4.0), (2, -1.0)):
            add(stencil * eps, off, 0)

    n_active = int(mask.sum())
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_active, n_active),
    ).tocsr()
    return LinearOperatorAssembly(p=p, domain=domain, grid=grid, matrix=mat,
                                  active_index=idx, upwind=upwind)


# ---------------------------------------------------------------------------
# analytic eigenpairs


def analytic_eigenpairs(p: ModelParams) -> list[tuple[float, Callable]]:
    """Exact eigenvalues of the linearized operator with their eigenfunctions.

    Returns [(0, h0), (-(1-A), h1), (-A, h2), (-1, h3)] where h0 is the
    kernel generator gstar^(2-m), h1 the scaling mode, h2 and h3 the velocity
    and position translation modes (d = 1 components).
    """
    if not (p.m1 < p.m < 1.0):
        raise RangeError("analytic eigenpairs stated for m in (m1, 1)")
    a, m = p.A, p.m
    spec = ProfileSpec(p, p.gamma_star, "g")

    def h0(x, v):
        return positive_part_power(profile(spec, x, v), 2.0 - m)

    b_c = 0.5 * (1.0 + a)
    c_c = 1.0 / (p.d * (1.0 - m))

    def h1(x, v):
        # scaling mode, from differentiating the exact one-parameter family of
        # rescaled spreading solutions at unit scale: the |v|^2 coefficient is
        # B - A*C and the cross term carries (1-A)*C (a finite-difference
        # application of the operator confirms the eigenvalue to stencil order)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        quad = (p.gamma_star + (b_c - a * c_c) * v**2 + (1.0 - a) * c_c * x * v
                + a * (b_c - c_c) * x**2)
        return (b_c / m) * quad * h0(x, v)

    def h2(x, v):
        return (np.asarray(v, dtype=float) - np.asarray(x, dtype=float)) * h0(x, v)

    def h3(x, v):
        return (np.asarray(v, dtype=float) - a * np.asarray(x, dtype=float)) * h0(x, v)

    return [(0.0, h0), (-(1.0 - a), h1), (-a, h2), (-1.0, h3)]


def apply_operator_fd(p: ModelParams, h_eval: Callable, x, v, step: float = 1e-4):
    """Finite-difference application of the linearized operator to an evaluator."""
    a, m = p.A, p.m
    spec = ProfileSpec(p, p.gamma_star, "g")

    def gh(xx, vv):
        return positive_part_power(profile(spec, xx, vv), m - 1.0) * h_eval(xx, vv)

    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    lap = (gh(x, v + step) - 2.0 * gh(x, v) + gh(x, v - step)) / step**2
    div_vh = ((v + step) * h_eval(x, v + step) - (v - step) * h_eval(x, v - step)) / (2 * step)
    dxh = (h_eval(x + step, v) - h_eval(x - step, v)) / (2 * step)
    dvh = (h_eval(x, v + step) - h_eval(x, v - step)) / (2 * step)
    return m * lap + (1.0 + a) * div_vh - v * dxh + a * x * dvh


# ---------------------------------------------------------------------------
# eigen solve


def eigensolve(asm: LinearOperatorAssembly, count: int = 24,
               backend: str | None = None) -> SpectrumResult:
    """The ``count`` eigenvalues closest to the origin, sorted by descending
    real part (for this operator they are also the ones of largest real part).

    Dense Hessenberg/QR below ``DENSE_LIMIT`` unknowns, shift-invert Arnoldi
    (shift 0, sparse LU) above; a singular shift is retried at 1e-3.
    """
    if count < 1:
        raise ValueError("count must be positive")
    n = asm.size
    if backend is None:
        backend = "dense" if n <= DENSE_LIMIT else "arnoldi"
    if backend == "dense":
        dense = asm.matrix.toarray()
        eigvals, eigvecs = linalg.eig(dense)
        nearest = np.argsort(np.abs(eigvals))[:count]
        eigvals = eigvals[nearest]
        eigvecs = eigvecs[:, nearest]
        order = np.argsort(-eigvals.real)
        eigvals = eigvals[order]
        eigvecs = eigvecs[:, order]
    elif backend == "arnoldi":
        mat = asm.matrix.tocsc()
        try:
            eigvals, eigvecs = spla.eigs(mat, k=count, sigma=0.0, which="LM")
        except (RuntimeError, spla.ArpackError) as exc:
            try:
                eigvals, eigvecs = spla.eigs(mat, k=count, sigma=1e-3, which="LM")
            except (RuntimeError, spla.ArpackError):
                raise SingularShift(f"shift-invert factorization failed: {exc}") from exc
        order = np.argsort(-eigvals.real)
        eigvals = eigvals[order]
        eigvecs = eigvecs[:, order]
    else:
        raise ValueError(f"unknown backend {backend!r}")
    residuals = np.empty(eigvals.size)
    for i, lam in enumerate(eigvals):
        u = eigvecs[:, i]
        residuals[i] = np.linalg.norm(asm.matrix @ u - lam * u) / np.linalg.norm(u)
    return SpectrumResult(eigenvalues=eigvals, residuals=residuals, count=count,
                          domain=asm.domain, grid=asm.grid, backend=backend,
                          analytic_residuals=analytic_mode_residuals(asm))


def analytic_mode_residuals(asm: LinearOperatorAssembly,
                            window: float = 0.7) -> dict:
    """Interior-windowed residuals ||A P(h) - lambda P(h)|| / ||P(h)||.

    P projects the analytic eigenfunctions into the similarity-transformed
    frame (f = gstar^((m-2)/2) h) on active cells; the window drops cells near
    the Dirichlet boundary where the truncated modes cannot match.
    """
    p = asm.p
    grid = asm.grid
    spec = ProfileSpec(p, p.gamma_star, "g")
    gstar = grid.sample(lambda t, x, v: profile(spec, x, v))
    w_inv = positive_part_power(gstar, 0.5 * (p.m - 2.0))
    mask = asm.domain.mask(grid)
    xs = grid.x_centers[:, None]
    vs = grid.v_centers[None, :]
    if asm.domain.kind == "rectangle":
        interior = (np.abs(xs) < window * asm.domain.lx) & (np.abs(vs) < window * asm.domain.lv)
    else:
        interior = (xs / asm.domain.lx) ** 2 + (vs / asm.domain.lv) ** 2 < window**2
    interior = np.broadcast_to(interior, grid.shape)
    out = {}
    for lam, h in analytic_eigenpairs(p):
        f_vals = (h(xs, vs) * w_inv)
        vec = np.zeros(asm.size)
        vec[asm.active_index[mask]] = f_vals[mask]
        resid_grid = np.zeros(grid.shape)
        resid_vec = asm.matrix @ vec - lam * vec
        resid_grid[mask] = resid_vec[asm.active_index[mask]]
        win = interior & mask
        num = float(np.sqrt(np.sum(resid_grid[win] ** 2)))
        den = float(np.sqrt(np.sum(f_vals[win] ** 2)))
        out[lam] = num / den if den > 0 else math.inf
    return out


# ---------------------------------------------------------------------------
# quadratic-form dissipation identity


def dissipation_check(p: ModelParams, h_eval: Callable, grid: PhaseGrid,
                      step: float | None = None) -> tuple[float, float]:
    """Both sides of the linearized entropy dissipation identity.

    lhs = 2 <L h, h> in the gstar^(m-2) weight; rhs = -2m int gstar
    |grad_v(gstar^(m-2) h)|^2.  They agree up to quadrature and stencil error,
    and rhs <= 0 always.
    """
    if p.m >= 1.0:
        raise RangeError("dissipation identity stated for m < 1")
    spec = ProfileSpec(p, p.gamma_star, "g")
    xs = grid.x_centers[:, None]
    vs = grid.v_centers[None, :]
    gstar = grid.sample(lambda t, x, v: profile(spec, x, v))
    weight = positive_part_power(gstar, p.m - 2.0)
    h_vals = h_eval(xs, vs)
    step = step or grid.dv
    lh = apply_operator_fd(p, h_eval, xs, vs, step=step)
    lhs = 2.0 * float(np.sum(lh * h_vals * weight)) * grid.cell_volume

    def wh(xx, vv):
        return positive_part_power(profile(spec, xx, vv), p.m - 2.0) * h_eval(xx, vv)

    dwh = (wh(xs, vs + step) - wh(xs, vs - step)) / (2.0 * step)
    rhs = -2.0 * p.m * float(np.sum(gstar * dwh**2)) * grid.cell_volume
    return lhs, rhs
