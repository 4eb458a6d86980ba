"""Splitting solver for the rescaled equation in its rotation-symmetric frame.

Each splitting interval of length 1/n alternates a degenerate drift-diffusion
substep in v (factor-2 coefficients on the first half-interval) with an exact
phase-plane rotation (factor-2 free transport on the second half-interval).

The v-step writes the full flux as G * d(xi)/dv with the potential
xi = 2m/(A(m-1)) G^(m-1) + (1+A)/sqrt(A) |v|^2, upwinded by the sign of the
potential jump.  Every sampled stationary profile makes xi constant per
x-slice, so the whole profile family is an exact discrete fixed point of the
step; the scheme is conservative by telescoping and monotone under its CFL
bound.  The spec's plain flux (centred G^m difference plus sign-of-v upwind
drift) is kept as ``scheme="direct"``.

The rotation is decomposed into three axis shears; each shear moves cell
contents by a per-row constant number of cells via a donor-cell linear remap
whose wall overflow piles onto the boundary cell.  Interior accuracy matches
bilinear interpolation while total mass is conserved to machine precision and
the update stays a positive linear map (comparison and contraction are
inherited exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import optimize

from .errors import CFLError, DomainError, NonFiniteError
from .fields import DiagnosticsReport, Field, PhaseGrid, compute_diagnostics
from .params import ModelParams, gamma_for_mass
from .profiles import ProfileSpec, SelfSimilarMap, profile
from .radial import positive_part_power

VACUUM_EPS = 1e-250


@dataclass(frozen=True)
class SolverConfig:
    """Splitting-scheme configuration on a g-frame grid.

    ``n`` counts splitting intervals per unit time of the rotation-symmetric
    frame (interval length 1/n there); ``t_end`` and ``snapshot_dt`` are in
    g-frame time.  ``gamma_low`` (mass-deficient profile offset) caps the
    fast-diffusion CFL diffusivity through the ordering between solutions;
    without it the cap falls back to ``diffusivity_floor``.
    """

    p: ModelParams
    grid: PhaseGrid
    n: int = 32
    t_end: float = 1.0
    snapshot_dt: float = 0.25
    cfl_safety: float = 0.9
    flavor: str = "lie"
    scheme: str = "gradient"
    transport_reference: str = "equilibrium"
    gamma_low: float | None = None
    diffusivity_floor: float = 1e-10
    max_substeps: int = 2_000_000

    def __post_init__(self):
        if self.n < 1 or self.t_end <= 0 or not 0 < self.cfl_safety <= 1:
            raise ValueError("invalid solver configuration")
        if self.flavor not in ("lie", "strang"):
            raise ValueError(f"unknown splitting flavor {self.flavor!r}")
        if self.scheme not in ("gradient", "direct"):
            raise ValueError(f"unknown v-step scheme {self.scheme!r}")
        if self.transport_reference not in ("equilibrium", "none"):
            raise ValueError(f"unknown transport reference {self.transport_reference!r}")


@dataclass
class Snapshot:
    t: float
    field: Field
    report: DiagnosticsReport | None


@dataclass
class Trajectory:
    snapshots: list[Snapshot]
    provenance: dict = dc_field(default_factory=dict)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def __post_init__(self):
        ts = [s.t for s in self.snapshots]
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            raise ValueError("snapshot times must be strictly increasing")


def rotation_frame_grid(grid: PhaseGrid, p: ModelParams) -> PhaseGrid:
    """Relabelled grid for G(t, X, V) = g(t/sqrt(A), A^(-1/4) X, A^(1/4) V).

    Cell values are shared one-to-one between the frames (unit Jacobian), only
    the axis scales change.
    """
    a = p.A
    return PhaseGrid(grid.d, grid.nx, grid.nv,
                     grid.lx * a**0.25, grid.lv * a ** (-0.25))


def suggest_grid(p: ModelParams, nx: int, nv: int, mass_hi: float = 2.0,
                 tail_mass: float = 1e-5) -> PhaseGrid:
    """g-frame grid whose rotation-frame image is a square box.

    The box is sized so the mass of the upper sandwich profile outside the
    inscribed disc stays below ``tail_mass`` (fast diffusion) or the box
    contains 1.5x the support radius (porous medium).
    """
    if p.d != 1:
        raise DomainError("grid suggestion implemented for d = 1")
    gam = gamma_for_mass(p, mass_hi)
    b = 0.5 * (1.0 + p.A) * math.sqrt(p.A)
    if p.m > 1.0:
        l_rot = 1.5 * math.sqrt(abs(gam) / b)
    else:
        kappa = (1.0 - p.m) / p.m
        pe = p.p_exp
        total = mass_hi

        def inside(r: float) -> float:
            # exact antiderivative of the planar radial mass integral
            c0, c1 = gam, b
            return (
                math.pi * kappa**pe / (c1 * (pe + 1.0))
                * ((c0 + c1 * r * r) ** (pe + 1.0) - c0 ** (pe + 1.0))
            )

        l_rot = optimize.brentq(
            lambda r: (total - inside(r)) - tail_mass * total, 1e-6, 1e6
        )
    a = p.A
    return PhaseGrid(p.d, nx, nv, l_rot * a ** (-0.25), l_rot * a**0.25)


# ---------------------------------------------------------------------------
# conservative per-row shifts (building block of transport and frame shears)


def _conservative_shift(values: np.ndarray, offsets: np.ndarray,
                        target_axis: int, row_axis: int) -> np.ndarray:
    """Translate cell contents along ``target_axis`` by a per-row cell count.

    ``offsets`` is indexed along ``row_axis`` and measured in cells; the
    donor-cell linear remap deposits each cell onto its two overlapped target
    cells, and content that would cross a wall piles up on the wall cell, so
    the total per row is conserved exactly.
    """
    n = values.shape[target_axis]
    k_all = np.floor(offsets).astype(int)
    w_all = offsets - k_all
    out = np.zeros_like(values)
    mv = np.moveaxis  # work with target axis first, row axis second
    src = mv(values, (target_axis, row_axis), (0, 1))
    dst = mv(out, (target_axis, row_axis), (0, 1))
    for k in np.unique(k_all):
        rows = np.nonzero(k_all == k)[0]
        block = src[:, rows]
        shifted = np.zeros_like(block)
        if k == 0:
            shifted[:] = block
        elif k > 0:
            if k < n:
                shifted[k:] = block[: n - k]
                shifted[-1] += block[n - k:].sum(axis=0)
            else:
                shifted[-1] = block.sum(axis=0)
        else:
            kk = -k
            if kk < n:
                shifted[: n - kk] = block[kk:]
                shifted[0] += block[:kk].sum(axis=0)
            else:
                shifted[0] = block.sum(axis=0)
        w = w_all[rows].reshape((1, -1) + (1,) * (block.ndim - 2))
        frac = (1.0 - w) * shifted
        frac[1:] += w * shifted[:-1]
        frac[-1] += (w * shifted)[-1]
        dst[:, rows] = frac
    return out


def _rotate_shears(vals: np.ndarray, grid: PhaseGrid, theta: float) -> np.ndarray:
    """Rotation by theta in every (x_i, v_i) plane via three conservative shears."""
    t_hat = math.tan(0.5 * theta)
    s_hat = math.sin(theta)
    xc, vc = grid.x_centers, grid.v_centers
    for plane in range(grid.d):
        ax_x = plane
        ax_v = grid.d + plane
        x_shift = t_hat * vc / grid.dx  # gather at x - t_hat * v
        v_shift = -s_hat * xc / grid.dv  # gather at v + s_hat * x
        vals = _conservative_shift(vals, x_shift, ax_x, ax_v)
        vals = _conservative_shift(vals, v_shift, ax_v, ax_x)
        vals = _conservative_shift(vals, x_shift, ax_x, ax_v)
    return vals


def step_transport(g: Field, dt: float, reference: np.ndarray | None = None,
                   info: dict | None = None) -> Field:
    """Exact-rotation transport substep: angle 2*dt in every (x_i, v_i) plane.

    Three conservative shears per plane realize the rotation; values swept
    against the outer walls pile on the boundary cells instead of leaving.

    When ``reference`` holds a radial field (exactly invariant under the
    rotation pointwise), only the deviation from it is remapped: the scheme
    then fixes the whole stationary-profile family exactly, and differences
    of two solutions still pass through the same positive linear remap, so
    comparison and contraction are untouched.  Tiny negative values from the
    deviation remap are clipped and logged.
    """
    if dt < 0:
        raise DomainError("dt must be nonnegative")
    grid = g.grid
    theta = 2.0 * dt
    if reference is None:
        vals = _rotate_shears(g.values, grid, theta)
    else:
        vals = reference + _rotate_shears(g.values - reference, grid, theta)
    neg = vals < 0.0
    clipped = 0.0
    if np.any(neg):
        clipped = -float(np.sum(vals[neg])) * grid.cell_volume
        vals = np.where(neg, 0.0, vals)
    if info is not None:
        info["transport_clipped_mass"] = info.get("transport_clipped_mass", 0.0) + clipped
    return Field(grid, vals, g.frame)


# ---------------------------------------------------------------------------
# v-direction drift-diffusion substep


def _axis_view(arr: np.ndarray, axis: int):
    return np.moveaxis(arr, axis, 0)


def step_diffusion(g: Field, dt: float, p: ModelParams, *,
                   cfl_safety: float = 0.9, scheme: str = "gradient",
                   floor: float = 1e-10, max_substeps: int = 2_000_000,
                   info: dict | None = None) -> Field:
    """Advance dG/dt = 2((1/A) Lap_v G^m + (1+A)/sqrt(A) div_v(v G)) over dt.

    Conservative explicit finite volumes with internal CFL substepping; zero
    flux through the outer v-faces.  ``floor`` caps the fast-diffusion
    coefficient in the CFL estimate only (the ordering with a mass-deficient
    profile justifies it on sandwiched data); fluxes always use the actual
    cell values.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    grid = g.grid
    m, a = p.m, p.A
    coef_diff = 2.0 / a
    coef_drift = 2.0 * (1.0 + a) / math.sqrt(a)
    dv = grid.dv
    vc = grid.v_centers
    values = g.values.copy()
    remaining = dt
    n_sub = 0
    clipped = 0.0
    vol = grid.cell_volume

    while remaining > 0.0:
        if n_sub >= max_substeps:
            raise CFLError(f"diffusion substep cap {max_substeps} exceeded")
        g_eff = np.maximum(values, floor) if m < 1.0 else values
        if scheme == "gradient":
            g_pow = positive_part_power(np.maximum(values, VACUUM_EPS), m - 1.0)
            xi = (coef_diff * m / (m - 1.0)) * g_pow + 0.5 * coef_drift * grid.v_sq()
            # per-cell monotonicity bound: dt * (xi'(G_i) * (up_l + up_r)
            # + |dxi_l| + |dxi_r|) <= dv^2 cellwise; for m > 1 the xi'
            # singularity at the free boundary is replaced by the face
            # diffusivity (positivity there is structural, not dt-limited)
            if m < 1.0:
                xi_prime = coef_diff * m * positive_part_power(g_eff, m - 2.0)
            else:
                xi_prime = None
        else:
            xi = None
            xi_prime = None
        fluxes = []
        bound = np.zeros_like(values)
        d_eff_max = coef_diff * m * float(np.max(positive_part_power(g_eff, m - 1.0)))
        for ax in grid.v_axes:
            gv = _axis_view(values, ax)
            if scheme == "gradient":
                xv = _axis_view(xi, ax)
                dxi = xv[1:] - xv[:-1]
                up = np.where(dxi > 0.0, gv[1:], gv[:-1])
                flux = up * dxi / dv
                vac = np.minimum(gv[1:], gv[:-1]) <= VACUUM_EPS
                if m < 1.0 and np.any(vac):
                    gm = positive_part_power(gv, m)
                    vf = 0.5 * (vc[1:] + vc[:-1])
                    vf = vf.reshape((-1,) + (1,) * (gv.ndim - 1))
                    up_drift = np.where(vf > 0.0, gv[1:], gv[:-1])
                    direct = coef_diff * (gm[1:] - gm[:-1]) / dv + coef_drift * vf * up_drift
                    flux = np.where(vac, direct, flux)
                    dxi = np.where(vac, 0.0, dxi)
                ge = _axis_view(g_eff, ax)
                face_max = np.maximum(ge[1:], ge[:-1])
                bv = _axis_view(bound, ax)
                adx = np.abs(dxi)
                if m < 1.0:
                    xp = _axis_view(xi_prime, ax)
                    bv[:-1] += xp[:-1] * face_max + adx
                    bv[1:] += xp[1:] * face_max + adx
                else:
                    face_d = coef_diff * m * positive_part_power(face_max, m - 1.0)
                    bv[:-1] += face_d + adx
                    bv[1:] += face_d + adx
            else:
                gm = positive_part_power(gv, m)
                vf = 0.5 * (vc[1:] + vc[:-1])
                vf = vf.reshape((-1,) + (1,) * (gv.ndim - 1))
                up_drift = np.where(vf > 0.0, gv[1:], gv[:-1])
                flux = coef_diff * (gm[1:] - gm[:-1]) / dv + coef_drift * vf * up_drift
                bound += 2.0 * d_eff_max + 2.0 * coef_drift * grid.lv * dv
            fluxes.append(flux)
        denom = float(np.max(bound))
        dt_sub = cfl_safety * dv * dv / denom if denom > 0 else remaining
        dt_sub = min(dt_sub, remaining)
        for ax, flux in zip(grid.v_axes, fluxes):
            gv = _axis_view(values, ax)
            gv[:-1] += dt_sub / dv * flux
            gv[1:] -= dt_sub / dv * flux
        neg = values < 0.0
        if np.any(neg):
            clipped += -float(np.sum(values[neg])) * vol
            values[neg] = 0.0
        remaining -= dt_sub
        n_sub += 1

    if info is not None:
        info["substeps"] = info.get("substeps", 0) + n_sub
        info["clipped_mass"] = info.get("clipped_mass", 0.0) + clipped
    return Field(grid, values, g.frame)


# ---------------------------------------------------------------------------
# full evolution


def _cfl_floor(cfg: SolverConfig, rot_grid: PhaseGrid, g0: np.ndarray) -> float:
    p = cfg.p
    if p.m >= 1.0:
        return 0.0
    if cfg.gamma_low is not None:
        spec = ProfileSpec(p, cfg.gamma_low, "G")
        low = rot_grid.sample(lambda t, x, v: profile(spec, x, v))
        return max(float(np.min(low)), cfg.diffusivity_floor)
    pos = g0[g0 > 0]
    if pos.size:
        return max(min(float(np.min(pos)), 1.0), cfg.diffusivity_floor)
    return cfg.diffusivity_floor


def evolve(g0: Field, cfg: SolverConfig, diagnostics: bool = True) -> Trajectory:
    """Run the splitting scheme from a g-frame initial datum.

    The field is relabelled into the rotation-symmetric frame (one-to-one
    cell values), advanced interval by interval, and snapshots are recorded
    back in the g-frame together with their diagnostics.
    """
    p = cfg.p
    if g0.grid != cfg.grid:
        raise ValueError("initial datum lives on a different grid")
    if g0.frame != "g":
        raise ValueError("evolve expects a g-frame field")
    rot_grid = rotation_frame_grid(cfg.grid, p)
    sqrt_a = math.sqrt(p.A)
    h = 1.0 / cfg.n
    n_intervals = max(1, round(cfg.t_end * sqrt_a * cfg.n))
    snap_every = max(1, round(cfg.snapshot_dt * sqrt_a * cfg.n))
    state = Field(rot_grid, g0.values.copy(), "G")
    floor = _cfl_floor(cfg, rot_grid, state.values)
    if cfg.transport_reference == "equilibrium":
        spec = ProfileSpec(p, p.gamma_star, "G")
        reference = rot_grid.sample(lambda t, x, v: profile(spec, x, v))
    else:
        reference = None
    info: dict = {}

    def record(k: int, snaps: list):
        t_g = (k * h) / sqrt_a
        fld = Field(cfg.grid, state.values.copy(), "g")
        rep = compute_diagnostics(fld, p, t_g) if diagnostics else None
        snaps.append(Snapshot(t=t_g if k else 0.0, field=fld, report=rep))

    snaps: list[Snapshot] = []
    record(0, snaps)
    for k in range(1, n_intervals + 1):
        if cfg.flavor == "lie":
            state = step_diffusion(state, 0.5 * h, p, cfl_safety=cfg.cfl_safety,
                                   scheme=cfg.scheme, floor=floor,
                                   max_substeps=cfg.max_substeps, info=info)
            state = step_transport(state, 0.5 * h, reference=reference, info=info)
        else:
            state = step_diffusion(state, 0.25 * h, p, cfl_safety=cfg.cfl_safety,
                                   scheme=cfg.scheme, floor=floor,
                                   max_substeps=cfg.max_substeps, info=info)
            state = step_transport(state, 0.5 * h, reference=reference, info=info)
            state = step_diffusion(state, 0.25 * h, p, cfl_safety=cfg.cfl_safety,
                                   scheme=cfg.scheme, floor=floor,
                                   max_substeps=cfg.max_substeps, info=info)
        if not np.all(np.isfinite(state.values)):
            raise NonFiniteError(f"non-finite values after interval {k}")
        if k % snap_every == 0 or k == n_intervals:
            record(k, snaps)
    # deduplicate a possible double record of the final interval
    if len(snaps) >= 2 and snaps[-1].t == snaps[-2].t:
        snaps.pop()
    return Trajectory(
        snapshots=snaps,
        provenance={
            "config": cfg,
            "intervals": n_intervals,
            "diffusion_substeps": info.get("substeps", 0),
            "clipped_mass": info.get("clipped_mass", 0.0)
            + info.get("transport_clipped_mass", 0.0),
            "cfl_floor": floor,
        },
    )


def sandwiched_initial_datum(cfg: SolverConfig, seed: int, mass_lo: float = 0.5,
                             mass_hi: float = 2.0, smooth: int = 3,
                             unit_mass: bool = True) -> Field:
    """Random smooth field trapped between the two sandwich profiles.

    With ``unit_mass`` the blend weight is scaled so the grid mass is exactly
    one (the trapping class assumes unit mass); the scaling is linear in the
    weight, so the field stays inside the sandwich.
    """
    from .fields import sample_profile
    from .profiles import sandwich_specs

    lo, hi = sandwich_specs(cfg.p, mass_lo, mass_hi)
    g1 = sample_profile(lo, cfg.grid).values
    g2 = sample_profile(hi, cfg.grid).values
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.0, 1.0, size=cfg.grid.shape)
    kern = np.ones(2 * smooth + 1) / (2 * smooth + 1)
    for ax in range(w.ndim):
        w = np.apply_along_axis(lambda a: np.convolve(a, kern, mode="same"), ax, w)
    if unit_mass:
        vol = cfg.grid.cell_volume
        gain = float(np.sum(w * (g2 - g1))) * vol
        alpha = (1.0 - float(np.sum(g1)) * vol) / gain
        if not 0.0 < alpha * float(np.max(w)) <= 1.0:
            raise ValueError("unit-mass blend left the sandwich; widen the masses")
        w = alpha * w
    return Field(cfg.grid, g1 + w * (g2 - g1), "g")


# ---------------------------------------------------------------------------
# original-variable evolution through the self-similar change of variables


def g_field_to_f(g_fld: Field, ssmap: SelfSimilarMap, tau: float,
                 f_grid: PhaseGrid) -> Field:
    """Map a g-frame snapshot to the original variables on ``f_grid`` (d = 1).

    Two passes of 1-D linear interpolation realize f(x, v) =
    R^(-d(1+A)) g(x/R, v/R^A - x/R); points outside the g-box evaluate to 0.
    """
    p = ssmap.p
    if g_fld.grid.d != 1:
        raise DomainError("resampled frame mapping implemented for d = 1")
    r = math.exp(tau)
    amp = r ** (-p.d * (1.0 + p.A))
    gx, gv = g_fld.grid.x_centers, g_fld.grid.v_centers
    fx, fv = f_grid.x_centers, f_grid.v_centers
    # pass 1: interpolate in x at X = x/R (one coordinate per output row)
    pos = (fx / r - gx[0]) / (gx[1] - gx[0])
    i0 = np.floor(pos).astype(int)
    w = (pos - i0)[:, None]
    n = gx.size
    v0 = np.where((i0 >= 0)[:, None] & (i0 <= n - 1)[:, None],
                  g_fld.values[np.clip(i0, 0, n - 1), :], 0.0)
    v1 = np.where((i0 + 1 >= 0)[:, None] & (i0 + 1 <= n - 1)[:, None],
                  g_fld.values[np.clip(i0 + 1, 0, n - 1), :], 0.0)
    mid = (1.0 - w) * v0 + w * v1  # shape (f_nx, g_nv)
    # pass 2: per output x-row, interpolate in v at V = v/R^A - x/R
    vq = fv[None, :] / r**p.A - (fx / r)[:, None]
    pos = (vq - gv[0]) / (gv[1] - gv[0])
    j0 = np.floor(pos).astype(int)
    wv = pos - j0
    nvv = gv.size
    take0 = np.take_along_axis(mid, np.clip(j0, 0, nvv - 1), axis=1)
    take1 = np.take_along_axis(mid, np.clip(j0 + 1, 0, nvv - 1), axis=1)
    out = (1.0 - wv) * np.where((j0 >= 0) & (j0 <= nvv - 1), take0, 0.0) + wv * np.where(
        (j0 + 1 >= 0) & (j0 + 1 <= nvv - 1), take1, 0.0
    )
    return Field(f_grid, amp * out, "f")


def evolve_f(f0, cfg: SolverConfig, r0: float = 1.0,
             f_grid: PhaseGrid | None = None, diagnostics: bool = False) -> Trajectory:
    """Evolve in the original variables by conjugating through the rescaling.

    ``f0`` is an evaluator (t, x, v) or an f-frame Field on cfg.grid; with
    the default R0 = 1 the rescaled initial datum is g0(x, v) = f0(x, v + x).
    ``cfg.t_end`` and ``cfg.snapshot_dt`` are interpreted in the original
    time; snapshots are mapped back onto ``f_grid`` (default: cfg.grid).
    """
    p = cfg.p
    if r0 <= 0:
        raise DomainError("conjugated evolution needs R0 > 0")
    ssmap = SelfSimilarMap(p, r0=r0)
    f_grid = f_grid or cfg.grid
    if callable(f0):
        g0_vals = cfg.grid.sample(lambda t, x, v: f0(0.0, x, v + x))
    else:
        if f0.grid != cfg.grid:
            raise ValueError("field initial datum must live on cfg.grid")
        shifts = -cfg.grid.x_centers / cfg.grid.dv
        g0_vals = _conservative_shift(f0.values, shifts, cfg.grid.d, 0)
    g0 = Field(cfg.grid, np.maximum(g0_vals, 0.0), "g")

    tau_end = ssmap.tau(cfg.t_end)
    tau_snap = max(ssmap.tau(cfg.snapshot_dt), 1e-9) if cfg.snapshot_dt < cfg.t_end else tau_end
    # the conjugated run tracks a moving profile far from the stationary one,
    # so the deviation-based remap brings no benefit; plain transport is a
    # positive map and never clips
    g_cfg = SolverConfig(
        p=p, grid=cfg.grid, n=cfg.n, t_end=tau_end, snapshot_dt=tau_snap,
        cfl_safety=cfg.cfl_safety, flavor=cfg.flavor, scheme=cfg.scheme,
        transport_reference="none",
        gamma_low=cfg.gamma_low, diffusivity_floor=cfg.diffusivity_floor,
        max_substeps=cfg.max_substeps,
    )
    g_traj = evolve(g0, g_cfg, diagnostics=diagnostics)
    snaps = []
    for s in g_traj.snapshots:
        tau = s.t
        t_f = ssmap.t_of_tau(tau)
        fld = g_field_to_f(s.field, ssmap, tau, f_grid)
        snaps.append(Snapshot(t=t_f, field=fld, report=s.report))
    return Trajectory(snapshots=snaps, provenance=dict(g_traj.provenance, r0=r0))


# ---------------------------------------------------------------------------
# trajectory comparisons


def check_contraction(traj1: Trajectory, traj2: Trajectory) -> np.ndarray:
    """Series int (f2 - f1)_+ at matched snapshots (nonincreasing in time)."""
    out = []
    for s1, s2 in zip(traj1.snapshots, traj2.snapshots):
        if s1.field.grid != s2.field.grid:
            raise ValueError("trajectories live on different grids")
        diff = np.clip(s2.field.values - s1.field.values, 0.0, None)
        out.append(float(np.sum(diff)) * s1.field.grid.cell_volume)
    return np.array(out)


def check_comparison(traj1: Trajectory, traj2: Trajectory,
                     tol: float = 1e-12) -> np.ndarray:
    """Cellwise f1 <= f2 + tol at each matched snapshot."""
    out = []
    for s1, s2 in zip(traj1.snapshots, traj2.snapshots):
        out.append(bool(np.all(s1.field.values <= s2.field.values + tol)))
    return np.array(out)
