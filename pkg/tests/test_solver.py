import math

import numpy as np
import pytest

from kinfp.errors import CFLError
from kinfp.fields import (
    Field,
    PhaseGrid,
    l1_distance,
    mass,
    reference_state,
    sample_profile,
)
from kinfp.params import gamma_for_mass, model_params
from kinfp.profiles import ProfileSpec, fundamental_solution, profile, sandwich_specs
from kinfp.solver import (
    SolverConfig,
    check_comparison,
    check_contraction,
    evolve,
    evolve_f,
    rotation_frame_grid,
    sandwiched_initial_datum,
    step_diffusion,
    step_transport,
    suggest_grid,
)

P08 = model_params(1, 0.8)
P12 = model_params(1, 1.2)
GRID = suggest_grid(P08, 64, 64)
ROT = rotation_frame_grid(GRID, P08)
SQRT_A = math.sqrt(P08.A)


def rot_profile_field(p, gamma, grid):
    spec = ProfileSpec(p, gamma, "G")
    return Field(grid, grid.sample(lambda t, x, v: profile(spec, x, v)), "G")


def base_config(**kw):
    args = dict(p=P08, grid=GRID, n=32, t_end=2.0, snapshot_dt=0.5,
                gamma_low=gamma_for_mass(P08, 0.25))
    args.update(kw)
    return SolverConfig(**args)


# ---------------------------------------------------------------------------
# v-direction substep


def test_diffusion_fixes_profile_family_exactly():
    for mass_target in (0.5, 1.0, 2.0):
        g = rot_profile_field(P08, gamma_for_mass(P08, mass_target), ROT)
        out = step_diffusion(g, 0.03, P08, floor=float(np.min(g.values)))
        assert l1_distance(out, g) < 1e-14


def test_diffusion_fixes_compact_profile():
    p = P12
    grid = rotation_frame_grid(suggest_grid(p, 64, 64), p)
    g = rot_profile_field(p, p.gamma_star, grid)
    out = step_diffusion(g, 0.03, p)
    assert l1_distance(out, g) < 1e-14


def test_diffusion_mass_conservation_random():
    rng = np.random.default_rng(0)
    vals = rng.uniform(0.0, 1.0, size=ROT.shape)
    g = Field(ROT, vals, "G")
    info = {}
    out = step_diffusion(g, 0.01, P08, floor=1e-6, info=info)
    assert mass(out) == pytest.approx(mass(g), rel=1e-13)
    assert info["clipped_mass"] < 1e-12 * mass(g)


def test_diffusion_commutes_with_v_reflection():
    rng = np.random.default_rng(1)
    vals = rng.uniform(0.0, 1.0, size=ROT.shape)
    vals = 0.5 * (vals + vals[:, ::-1])  # even in v
    g = Field(ROT, vals, "G")
    out = step_diffusion(g, 0.01, P08, floor=1e-6)
    assert np.allclose(out.values, out.values[:, ::-1], rtol=0, atol=1e-14)


def test_diffusion_direct_scheme_consistent():
    # the plain centred-difference/upwind flux leaves an O(dv) residual on the
    # profile that shrinks under refinement; mass stays exact
    residuals = []
    for n in (48, 96):
        grid = rotation_frame_grid(suggest_grid(P08, n, n), P08)
        g = rot_profile_field(P08, P08.gamma_star, grid)
        out = step_diffusion(g, 0.02, P08, scheme="direct", floor=float(np.min(g.values)))
        assert mass(out) == pytest.approx(mass(g), rel=1e-13)
        residuals.append(l1_distance(out, g))
    assert residuals[1] < 0.6 * residuals[0]


def test_diffusion_substep_cap():
    g = rot_profile_field(P08, P08.gamma_star, ROT)
    with pytest.raises(CFLError):
        step_diffusion(g, 1.0, P08, floor=float(np.min(g.values)), max_substeps=2)


def test_diffusion_monotone_positivity():
    rng = np.random.default_rng(2)
    vals = rng.uniform(0.0, 1.0, size=ROT.shape)
    out = step_diffusion(Field(ROT, vals, "G"), 0.02, P08, floor=1e-6)
    assert np.all(out.values >= 0.0)


# ---------------------------------------------------------------------------
# rotation substep


def bump_field(grid, x0=1.0, v0=-0.5, width=1.2):
    def ev(t, x, v):
        return np.exp(-((np.asarray(x) - x0) ** 2 + (np.asarray(v) - v0) ** 2) / width**2)

    return Field(grid, grid.sample(ev), "G")


def test_transport_radial_invariance():
    g = rot_profile_field(P08, P08.gamma_star, ROT)
    out = step_transport(g, 1.0 / 64)
    # plain remap: fixed up to interpolation error, well below O(cell)
    assert l1_distance(out, g) < ROT.dv**2
    out_ref = step_transport(g, 1.0 / 64, reference=g.values)
    assert l1_distance(out_ref, g) == 0.0


def test_transport_mass_exact():
    rng = np.random.default_rng(3)
    g = Field(ROT, rng.uniform(0.0, 1.0, size=ROT.shape), "G")
    out = step_transport(g, 0.013)
    assert mass(out) == pytest.approx(mass(g), rel=1e-14)
    ref = rot_profile_field(P08, P08.gamma_star, ROT).values
    out2 = step_transport(g, 0.013, reference=ref)
    assert mass(out2) == pytest.approx(mass(g), rel=1e-13)


def test_transport_quarter_turns():
    grid = PhaseGrid(1, 64, 64, 8.0, 8.0)  # square cells for the pi/2 turn
    b = bump_field(grid, x0=2.0, v0=0.0)
    # one quarter turn forward moves the bump from (2, 0) to (0, -2)
    one = step_transport(b, math.pi / 4)
    target = Field(grid, grid.sample(
        lambda t, x, v: np.exp(-((np.asarray(x) - 0.0) ** 2 + (np.asarray(v) + 2.0) ** 2) / 1.2**2)
    ), "G")
    err1 = l1_distance(one, target)
    four = b
    for _ in range(4):
        four = step_transport(four, math.pi / 4)
    assert l1_distance(four, b) <= 4.5 * err1


def test_transport_max_principle_and_positivity():
    grid = PhaseGrid(1, 64, 64, 8.0, 8.0)
    b = bump_field(grid, x0=1.5, v0=1.0)
    out = step_transport(b, 0.05)
    assert out.values.min() >= 0.0
    assert out.values.max() <= b.values.max() + 1e-14
    assert out.values.min() <= b.values.min() + 1e-14


# ---------------------------------------------------------------------------
# full evolution


def test_evolve_stationarity_exact():
    ref = Field(GRID, reference_state(GRID, P08, "g")["gstar"].copy(), "g")
    traj = evolve(ref, base_config(), diagnostics=False)
    assert l1_distance(traj.snapshots[-1].field, ref) < 1e-12
    masses = [mass(s.field) for s in traj.snapshots]
    assert max(abs(mm - masses[0]) for mm in masses) < 1e-13


def test_evolve_mass_conservation_sandwiched():
    cfg = base_config()
    g0 = sandwiched_initial_datum(cfg, seed=0)
    assert mass(g0) == pytest.approx(1.0, abs=1e-12)
    traj = evolve(g0, cfg, diagnostics=False)
    masses = [mass(s.field) for s in traj.snapshots]
    assert max(abs(mm - masses[0]) for mm in masses) < 1e-12
    assert traj.provenance["clipped_mass"] < 1e-12


def test_evolve_entropy_decay():
    cfg = base_config(t_end=4.0, snapshot_dt=0.5)
    g0 = sandwiched_initial_datum(cfg, seed=5)
    traj = evolve(g0, cfg)
    ents = [s.report.entropy for s in traj.snapshots]
    tol = 1e-3 * ents[0]
    assert all(e2 <= e1 + tol for e1, e2 in zip(ents, ents[1:]))


def test_evolve_sandwich_preserved():
    # default solver: trapped up to the grid tolerance (remap error of the
    # profile deviation, far below a cell-size-squared budget)
    cfg = base_config(t_end=1.5)
    g0 = sandwiched_initial_datum(cfg, seed=7)
    lo, hi = sandwich_specs(P08, 0.5, 2.0)
    glo = sample_profile(lo, GRID).values
    ghi = sample_profile(hi, GRID).values
    assert np.all(g0.values >= glo - 1e-14) and np.all(g0.values <= ghi + 1e-14)
    traj = evolve(g0, cfg, diagnostics=False)
    eps_grid = GRID.dv**2
    for s in traj.snapshots:
        assert np.all(s.field.values >= glo - 1e-3 * eps_grid)
        assert np.all(s.field.values <= ghi + 1e-3 * eps_grid)


def test_evolve_sandwich_exact_with_plain_transport():
    # plain remap is monotone end to end, so trapping between the separately
    # evolved profile bounds holds exactly in exact arithmetic; the tolerance
    # covers float cancellation at far-tail corner cells, where the in/out
    # fluxes nearly cancel while each is large relative to the cell value
    cfg = base_config(t_end=0.8, transport_reference="none")
    g0 = sandwiched_initial_datum(cfg, seed=7)
    lo, hi = sandwich_specs(P08, 0.5, 2.0)
    tr_lo = evolve(sample_profile(lo, GRID), cfg, diagnostics=False)
    tr_hi = evolve(sample_profile(hi, GRID), cfg, diagnostics=False)
    tr = evolve(g0, cfg, diagnostics=False)
    for s, s_lo, s_hi in zip(tr.snapshots, tr_lo.snapshots, tr_hi.snapshots):
        assert np.all(s.field.values >= s_lo.field.values - 1e-10)
        assert np.all(s.field.values <= s_hi.field.values + 1e-10)


def test_evolve_convergence_to_equilibrium():
    cfg = base_config(t_end=8.0, snapshot_dt=1.0, n=32)
    g0 = sandwiched_initial_datum(cfg, seed=3)
    traj = evolve(g0, cfg)
    dists = [s.report.l1_to_gstar for s in traj.snapshots]
    assert dists[-1] < 0.25 * dists[0]
    # monotone after the initial transient
    tail = dists[len(dists) // 4:]
    assert all(d2 <= d1 + 1e-10 for d1, d2 in zip(tail, tail[1:]))


def test_contraction_series_nonincreasing():
    cfg = base_config(t_end=2.0, snapshot_dt=0.25)
    rng = np.random.default_rng(13)
    for _ in range(3):
        s1, s2 = int(rng.integers(1000)), int(rng.integers(1000))
        t1 = evolve(sandwiched_initial_datum(cfg, s1, unit_mass=False), cfg, diagnostics=False)
        t2 = evolve(sandwiched_initial_datum(cfg, s2, unit_mass=False), cfg, diagnostics=False)
        series = check_contraction(t1, t2)
        assert all(b <= a + 1e-14 for a, b in zip(series, series[1:]))


def test_comparison_preserved_on_nested_pairs():
    cfg = base_config(t_end=2.0, snapshot_dt=0.5)
    f1 = sandwiched_initial_datum(cfg, 21, unit_mass=False)
    mid = sample_profile(ProfileSpec(P08, gamma_for_mass(P08, 1.3), "g"), GRID)
    f2 = Field(GRID, np.maximum(f1.values, mid.values), "g")
    t1 = evolve(f1, cfg, diagnostics=False)
    t2 = evolve(f2, cfg, diagnostics=False)
    assert check_comparison(t1, t2, tol=1e-12).all()
    # identical data give an identically zero contraction series
    assert np.allclose(check_contraction(t1, t1), 0.0, atol=1e-300)


def test_splitting_first_order_in_n():
    g0 = sandwiched_initial_datum(base_config(), seed=4)
    t_end = 2.0 / SQRT_A  # integer number of intervals for every n below
    outs = {}
    for n in (8, 16, 32):
        cfg = base_config(n=n, t_end=t_end, snapshot_dt=t_end)
        outs[n] = evolve(g0, cfg, diagnostics=False).snapshots[-1].field
    d1 = l1_distance(outs[8], outs[16])
    d2 = l1_distance(outs[16], outs[32])
    assert d2 < 0.75 * d1


def test_strang_flavor_runs_and_conserves():
    cfg = base_config(flavor="strang", t_end=1.0, snapshot_dt=1.0)
    g0 = sandwiched_initial_datum(cfg, seed=9)
    traj = evolve(g0, cfg, diagnostics=False)
    assert mass(traj.snapshots[-1].field) == pytest.approx(mass(g0), abs=1e-12)


def test_production_time_integrability():
    cfg = base_config(t_end=6.0, snapshot_dt=0.5)
    g0 = sandwiched_initial_datum(cfg, seed=11)
    traj = evolve(g0, cfg)
    prods = [s.report.production for s in traj.snapshots]
    half = len(prods) // 2
    assert sum(prods[half:]) < sum(prods[:half])


def test_evolve_rejects_wrong_frame_or_grid():
    cfg = base_config()
    other = PhaseGrid(1, 32, 32, 4.0, 4.0)
    with pytest.raises(ValueError):
        evolve(Field(other, np.zeros(other.shape), "g"), cfg)


# ---------------------------------------------------------------------------
# conjugated evolution in the original variables


def test_evolve_f_tracks_spreading_solution():
    t0 = 1.0
    grid = suggest_grid(P08, 96, 96)
    cfg = SolverConfig(p=P08, grid=grid, n=32, t_end=1.0, snapshot_dt=1.0,
                       gamma_low=gamma_for_mass(P08, 0.25))
    traj = evolve_f(lambda t, x, v: fundamental_solution(t0 + t, x, v, P08), cfg,
                    diagnostics=True)
    s = traj.snapshots[-1]
    exact = grid.sample(lambda tt, x, v: fundamental_solution(t0 + s.t, x, v, P08))
    err = float(np.sum(np.abs(s.field.values - exact))) * grid.cell_volume
    assert err < 0.1
    # mass bookkeeping is exact in the rescaled frame
    masses = [snap.report.mass for snap in traj.snapshots]
    assert max(abs(mm - masses[0]) for mm in masses) < 1e-10


def test_evolve_f_error_shrinks_with_resolution():
    t0 = 1.0
    errs = []
    for n in (64, 128):
        grid = suggest_grid(P08, n, n)
        cfg = SolverConfig(p=P08, grid=grid, n=32, t_end=1.0, snapshot_dt=1.0,
                           gamma_low=gamma_for_mass(P08, 0.25))
        traj = evolve_f(lambda t, x, v: fundamental_solution(t0 + t, x, v, P08), cfg)
        s = traj.snapshots[-1]
        exact = grid.sample(lambda tt, x, v: fundamental_solution(t0 + s.t, x, v, P08))
        errs.append(float(np.sum(np.abs(s.field.values - exact))) * grid.cell_volume)
    assert errs[1] < 0.65 * errs[0]


# ---------------------------------------------------------------------------
# grids and dimensions


def test_suggested_grid_square_rotation_frame():
    rot = rotation_frame_grid(GRID, P08)
    assert rot.lx == pytest.approx(rot.lv, rel=1e-12)
    assert rot.dx == pytest.approx(rot.dv, rel=1e-12)


def test_suggest_grid_compact_support_margin():
    p = P12
    grid = suggest_grid(p, 32, 32)
    rot = rotation_frame_grid(grid, p)
    b = 0.5 * (1.0 + p.A) * math.sqrt(p.A)
    support = math.sqrt(abs(gamma_for_mass(p, 2.0)) / b)
    assert rot.lx == pytest.approx(1.5 * support, rel=1e-12)


def test_d2_evolution_smoke():
    p2 = model_params(2, 0.8)
    grid = PhaseGrid(2, 12, 12, 14.0, 9.0)
    spec = ProfileSpec(p2, p2.gamma_star, "g")
    g0 = sample_profile(spec, grid)
    cfg = SolverConfig(p=p2, grid=grid, n=8, t_end=0.5, snapshot_dt=0.5,
                       diffusivity_floor=1e-8)
    traj = evolve(g0, cfg, diagnostics=False)
    assert mass(traj.snapshots[-1].field) == pytest.approx(mass(g0), rel=1e-12)
    # the sampled stationary profile is an exact fixed point in d = 2 as well
    assert l1_distance(traj.snapshots[-1].field, g0) < 1e-12
