"""Command-line interface: subcommands, flat configuration, run manifests.

Every file-emitting subcommand writes its outputs plus a ``manifest.txt`` into
the directory given by ``--out``; the manifest lists the resolved
configuration, timestamps, the package version and a content hash per output
file, and is written even when the run fails (with the error recorded).
Exit codes: 0 on success, 2 on configuration/usage errors, 1 on runtime
failures.  Identical configuration and seed produce byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import configparser
import datetime
import hashlib
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import RangeError
from .fields import DIAGNOSTICS_HEADER, Field, PhaseGrid, sample_profile
from .params import ModelParams, gamma_for_mass, model_params
from .profiles import (
    ProfileSpec,
    barenblatt_half_mass_radius,
    barenblatt_phase_profile,
    fundamental_solution,
    half_mass_ellipse,
    pressure_star,
    profile,
)
from .solver import SolverConfig, evolve, sandwiched_initial_datum, suggest_grid

USAGE_ERROR, RUNTIME_ERROR = 2, 1


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Manifest:
    """Flat key=value record of one run, flushed even on failure."""

    def __init__(self, out_dir: Path, subcommand: str, config: dict):
        self.out_dir = out_dir
        self.subcommand = subcommand
        self.config = config
        self.started = datetime.datetime.now(datetime.timezone.utc)
        self.error: str | None = None

    def write(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        finished = datetime.datetime.now(datetime.timezone.utc)
        lines = ["[run]",
                 f"subcommand={self.subcommand}",
                 f"version={__version__}",
                 f"started={self.started.isoformat()}",
                 f"finished={finished.isoformat()}",
                 f"status={'error' if self.error else 'ok'}"]
        if self.error:
            lines.append(f"error={self.error}")
        lines.append("[config]")
        for key in sorted(self.config):
            lines.append(f"{key}={self.config[key]}")
        lines.append("[outputs]")
        for path in sorted(self.out_dir.iterdir()):
            if path.name == "manifest.txt" or path.is_dir():
                continue
            lines.append(f"{path.name}=sha256:{_sha256(path)}")
        (self.out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"configuration file {path} not found")
    flat = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            flat[key] = val
    return flat


def _resolve(args: argparse.Namespace, config: dict, key: str, cast, default):
    """Precedence: command line > config file > default."""
    cli_val = getattr(args, key.replace("-", "_"), None)
    if cli_val is not None:
        return cli_val
    if key in config:
        raw = config[key]
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _pair(text: str) -> tuple[int, int]:
    a, b = text.split(",")
    return int(a), int(b)


def _fpair(text: str) -> tuple[float, float]:
    a, b = text.split(",")
    return float(a), float(b)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",")]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",")]


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _build_params(args, config) -> ModelParams:
    d = _resolve(args, config, "d", int, 1)
    m = _resolve(args, config, "m", float, 0.8)
    strict = _resolve(args, config, "strict", bool, True)
    return model_params(d, m, strict=strict)


def _grid_for(args, config, p: ModelParams) -> PhaseGrid:
    nx, nv = _resolve(args, config, "grid", _pair, (128, 128))
    extent = _resolve(args, config, "extent", _fpair, None)
    if extent is None:
        return suggest_grid(p, nx, nv)
    return PhaseGrid(p.d, nx, nv, extent[0], extent[1])


# ---------------------------------------------------------------------------
# subcommands


def _cmd_params(args, config, out_dir: Path | None) -> int:
    p = _build_params(args, config)
    lines = [
        f"d={p.d}", f"m={_fmt(p.m)}", f"A={_fmt(p.A)}",
        f"m1={_fmt(p.m1)}", f"m2={_fmt(p.m2)}", f"m3={_fmt(p.m3)}",
        f"m_tilde1={_fmt(p.m_tilde1)}", f"m_c={_fmt(p.m_c)}",
        f"zeta={_fmt(p.zeta)}", f"k={_fmt(p.k)}",
        f"gamma_star={_fmt(p.gamma_star)}", f"z_m={_fmt(p.z_m)}",
        f"strict_theorem_range={p.strict_theorem_range}",
    ]
    text = "\n".join(lines)
    print(text)
    if out_dir is not None:
        (out_dir / "params.txt").write_text(text + "\n")
    return 0


def _cmd_profile(args, config, out_dir: Path) -> int:
    p = _build_params(args, config)
    name = _resolve(args, config, "name", str, "gstar")
    t = _resolve(args, config, "t", float, 1.0)
    gamma = _resolve(args, config, "gamma", float, p.gamma_star)
    grid = _grid_for(args, config, p)
    if name == "fstar":
        values = grid.sample(lambda tt, x, v: fundamental_solution(t, x, v, p))
    elif name == "pressure":
        values = grid.sample(lambda tt, x, v: pressure_star(t, x, v, p))
    elif name in ("gstar", "g", "G"):
        spec = ProfileSpec(p, p.gamma_star if name == "gstar" else gamma,
                           "G" if name == "G" else "g")
        values = grid.sample(lambda tt, x, v: profile(spec, x, v))
    else:
        raise RangeError(f"unknown profile name {name!r}")
    rows = []
    for i, xx in enumerate(grid.x_centers):
        for j, vv in enumerate(grid.v_centers):
            rows.append(f"{_fmt(t)},{_fmt(xx)},{_fmt(vv)},{_fmt(values[i, j])}")
    _write_csv(out_dir / f"profile_{name}.csv", "t,x,v,value", rows)
    return 0


def _cmd_fig1(args, config, out_dir: Path) -> int:
    m_values = _resolve(args, config, "m-values", _floats, [0.7, 1.7])
    times = _resolve(args, config, "times", _floats,
                     [0.1 + 0.5 * j for j in range(13)])
    n_points = _resolve(args, config, "points", int, 200)
    ell_rows, bar_rows = [], []
    for m in m_values:
        p = model_params(1, m, strict=False)
        for t in times:
            ell = half_mass_ellipse(t, p)
            for xx, vv in ell.points(n_points):
                ell_rows.append(f"{_fmt(m)},{_fmt(t)},{_fmt(xx)},{_fmt(vv)}")
        r_half = barenblatt_half_mass_radius(p)
        r_top = 1.0 if m > 1 else 3.0
        for r in np.linspace(0.0, r_top, 400):
            bar_rows.append(
                f"{_fmt(m)},{_fmt(r)},{_fmt(barenblatt_phase_profile(r, p))},{_fmt(r_half)}"
            )
    _write_csv(out_dir / "ellipses.csv", "m,t,x,v", ell_rows)
    _write_csv(out_dir / "barenblatt.csv", "m,r,value,r_half", bar_rows)
    return 0


def _solver_config(args, config, p: ModelParams) -> SolverConfig:
    grid = _grid_for(args, config, p)
    return SolverConfig(
        p=p,
        grid=grid,
        n=_resolve(args, config, "n", int, 64),
        t_end=_resolve(args, config, "t", float, 10.0),
        snapshot_dt=_resolve(args, config, "snapshot-dt", float, 0.5),
        flavor=_resolve(args, config, "flavor", str, "lie"),
        scheme=_resolve(args, config, "scheme", str, "gradient"),
        gamma_low=gamma_for_mass(p, 0.25),
    )


def _initial_datum(args, config, cfg: SolverConfig) -> Field:
    datum = _resolve(args, config, "datum", str, "sandwich")
    seed = _resolve(args, config, "seed", int, 0)
    if datum == "gstar":
        return sample_profile(ProfileSpec(cfg.p, cfg.p.gamma_star, "g"), cfg.grid)
    if datum == "sandwich":
        return sandwiched_initial_datum(cfg, seed)
    if datum.startswith("gamma:"):
        return sample_profile(ProfileSpec(cfg.p, float(datum[6:]), "g"), cfg.grid)
    raise RangeError(f"unknown initial datum {datum!r}")


def _cmd_evolve(args, config, out_dir: Path) -> int:
    p = _build_params(args, config)
    cfg = _solver_config(args, config, p)
    g0 = _initial_datum(args, config, cfg)
    traj = evolve(g0, cfg)
    rows = [s.report.csv_row() for s in traj.snapshots]
    _write_csv(out_dir / "diagnostics.csv", DIAGNOSTICS_HEADER, rows)
    if _resolve(args, config, "save-fields", bool, False):
        for idx, s in enumerate(traj.snapshots):
            s.field.save_binary(out_dir / f"field_{idx:04d}.bin")
    (out_dir / "provenance.txt").write_text(
        "\n".join(
            f"{k}={traj.provenance[k]}"
            for k in ("intervals", "diffusion_substeps", "clipped_mass", "cfl_floor")
        )
        + "\n"
    )
    return 0


def _cmd_converge(args, config, out_dir: Path) -> int:
    from .experiments import CONVERGE_HEADER, converge_experiment, density_decay_exponent

    p = _build_params(args, config)
    cfg = _solver_config(args, config, p)
    seeds = _resolve(args, config, "seeds", _ints, [0, 1, 2])
    summary = ["seed,entropy_log_slope,rate_reference,density_decay_exponent,"
               "l1_initial,l1_final"]
    for seed in seeds:
        rep = converge_experiment(cfg, seed)
        _write_csv(out_dir / f"converge_seed{seed}.csv", CONVERGE_HEADER,
                   rep.csv_rows())
        summary.append(
            f"{seed},{_fmt(rep.entropy_log_slope)},{_fmt(rep.rate_reference)},"
            f"{_fmt(density_decay_exponent(p))},{_fmt(rep.l1[0])},{_fmt(rep.l1[-1])}"
        )
    _write_csv(out_dir / "summary.csv", summary[0], summary[1:])
    return 0


def _cmd_spectrum(args, config, out_dir: Path) -> int:
    from .spectrum import Domain, assemble, eigensolve

    p = _build_params(args, config)
    kind = _resolve(args, config, "domain", str, "rectangle")
    extent = _resolve(args, config, "extent", _fpair, None)
    if extent is None:
        domain = (Domain.reference_rectangle() if kind == "rectangle"
                  else Domain.reference_ellipse())
    else:
        domain = Domain(kind, extent[0], extent[1])
    nx, nv = _resolve(args, config, "grid", _pair, (120, 180))
    count = _resolve(args, config, "count", int, 40)
    backend = _resolve(args, config, "backend", str, None)
    asm = assemble(p, domain, nx, nv)
    res = eigensolve(asm, count=count, backend=backend)
    rows = [f"{_fmt(lam.real)},{_fmt(lam.imag)},{_fmt(r)}"
            for lam, r in zip(res.eigenvalues, res.residuals)]
    _write_csv(out_dir / "spectrum.csv", "re,im,residual", rows)
    top = res.largest_nonzero_real()
    summary = [
        f"domain={kind}", f"grid={nx}x{nv}", f"backend={res.backend}",
        f"largest_nonzero_real={_fmt(top)}",
        f"nearest_zero_modulus={_fmt(abs(res.nearest_to_zero()))}",
        f"reference_minus_A={_fmt(-p.A)}",
        f"reference_minus_1mA={_fmt(-(1.0 - p.A))}",
        "reference_minus_1=-1.0",
    ]
    for lam, resid in res.analytic_residuals.items():
        summary.append(f"analytic_residual[{_fmt(lam)}]={_fmt(resid)}")
    (out_dir / "summary.txt").write_text("\n".join(summary) + "\n")
    print("\n".join(summary))
    return 0


def _cmd_difflimit(args, config, out_dir: Path) -> int:
    from .difflimit import diffusion_limit_experiment, macro_params

    p = _build_params(args, config)
    eps_list = _resolve(args, config, "eps-list", _floats, [0.4, 0.2, 0.1])
    nx, nv = _resolve(args, config, "grid", _pair, (128, 96))
    extent = _resolve(args, config, "extent", _fpair, (12.0, 9.0))
    grid = PhaseGrid(1, nx, nv, extent[0], extent[1])
    mp = macro_params(p)
    results = diffusion_limit_experiment(eps_list, p, grid)
    rows = []
    for r in results:
        for tau, err, gap in zip(r.taus, r.errors, r.local_eq_gap):
            rows.append(f"{_fmt(r.eps)},{_fmt(tau)},{_fmt(err)},{_fmt(gap)}")
    _write_csv(out_dir / "difflimit.csv", "eps,tau,error,local_eq_gap", rows)
    (out_dir / "constants.txt").write_text(
        "\n".join(
            f"{k}={_fmt(getattr(mp, k))}"
            for k in ("alpha", "eta", "k", "beta", "c_star", "mu1", "nu1")
        )
        + "\n"
    )
    return 0


COMMANDS = {
    "params": (_cmd_params, False),
    "profile": (_cmd_profile, True),
    "fig1": (_cmd_fig1, True),
    "evolve": (_cmd_evolve, True),
    "converge": (_cmd_converge, True),
    "spectrum": (_cmd_spectrum, True),
    "difflimit": (_cmd_difflimit, True),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinfp",
        description="Self-similar solutions, splitting solver and spectral "
                    "tools for the kinetic equation df/dt + v.grad_x f = Lap_v f^m",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp, needs_out: bool):
        sp.add_argument("--d", type=int, default=None)
        sp.add_argument("--m", type=float, default=None)
        sp.add_argument("--strict", dest="strict", action="store_true", default=None)
        sp.add_argument("--no-strict", dest="strict", action="store_false")
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--out", type=str, default=None, required=needs_out)
        sp.add_argument("--seed", type=int, default=None)

    common(sub.add_parser("params", help="print every model constant"), False)

    sp = sub.add_parser("profile", help="sample a closed-form state to CSV")
    common(sp, True)
    sp.add_argument("--name", type=str, default=None,
                    choices=["fstar", "gstar", "g", "G", "pressure"])
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--grid", type=_pair, default=None)
    sp.add_argument("--extent", type=_fpair, default=None)

    sp = sub.add_parser("fig1", help="half-mass ellipse sequences and radial profiles")
    common(sp, True)
    sp.add_argument("--m-values", dest="m_values", type=_floats, default=None)
    sp.add_argument("--times", type=_floats, default=None)
    sp.add_argument("--points", type=int, default=None)

    for name, helptext in (("evolve", "run the splitting solver"),
                           ("converge", "long-time convergence experiment")):
        sp = sub.add_parser(name, help=helptext)
        common(sp, True)
        sp.add_argument("--grid", type=_pair, default=None)
        sp.add_argument("--extent", type=_fpair, default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--T", dest="t", type=float, default=None)
        sp.add_argument("--snapshot-dt", dest="snapshot_dt", type=float, default=None)
        sp.add_argument("--flavor", type=str, default=None, choices=["lie", "strang"])
        sp.add_argument("--scheme", type=str, default=None, choices=["gradient", "direct"])
        if name == "evolve":
            sp.add_argument("--datum", type=str, default=None)
            sp.add_argument("--save-fields", dest="save_fields",
                            action="store_true", default=None)
        else:
            sp.add_argument("--seeds", type=_ints, default=None)

    sp = sub.add_parser("spectrum", help="spectrum of the linearized operator")
    common(sp, True)
    sp.add_argument("--domain", type=str, default=None, choices=["rectangle", "ellipse"])
    sp.add_argument("--grid", type=_pair, default=None)
    sp.add_argument("--extent", type=_fpair, default=None)
    sp.add_argument("--count", type=int, default=None)
    sp.add_argument("--backend", type=str, default=None, choices=["dense", "arnoldi"])

    sp = sub.add_parser("difflimit", help="overdamped-limit eps sweep")
    common(sp, True)
    sp.add_argument("--eps-list", dest="eps_list", type=_floats, default=None)
    sp.add_argument("--grid", type=_pair, default=None)
    sp.add_argument("--extent", type=_fpair, default=None)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        config = _load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    handler, needs_out = COMMANDS[args.subcommand]
    out_dir = Path(args.out) if args.out else None
    manifest = None
    if out_dir is not None:
        resolved = dict(config)
        for key, val in vars(args).items():
            if key not in ("config", "out", "subcommand") and val is not None:
                resolved[key] = val
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = Manifest(out_dir, args.subcommand, resolved)
    try:
        code = handler(args, config, out_dir)
    except (RangeError, ValueError, FileNotFoundError) as exc:
        if manifest is not None:
            manifest.error = f"{type(exc).__name__}: {exc}"
            manifest.write()
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # runtime failure: manifest still records it
        if manifest is not None:
            manifest.error = f"{type(exc).__name__}: {exc}"
            manifest.write()
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    if manifest is not None:
        manifest.write()
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
