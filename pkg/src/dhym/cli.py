"""Batch front-end: ``solve <config>``, ``verify <config>``, ``report <dir>``.

Exit codes: 0 success, 1 nonconvergence or a violated assertion, 2 usage or
config error. ``DHYM_NUM_THREADS`` sets the FFT worker count.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import io
from . import torus_solver as ts
from .cone_core import PhaseSpec
from .suites import SUITES, run_suites

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# solve


def _output_dir(cfg, config_path, default):
    out = Path(cfg.get("output", default))
    return out if out.is_absolute() else Path(config_path).parent / out


def _parse_modes(text):
    """``A,k1,k2,phase; ...`` into a list of 4-tuples."""
    modes = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        vals = io.parse_numbers(chunk)
        if vals.size not in (3, 4):
            raise io.ConfigError(f"mode {chunk!r}: expected A,k1,k2[,phase]")
        modes.append(tuple(vals) + (0.0,) * (4 - vals.size))
    if not modes:
        raise io.ConfigError("empty mode list")
    return modes


def _mode_sum(modes, active, size):
    def func(*axes):
        u = axes[0]
        v = axes[1] if len(axes) > 1 else 0.0
        return sum(A * np.cos(k1 * u + k2 * v + ph) for A, k1, k2, ph in modes)

    return ts.PeriodicField.from_function(func, active, size)


def build_twist(spec, bg, active, size, base_dir):
    """Twist field and the manufactured solution (or None) from a twist spec."""
    kind, _, arg = spec.partition(":")
    kind = kind.strip()
    background = bg.p_ratio_background()
    if kind == "const":
        value = float(arg) if arg.strip() else background
        shape = (size,) * len(active)
        return ts.PeriodicField(np.full(shape, value), active), None
    if kind == "modes":
        return _mode_sum(_parse_modes(arg), active, size) + background, None
    if kind == "manufactured":
        phi_star = _mode_sum(_parse_modes(arg), active, size)
        phi_star = phi_star - phi_star.mean()
        return ts.manufactured_twist(phi_star, bg), phi_star
    if kind == "csv":
        path = Path(arg.strip())
        return io.read_field(path if path.is_absolute() else base_dir / path), None
    raise io.ConfigError(f"unknown twist spec {spec!r}; use const:, modes:, manufactured: or csv:")


SOLVER_KEYS = {f.name: f.type for f in dataclasses.fields(ts.SolverConfig)}


def solver_config(cfg):
    overrides = {}
    for key, value in cfg.items():
        if key in SOLVER_KEYS:
            cast = int if SOLVER_KEYS[key] in (int, "int") else float
            overrides[key] = cast(value)
    return ts.SolverConfig(**overrides)


def load_problem(cfg):
    try:
        n = int(cfg["n"])
        theta = float(cfg["theta"])
        H0 = io.parse_matrix(cfg["H0"], n)
    except KeyError as exc:
        raise io.ConfigError(f"missing required key {exc.args[0]!r}") from None
    Theta = float(cfg["Theta"]) if "Theta" in cfg else None
    chi0 = io.parse_matrix(cfg["chi0"], n) if "chi0" in cfg else np.eye(n)
    active = tuple(c.strip() for c in cfg.get("active", "x1,y1").split(",") if c.strip())
    grids = [int(g) for g in io.parse_numbers(cfg.get("grids", cfg.get("grid", "32")))]
    if Theta is not None and not theta < Theta < np.pi:
        raise io.ConfigError("need theta < Theta < pi")
    spec = PhaseSpec(theta, Theta) if Theta is not None else PhaseSpec(theta)
    bg = ts.FlatBackground(n, chi0, H0, spec)
    return bg, Theta, active, grids


def cmd_solve(config_path):
    cfg = io.read_config(config_path)
    bg, Theta, active, grids = load_problem(cfg)
    config = solver_config(cfg)
    out = _output_dir(cfg, config_path, Path(config_path).stem + "_out")
    base = Path(config_path).parent
    twist_spec = cfg.get("twist", "const")
    problems = []
    for size in grids:
        f, phi_star = build_twist(twist_spec, bg, active, size, base)
        try:
            ts.check_twist(f, bg)
        except ValueError as exc:
            raise UsageError(f"twist rejected before solving: {exc}") from None
        problems.append((size, f, phi_star))

    errors, report = [], None
    for size, f, phi_star in problems:
        try:
            report = ts.continuity_run(f, bg, config, Theta)
        except ts.NonConvergence as exc:
            io.write_path_log(out / "path_log.csv", exc.path)
            (out / "diagnostics.txt").write_text(f"grid = {size}\nerror = {exc}\nsteps = {len(exc.path)}\n")
            print(f"nonconvergence on grid {size}: {exc}", file=sys.stderr)
            return EXIT_FAIL
        if phi_star is not None:
            err = float(np.max(np.abs(report.phi.values - phi_star.values)))
            errors.append((f.shape[0], err, report.final_residual, len(report.path)))

    io.write_path_log(out / "path_log.csv", report.path)
    io.write_field(out / "phi.csv", report.phi, "phi")
    io.write_field(out / "phase.csv", report.phase_field, "phase")
    if errors:
        io.write_csv(out / "errors.csv", ("grid", "sup_error", "final_residual", "path_states"), errors)
        print("grid  sup_error     residual")
        for g, e, r, _ in errors:
            print(f"{g:4d}  {e:.3e}     {r:.3e}")
    ok = report.final_residual <= config.tol
    phase_ok = None
    if Theta is not None:
        phase_ok = ts.phase_interval_check(report.phi, f, bg, Theta)
        ok = ok and phase_ok
    summary = {
        "final_residual": report.final_residual, "path_states": len(report.path),
        "min_cone_margin": min(p.cone_margin for p in report.path),
        "phase_max": float(report.phase_field.values.max()), "phase_check": phase_ok, "success": ok,
    }
    (out / "summary.txt").write_text("".join(f"{k} = {v}\n" for k, v in summary.items()))
    print(f"final residual {report.final_residual:.3e}; wrote {out}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# verify


def cmd_verify(config_path, suites=None, inject_bug=False):
    cfg = io.read_config(config_path)
    seed = int(cfg.get("seed", "0"))
    scale = float(cfg.get("scale", "1"))
    names = suites or [s.strip() for s in cfg.get("suites", ",".join(SUITES)).split(",") if s.strip()]
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s): {', '.join(unknown)}; known: {', '.join(SUITES)}")
    reports = run_suites(names, seed, scale, inject_bug=inject_bug)
    out = _output_dir(cfg, config_path, Path(config_path).stem + "_out")
    io.write_reports(out / "suites.csv", reports)
    sweep = [(r.details["theta"], r.worst_margin) for r in reports if "theta" in r.details]
    if sweep:
        io.write_csv(out / "discpos_sweep.csv", ("theta", "inf_g"), sorted(sweep))
    failed = [r for r in reports if not r.passed]
    for r in reports:
        status = "ok" if r.passed else "FAIL"
        tag = "" if r.asserted else " (reported)"
        print(f"{status:4s} {r.name:40s} trials={r.trials:<8d} violations={r.violations:<6d} "
              f"worst={r.worst_margin:.3e}{tag}")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(directory):
    root = Path(directory)
    if not root.is_dir():
        raise UsageError(f"not a directory: {root}")
    written = []
    for log in sorted(root.rglob("path_log.csv")):
        cols = io.read_csv(log)
        t, res = cols["t"], cols["residual"]
        io.write_two_column(log.parent / "residual_vs_t.dat", t, res, "t residual")
        io.write_two_column(log.parent / "residual_envelope_vs_t.dat", t, np.maximum.accumulate(res),
                            "t running max residual")
        io.write_two_column(log.parent / "margin_vs_t.dat", t, cols["cone_margin"], "t cone_margin")
        written += ["residual_vs_t.dat", "residual_envelope_vs_t.dat", "margin_vs_t.dat"]
    for sweep in sorted(root.rglob("discpos_sweep.csv")):
        cols = io.read_csv(sweep)
        io.write_two_column(sweep.parent / "infg_vs_theta.dat", cols["theta"], cols["inf_g"], "theta inf_g")
        written.append("infg_vs_theta.dat")
    for table in sorted(root.rglob("errors.csv")):
        cols = io.read_csv(table)
        io.write_two_column(table.parent / "error_vs_grid.dat", cols["grid"], cols["sup_error"], "grid sup_error")
        written.append("error_vs_grid.dat")
    if not written:
        raise UsageError(f"no run artifacts under {root}")
    print(f"wrote {len(written)} data files under {root}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="dhym", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="run the continuity solver from a config file")
    p.add_argument("config")
    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("config")
    p.add_argument("--suite", action="append", dest="suites", metavar="NAME",
                   help=f"suite to run (repeatable); one of: {', '.join(SUITES)}")
    p.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)
    p = sub.add_parser("report", help="turn run artifacts into two-column plot data")
    p.add_argument("dir")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args.config)
        if args.command == "verify":
            return cmd_verify(args.config, args.suites, args.inject_bug)
        return cmd_report(args.dir)
    except (UsageError, io.ConfigError, ValueError) as exc:
        print(f"dhym: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
