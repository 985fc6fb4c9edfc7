"""Command-line entry point: ``sbmech run | validate | list-experiments``.

Exit status is 0 on success, 1 for configuration errors and 2 when a
solver fails to converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from .config import EXPERIMENTS, load_config
from .exceptions import ConfigurationError, SolverError
from .io import RunLog, write_csv, write_vtk

log = logging.getLogger("sbmech")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2

DESCRIPTIONS = {
    "plate_hole": "diffuse circular hole under uniaxial load, stress error against the Kirsch field",
    "jacobi_demo": "1-D Jacobi sweeps with node-stored versus cell-stored order parameter",
    "void_plasticity": "cyclic tension-compression of a J2 plate with an elliptical void",
    "fracture_mode_i": "edge-notched square pulled in mode I with a hybrid phase-field crack",
    "fracture_l_shape": "L-shaped panel with crack nucleation at the re-entrant corner",
    "topopt_cantilever": "volume-constrained Allen-Cahn topology optimization of a cantilever",
}


class _Writer:
    """Collects run outputs inside one directory."""

    def __init__(self, root: Path, vtk: bool):
        self.root = root
        self.vtk = vtk
        root.mkdir(parents=True, exist_ok=True)

    def table(self, name, runlog: RunLog):
        runlog.write_csv(self.root / f"{name}.csv")

    def fields(self, name, grid, point_data=None, cell_data=None):
        if self.vtk:
            write_vtk(self.root / f"{name}.vtk", grid, point_data, cell_data, title=name)


def _tag(v):
    return f"{v:g}".replace(".", "p").replace("-", "m")


def _run_plate_hole(cfg, out: _Writer, snapshot_every):
    from .experiments import run_plate_hole

    g, d, m = cfg["grid"], cfg["driver"], cfg["material"]

    def snap(eps, grid, u, op, phi):
        out.fields(f"field_eps_{_tag(eps)}", grid, {"u": u}, {"phi": phi, "sigma": op.cell_stress(u)})

    res = run_plate_hole(
        d["eps_list"], g["ncells"], g["half_width"], cfg["geometry"]["radius"], m["E"], m["nu"],
        d["sigma_inf"], d["load"], cfg.solver_settings(), d["phi_min"], snap,
    )
    out.table("errors", res.table)
    out.table("solver_residuals", res.solver_log)
    for eps, pr in res.probes.items():
        s = pr["sigma"]
        rows = zip(pr["x"], s[:, 0, 0], s[:, 1, 1], s[:, 0, 1], pr["selected"])
        write_csv(out.root / f"probe_eps_{_tag(eps)}.csv", ["x", "sxx", "syy", "sxy", "selected"], rows)
    return res.converged, {}


def _run_jacobi(cfg, out, snapshot_every):
    from .experiments import run_jacobi_instability_demo

    g, d = cfg["grid"], cfg["driver"]
    res = run_jacobi_instability_demo(
        g["ncells"], d["interface"], d["body_force"], d["modulus"], d["node_sweeps"], d["cell_sweeps"],
        "uniform" if d["phi"] == "uniform" else None,
    )
    out.table("history", res.log)
    summary = {
        "static_max": res.static_max,
        "node_diverged": res.node_diverged,
        "cell_bounded": res.cell_bounded,
        "first_bad_sweep": res.first_bad_sweep,
    }
    return True, summary


def _run_void(cfg, out, snapshot_every):
    from .experiments import VOID_RADII, cyclic_path, hysteresis_metrics, run_void_plasticity

    g, geo, m, d = cfg["grid"], cfg["geometry"], cfg["material"], cfg["driver"]
    ok = True
    summary = {}
    for name in geo["voids"]:

        def snap(k, grid, u, phi, state, name=name):
            out.fields(
                f"{name}_step_{k:04d}", grid, {"u": u},
                {"phi": phi, "alpha": state.alpha, "eps_p": state.eps_p},
            )

        res = run_void_plasticity(
            VOID_RADII[name], g["ncells"], g["half_width"], geo["eps"], m["E"], m["nu"], m["sigma_y"], m["H"],
            m["theta"], cyclic_path(d["step"], d["peak"]), cfg.solver_settings(), d["inner_tol"], d["max_inner"],
            snap, snapshot_every,
        )
        out.table(f"hysteresis_{name}", res.log)
        out.fields(f"{name}_final", _grid_of(g), {"u": res.u}, {"phi": res.phi, "alpha": res.state.alpha})
        summary[name] = hysteresis_metrics(res.log)
        ok &= res.converged
    return ok, summary


def _grid_of(g):
    from .mesh import Grid

    h = g["half_width"]
    return Grid((-h, -h), (h, h), (g["ncells"], g["ncells"]))


def _fracture_params(cfg):
    from .fracture import FractureParams

    flat = {}
    for sec in ("grid", "material", "crack", "driver"):
        flat.update(cfg[sec])
    return FractureParams(**flat)


def _run_fracture(cfg, out, snapshot_every, driver):
    def snap(k, grid, u, coef, state):
        out.fields(f"step_{k:04d}", grid, {"u": u}, {"c": state.c, "H": state.H, "weight": coef})

    run, state, u = driver(_fracture_params(cfg), cfg.solver_settings(), snap, snapshot_every)
    out.table("history", run)
    out.fields("final", _grid_of(cfg["grid"]), {"u": u}, {"c": state.c, "H": state.H})
    return run.meta["converged"], {"final_crack_tip_x": float(run.column("crack_tip_x")[-1])}


def _run_mode_i(cfg, out, snapshot_every):
    from .fracture import run_mode_i

    return _run_fracture(cfg, out, snapshot_every, run_mode_i)


def _run_l_shape(cfg, out, snapshot_every):
    from .fracture import run_l_shape

    return _run_fracture(cfg, out, snapshot_every, run_l_shape)


def _run_topopt(cfg, out, snapshot_every):
    from .mesh import Grid
    from .topopt import CantileverParams, run_cantilever

    g, m, ds, d = cfg["grid"], cfg["material"], cfg["design"], cfg["driver"]
    p = CantileverParams(
        g["length"], g["height"], (g["nx"], g["ny"]), m["E"], m["nu"], ds["alpha"], ds["beta"], ds["zeta"],
        ds["lam_max"], ds["fill"], d["load"], d["load_height"], ds["mobility"], d["dt"], d["t_end"],
        ds["ramp_fraction"],
    )

    def snap(k, grid, u, op, state):
        out.fields(f"step_{k:05d}", grid, {"u": u}, {"eta": state.eta})

    run, state, u = run_cantilever(p, cfg.solver_settings(), snap, snapshot_every)
    out.table("history", run)
    grid = Grid((0.0, 0.0), (p.length, p.height), p.ncells)
    out.fields("final", grid, {"u": u}, {"eta": state.eta})
    return run.meta["converged"], {"components": int(run.meta["components"]), "linked": bool(run.meta["linked"])}


RUNNERS = {
    "plate_hole": _run_plate_hole,
    "jacobi_demo": _run_jacobi,
    "void_plasticity": _run_void,
    "fracture_mode_i": _run_mode_i,
    "fracture_l_shape": _run_l_shape,
    "topopt_cantilever": _run_topopt,
}


def _thread_limit(n):
    if n is None:
        from contextlib import nullcontext

        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    every = args.snapshot_every if args.snapshot_every is not None else cfg["output"]["snapshot_every"]
    root = Path(args.output_dir) if args.output_dir else Path("runs") / cfg.name
    out = _Writer(root, cfg["output"]["vtk"])
    shutil.copyfile(args.config, root / "config.ini")
    with _thread_limit(args.threads):
        try:
            ok, summary = RUNNERS[cfg.name](cfg, out, every)
        except SolverError as exc:
            log.error("%s", exc)
            ok, summary = False, {"error": str(exc)}
    summary = {"experiment": cfg.name, "converged": bool(ok), **summary}
    (root / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{cfg.name}: {'ok' if ok else 'NOT CONVERGED'} -> {root}")
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"{args.config}: valid '{cfg.name}' configuration")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in EXPERIMENTS:
        print(f"{name:<20} {DESCRIPTIONS[name]}")
    return EXIT_OK


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="sbmech", description="Diffuse-boundary solid mechanics experiments.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--output-dir", help="run directory (default runs/<experiment>)")
    run.add_argument("--threads", type=_positive_int, help="cap BLAS/OpenMP thread pools")
    run.add_argument("--snapshot-every", type=_nonneg_int, help="write VTK fields every N steps (0 = off)")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list-experiments", help="print the available experiment names")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; report them as configuration errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
