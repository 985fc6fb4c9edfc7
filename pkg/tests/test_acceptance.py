"""Acceptance suite: one verdict line per criterion.

Each test records ``CRITERION n: PASS|FAIL - detail`` through the
``verdict`` fixture (printed again in the terminal summary) and then
asserts the verdict.  The long-running experiments are shared between
criteria through module-scoped fixtures.
"""

import time

import numpy as np
import pytest

from sbmech.cli import main
from sbmech.experiments import (
    VOID_RADII,
    hysteresis_metrics,
    run_jacobi_instability_demo,
    run_plate_hole,
    run_void_plasticity,
)
from sbmech.fracture import FractureParams, run_l_shape, run_mode_i
from sbmech.material import CubicModel, IsotropicModel, J2Model, J2State, dev, j2_radial_return
from sbmech.mesh import Grid
from sbmech.multigrid import MultigridHierarchy, SolverSettings, vcycle_solve
from sbmech.oracles import j2_consistency_oracle
from sbmech.sbm import (
    Complement,
    Ellipsoid,
    SbmOperator,
    assemble_rhs,
    build_order_parameter,
    face_mask,
    l_corner,
)
from sbmech.topopt import CantileverParams, run_cantilever

pytestmark = pytest.mark.acceptance

# L-shape parameters: the fracture energy is rescaled so that the tensile
# energy concentrated at the re-entrant corner can reach the damage
# threshold Gc / (2 xi) within a desk-scale run (see the README).
L_SHAPE = FractureParams(xi=1.0e-5, Gc=2.0 * 1.0e-5 * 4.8e5, M=0.1, seed=0.01, ncells=128, nsteps=105)
L_SHAPE_SOLVER = SolverSettings(tol_rel=1e-6, max_iter=4000)


def _contraction(history, first=5, last=20):
    h = np.asarray(history, dtype=float)
    last = min(last, len(h) - 1)
    if last <= first:
        return float("nan")
    return float((h[last] / h[first]) ** (1.0 / (last - first)))


@pytest.fixture(scope="module")
def plate():
    t0 = time.perf_counter()
    res = run_plate_hole(ncells=512, load="kirsch")
    return res, time.perf_counter() - t0


# ---------------------------------------------------------------------------


def test_criterion_1_plate_hole_convergence(plate, verdict):
    res, seconds = plate
    tab = res.table
    eps = list(tab.column("eps"))
    idx = [eps.index(e) for e in (1.0, 0.5, 0.1)]
    errs = np.stack([tab.column(k)[idx] for k in ("err_xx", "err_yy", "err_xy")])
    monotone = bool(np.all(np.diff(errs, axis=1) < 0))
    crown = float(tab.column("crown_stt")[eps.index(0.05)])
    crown_ok = abs(crown - 3.0) <= 0.15 * 3.0
    ok = res.converged and monotone and crown_ok and seconds < 300
    detail = (
        "errors at eps=1,0.5,0.1: "
        + ", ".join(f"{c} {np.round(e, 4).tolist()}" for c, e in zip(("xx", "yy", "xy"), errs))
        + f"; crown s_tt={crown:.3f} (target 3 +/- 0.45); runtime {seconds:.0f}s"
    )
    assert verdict(1, ok, detail)


def test_criterion_2_jacobi_placement(verdict):
    r = run_jacobi_instability_demo(node_sweeps=100, cell_sweeps=10_000)
    ok = r.node_diverged and r.cell_bounded
    detail = f"node variant bad at sweep {r.first_bad_sweep}; cell variant bounded over 10^4 sweeps: {r.cell_bounded}"
    assert verdict(2, ok, detail)


def _half_void_problem(n=64, h=16.0):
    grid = Grid((-h, -h), (h, h), (n, n))
    radius = np.sqrt(0.5 * (2 * h) ** 2 / np.pi)
    phi = build_order_parameter(Complement(Ellipsoid((0.0, 0.0), (radius, radius))), 0.4, grid).phi
    mask = np.zeros(grid.node_shape + (2,), bool)
    mask[0] = True
    mask[-1, :, 0] = True
    op = SbmOperator(grid, phi, IsotropicModel.from_E_nu(1.0, 0.3), mask)
    rhs = assemble_rhs(op, dirichlet_values=np.where(face_mask(grid, "xhi")[..., None], 0.1, 0.0))
    return op, rhs, float(phi.mean())


def _manufactured(n=64):
    grid = Grid((0, 0), (1, 1), (n, n))
    mask = np.zeros(grid.node_shape + (2,), bool)
    for f in ("xlo", "xhi", "ylo", "yhi"):
        mask |= face_mask(grid, f)[..., None]
    op = SbmOperator(grid, 1.0, IsotropicModel.from_E_nu(1.0, 0.3), mask)
    x, y = grid.node_coords()
    us = np.stack([np.sin(np.pi * x) * np.sin(2 * np.pi * y) + 0.1 * x, x * y**2], -1)
    return op, np.where(op.fixed, us, op.apply_raw(us))


def test_criterion_3_multigrid_contraction(plate, verdict):
    res, _ = plate
    slog = res.solver_log
    eps_col = slog.column("eps")
    rho_plate = {}
    finite = True
    for e in np.unique(eps_col):
        hist = slog.column("rel_residual")[eps_col == e]
        finite &= bool(np.all(np.isfinite(hist)))
        rho_plate[float(e)] = _contraction(hist)
    op, rhs, material = _half_void_problem()
    _, rep = vcycle_solve(MultigridHierarchy(op), rhs, tol_rel=1e-12, max_iter=60)
    finite &= bool(np.all(np.isfinite(rep.residual_history)))
    rho_void = _contraction(rep.residual_history)
    op_m, rhs_m = _manufactured()
    _, rep_m = vcycle_solve(MultigridHierarchy(op_m), rhs_m, tol_rel=1e-8, max_iter=30)
    rhos = list(rho_plate.values()) + [rho_void]
    ok = finite and all(r <= 0.9 for r in rhos) and rep_m.converged and rep_m.iterations <= 30
    detail = (
        f"plate rho={ {k: round(v, 3) for k, v in rho_plate.items()} }; "
        f"void (material {material:.2f}) rho={rho_void:.3f}; manufactured 64^2: {rep_m.iterations} cycles"
    )
    assert verdict(3, ok, detail)


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _material_checks(n=1000, seed=2024):
    rng = np.random.default_rng(seed)
    worst = {"linearity": 0.0, "fd": 0.0, "oracle": 0.0, "closed": 0.0}
    eps = _sym(rng.standard_normal((n, 3, 3))) * 0.01
    a, b = rng.uniform(-3, 3, 2)

    def rel(x, y):
        return float(np.max(np.abs(x - y)) / max(1.0, np.max(np.abs(x)), np.max(np.abs(y))))

    iso = [IsotropicModel(rng.uniform(-5, 5, n), rng.uniform(-5, 5, n)) for _ in range(2)]
    q = rng.standard_normal(4)
    cub = [CubicModel(*(rng.uniform(-5, 5, n) for _ in range(3)), q) for _ in range(2)]
    for m1, m2 in (iso, cub):
        combo = m1 * a + m2 * b
        for fn in ("W", "DW", "DDW"):
            lhs = getattr(combo, fn)(eps)
            rhs = a * getattr(m1, fn)(eps) + b * getattr(m2, fn)(eps)
            worst["linearity"] = max(worst["linearity"], rel(lhs, rhs))
    # finite differences on physical models
    phys = [IsotropicModel(rng.uniform(1, 5, n), rng.uniform(1, 5, n))]
    phys.append(CubicModel(rng.uniform(3, 5, n), rng.uniform(0.5, 1.5, n), rng.uniform(0.5, 2, n), q))
    h = 1e-6
    for m in phys:
        dw = m.DW(eps)
        fd = np.zeros_like(dw)
        for i in range(3):
            for j in range(3):
                e = np.zeros((3, 3))
                e[i, j] += 0.5 * h
                e[j, i] += 0.5 * h
                fd[:, i, j] = (m.W(eps + e) - m.W(eps - e)) / (2 * h)
        scale = np.max(np.abs(dw), axis=(1, 2))
        worst["fd"] = max(worst["fd"], float(np.max(np.max(np.abs(fd - dw), axis=(1, 2)) / scale)))
    model = J2Model(
        rng.uniform(10, 100, n), rng.uniform(10, 100, n), rng.uniform(0.1, 1.0, n), rng.uniform(0, 50, n), rng.uniform(0, 1, n)
    )
    state = J2State(rng.uniform(0, 0.05, n), _sym(dev(rng.standard_normal((n, 3, 3)))) * 0.01, np.zeros((n, 3, 3)))
    strain = _sym(rng.standard_normal((n, 3, 3))) * 0.05
    _, _, dg = j2_radial_return(model, strain, state)
    s_trial = 2 * model.mu[:, None, None] * (dev(strain) - state.eps_p)
    eta_norm = np.linalg.norm((s_trial - state.beta).reshape(n, -1), axis=1)
    f = eta_norm - np.sqrt(2 / 3) * model.K(state.alpha)
    closed = np.where(f > 0, f / (2 * model.mu + 2 / 3 * model.H), 0.0)
    for i in np.nonzero(f > 0)[0]:
        ref = j2_consistency_oracle(eta_norm[i], state.alpha[i], model.sigma_y[i], model.H[i], model.theta[i], model.mu[i])
        worst["oracle"] = max(worst["oracle"], abs(dg[i] - ref) / max(1.0, ref))
    worst["closed"] = rel(dg, closed)
    return worst, int(np.sum(f > 0))


def test_criterion_4_material_vector_space(verdict):
    worst, plastic = _material_checks()
    ok = worst["linearity"] <= 1e-12 and worst["fd"] <= 1e-5 and worst["oracle"] <= 1e-10 and worst["closed"] <= 1e-12
    detail = (
        f"linearity {worst['linearity']:.1e}, DW vs FD {worst['fd']:.1e}, "
        f"radial return vs bisection {worst['oracle']:.1e} and vs closed form {worst['closed']:.1e} ({plastic} plastic samples)"
    )
    assert verdict(4, ok, detail)


def test_criterion_5_j2_hysteresis(verdict):
    metrics = {}
    for name in ("r1", "r6"):
        r = run_void_plasticity(VOID_RADII[name], ncells=32)
        metrics[name] = hysteresis_metrics(r.log) | {"converged": r.converged}
    closed = all(m["closure_gap"] <= 0.05 for m in metrics.values())
    ordered = metrics["r6"]["peak"] < metrics["r1"]["peak"]
    dissipative = all(m["min_dissipation"] >= 0.0 for m in metrics.values())
    converged = all(m["converged"] for m in metrics.values())
    ok = closed and ordered and dissipative and converged
    detail = "; ".join(
        f"{k}: peak {m['peak']:.3f}, closure gap {m['closure_gap']:.3f}, min dissipation {m['min_dissipation']:.2e}"
        for k, m in metrics.items()
    )
    assert verdict(5, ok, detail)


def test_criterion_6_mode_i(verdict):
    run, _, _ = run_mode_i(FractureParams(ncells=128, nsteps=50))
    tip = run.column("crack_tip_x")
    iters = run.column("solver_iterations")
    median = float(np.median(iters[1:10]))
    nondecreasing = bool(np.all(np.diff(tip) >= 0))
    first_ok = iters[0] >= 2 * median
    cap_ok = bool(np.all(iters <= 10 * median))
    ok = run.meta["converged"] and nondecreasing and first_ok and cap_ok
    detail = (
        f"tip nondecreasing: {nondecreasing}; first solve {int(iters[0])} cycles, "
        f"median of steps 2-10 {median:g}, max {int(iters.max())} (cap {10 * median:g})"
    )
    assert verdict(6, ok, detail)


def test_criterion_7_l_shape(verdict):
    p = L_SHAPE
    h = p.half_width
    grid = Grid((-h, -h), (h, h), (p.ncells, p.ncells))
    phi = build_order_parameter(l_corner((0.0, 0.0), (1, 1), 4 * h), p.geometry_eps, grid).phi
    xc, yc = grid.cell_centers()
    dist_cells = np.hypot(xc, yc) / grid.dx[0]
    first = {}

    def snap(k, grid_, u, coef, state):
        broken = (state.c < 0.5) & (phi > 0.5)
        if not first and broken.any():
            first["step"] = k
            first["max_dist"] = float(dist_cells[broken].max())

    run, _, _ = run_l_shape(p, L_SHAPE_SOLVER, snapshot=snap, snapshot_every=1)
    force = run.column("top_edge_force")
    if not run.meta["converged"]:
        force = force[:-1]
    peak = float(force.max())
    if not first:
        assert verdict(7, False, f"no cell dropped below c = 0.5 in {len(force)} steps; peak force {peak:.3e}")
    near = first["max_dist"] <= 10.0
    after = force[first["step"]:]
    running_min = np.minimum.accumulate(after)
    monotone = bool(np.all(after[1:] <= running_min[:-1] + 0.05 * peak))
    final_ratio = float(force[-1] / peak)
    ok = run.meta["converged"] and near and monotone and final_ratio < 0.2
    detail = (
        f"first break after step {first['step']} within {first['max_dist']:.1f} cells of the corner; "
        f"force monotone (5% band): {monotone}; final/peak {final_ratio:.3f} after {len(force)} converged steps"
    )
    assert verdict(7, ok, detail)


def test_criterion_8_topopt(verdict):
    run, state, _ = run_cantilever(CantileverParams(ncells=(64, 64)))
    vol = float(run.column("volume_fraction")[-1])
    iters = run.column("solver_iterations")
    chem = run.column("E_chem")
    k_peak = int(np.argmax(chem))
    peak_then_decay = 0 < k_peak < len(chem) - 1 and chem[-1] < chem[k_peak]
    ok = (
        run.meta["converged"]
        and abs(vol - 0.25) <= 0.02
        and run.meta["components"] == 1
        and run.meta["linked"]
        and bool(np.all(iters <= 400))
        and peak_then_decay
    )
    detail = (
        f"volume {vol:.3f}; components {run.meta['components']}, linked {run.meta['linked']}; "
        f"max V-cycles {int(iters.max())}; E_chem peak at step {k_peak} of {len(chem) - 1}"
    )
    assert verdict(8, ok, detail)


# Reduced versions of every experiment, run through the CLI.
DETERMINISM_CONFIGS = {
    "plate_hole": "[grid]\nncells = 64\nhalf_width = 4\n[driver]\neps_list = 1.0, 0.5\n",
    "jacobi_demo": "[driver]\ncell_sweeps = 2000\n",
    "void_plasticity": "[grid]\nncells = 16\n[geometry]\nvoids = r1, r6\n[driver]\nstep = 0.01\npeak = 0.04\n",
    "fracture_mode_i": "[grid]\nncells = 64\n[driver]\nnsteps = 10\n",
    "fracture_l_shape": "[grid]\nncells = 64\n[crack]\nGc = 9.6\nM = 0.1\nseed = 0.01\n[driver]\nnsteps = 10\n",
    "topopt_cantilever": "[grid]\nnx = 32\nny = 32\n[driver]\nt_end = 0.05\n",
}


def test_criterion_9_determinism(tmp_path, verdict):
    mismatched = []
    failed = []
    ncsv = 0
    for name, body in DETERMINISM_CONFIGS.items():
        cfg = tmp_path / f"{name}.ini"
        cfg.write_text(f"[experiment]\nname = {name}\n{body}[output]\nvtk = false\n")
        outputs = []
        for threads in (1, 2, 8):
            out = tmp_path / f"{name}_{threads}"
            if main(["run", str(cfg), "--output-dir", str(out), "--threads", str(threads)]) != 0:
                failed.append(f"{name}@{threads}")
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        ncsv += len(outputs[0])
        if not outputs[0] or any(o != outputs[0] for o in outputs[1:]):
            mismatched.append(name)
    ok = not mismatched and not failed
    detail = f"{ncsv} CSV files from 6 experiments compared at 1, 2 and 8 threads; mismatches {mismatched or 'none'}"
    if failed:
        detail += f"; failed runs {failed}"
    assert verdict(9, ok, detail)
