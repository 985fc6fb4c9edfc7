"""Verification and demonstration runners.

* :func:`run_plate_hole` - diffuse-hole plate against the Kirsch field for a
  list of interface widths.
* :func:`run_jacobi_instability_demo` - 1-D Jacobi iteration with the order
  parameter on nodes versus on cells.
* :func:`run_void_plasticity` - cyclic plane-strain J2 loading of a plate
  with an elliptical void.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import mesh
from .exceptions import SolverError
from .io import RunLog
from .material import IsotropicModel, J2Model, J2State, embed3, j2_radial_return
from .mesh import Grid
from .multigrid import SolverSettings
from .oracles import KirschSolution
from .sbm import (
    Complement,
    Ellipsoid,
    SbmOperator,
    Sphere,
    assemble_rhs,
    build_order_parameter,
    face_mask,
    face_node_forces,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Plate with a hole


@dataclass
class PlateHoleResult:
    table: RunLog
    solver_log: RunLog
    probes: dict = field(default_factory=dict)
    converged: bool = True


def _roller_mask(grid: Grid):
    """Left face: ``u_x = 0`` everywhere, ``u_y = 0`` at the mid node only."""
    mask = np.zeros(grid.node_shape + (2,), dtype=bool)
    mask[0, :, 0] = True
    mask[0, grid.ncells[1] // 2, 1] = True
    return mask


def plate_hole_solve(grid, eps, R=1.0, E=1.0, nu=0.3, sigma_inf=1.0, load="traction", settings=None):
    """Solve one plate-hole problem.

    ``load`` is ``"traction"`` (uniform right-face traction, left roller),
    ``"displacement"`` (right-face displacement giving ``sigma_inf`` in an
    intact plate) or ``"kirsch"`` (exact Kirsch displacements on all faces,
    which removes the finite-plate bias from the comparison).

    Returns ``(u, op, phi, report, sigma_inf)``.
    """
    settings = settings or SolverSettings()
    phi = build_order_parameter(Complement(Sphere((0.0, 0.0), R)), eps, grid)
    model = IsotropicModel.from_E_nu(E, nu)
    mask = _roller_mask(grid)
    if load == "traction":
        op = SbmOperator(grid, phi.phi, model, mask)
        rhs = assemble_rhs(op, node_forces=face_node_forces(grid, "xhi", (sigma_inf, 0.0)))
        s_eff = sigma_inf
    elif load == "displacement":
        # uniform plane-strain plate: sigma = E / (1 - nu^2) * delta / L
        length = grid.hi[0] - grid.lo[0]
        delta = sigma_inf * (1.0 - nu**2) * length / E
        mask[-1, :, 0] = True
        op = SbmOperator(grid, phi.phi, model, mask)
        rhs = assemble_rhs(op, dirichlet_values=np.where(face_mask(grid, "xhi")[..., None], delta, 0.0))
        s_eff = sigma_inf
    elif load == "kirsch":
        # exact plane-strain Kirsch displacements on every face
        mask[:] = False
        for face in ("xlo", "xhi", "ylo", "yhi"):
            mask |= face_mask(grid, face)[..., None]
        op = SbmOperator(grid, phi.phi, model, mask)
        x, y = grid.node_coords()
        ux, uy = KirschSolution(R, sigma_inf, E, nu).displacement(np.where(np.hypot(x, y) < R, R, x), y)
        rhs = assemble_rhs(op, dirichlet_values=np.stack([ux, uy], axis=-1))
        s_eff = sigma_inf
    else:
        raise ValueError(f"unknown load mode {load!r}")
    u, rep = settings.solve(op, rhs)
    return u, op, phi, rep, s_eff


def run_plate_hole(
    eps_list=(1.0, 0.5, 0.1, 0.05),
    ncells=512,
    half_width=16.0,
    R=1.0,
    E=1.0,
    nu=0.3,
    sigma_inf=1.0,
    load="kirsch",
    settings=None,
    phi_min=0.99,
    snapshot=None,
):
    """Error table of the diffuse-hole stress along ``y = R`` against the Kirsch field.

    Errors are root-mean-square differences over the probe nodes with node
    ``phi > phi_min``, divided by ``sigma_inf``.  The crown value is the
    hoop stress ``s_xx`` in the material-side cell closest to ``(0, R)``.
    ``snapshot(eps, grid, u, op, phi)`` is called after every solve.
    """
    grid = Grid((-half_width, -half_width), (half_width, half_width), (ncells, ncells))
    iy = int(round((R - grid.lo[1]) / grid.dx[1]))
    if not math.isclose(grid.axis_nodes(1)[iy], R, abs_tol=1e-9 * grid.dx[1]):
        log.warning("y = R does not fall on a grid line; probing the nearest node row")
    table = RunLog(["eps", "err_xx", "err_yy", "err_xy", "crown_stt", "iterations", "converged"], "plate_hole")
    slog = RunLog(["eps", "cycle", "rel_residual"], "plate_hole_solver")
    kirsch = KirschSolution(R, sigma_inf, E, nu)
    result = PlateHoleResult(table, slog)
    for eps in eps_list:
        try:
            u, op, phi, rep, s_eff = plate_hole_solve(grid, eps, R, E, nu, sigma_inf, load, settings)
        except SolverError as exc:
            log.error("plate-hole solve failed at eps=%g: %s", eps, exc)
            result.converged = False
            break
        for k, r in enumerate(rep.residual_history):
            slog.append(eps=eps, cycle=k, rel_residual=r)
        sig = op.cell_stress(u)
        sig_n = mesh.cell_to_node_avg(sig, 2)[:, iy]
        phi_n = mesh.cell_to_node_avg(phi.phi, 2)[:, iy]
        x = grid.axis_nodes(0)
        y = np.full_like(x, grid.axis_nodes(1)[iy])
        sel = phi_n > phi_min
        ref = kirsch.stress(x[sel], y[sel])
        errs = [
            float(np.sqrt(np.mean((sig_n[sel, i, j] - r) ** 2)) / s_eff)
            for (i, j), r in zip([(0, 0), (1, 1), (0, 1)], ref)
        ]
        xc, yc = grid.cell_centers()
        d = np.hypot(xc, yc - R)
        d = np.where(phi.phi >= 0.5, d, np.inf)
        crown = np.unravel_index(np.argmin(d), d.shape)
        crown_stt = float(sig[crown][0, 0]) / s_eff
        table.append(
            eps=eps,
            err_xx=errs[0],
            err_yy=errs[1],
            err_xy=errs[2],
            crown_stt=crown_stt,
            iterations=rep.iterations,
            converged=rep.converged,
        )
        result.probes[eps] = {"x": x, "sigma": sig_n, "selected": sel}
        if snapshot is not None:
            snapshot(eps, grid, u, op, phi.phi)
        result.converged &= rep.converged
        log.info("plate-hole eps=%g errors=%s crown=%.4f cycles=%d", eps, errs, crown_stt, rep.iterations)
    return result


# ---------------------------------------------------------------------------
# Jacobi placement demo


@dataclass
class JacobiDemoResult:
    log: RunLog
    static_max: float
    node_diverged: bool
    cell_bounded: bool
    first_bad_sweep: int


def _jacobi_1d_node(phi_n, f, dx, C, u, sweeps, record):
    """Plain Jacobi with the order parameter on nodes.

    Centered stencil ``C (phi_{i+1} - phi_{i-1}) / 2dx * (u_{i+1} - u_{i-1}) / 2dx
    + C phi_i (u_{i+1} - 2 u_i + u_{i-1}) / dx^2``; a mirror ghost closes the
    right end.  Nodes whose value and both neighbours are zero are pinned.
    """
    p = np.concatenate([phi_n, phi_n[-2:-1]])
    pm = np.concatenate([phi_n[:1], phi_n[:-1]])
    pp = p[1:]
    pinned = (phi_n == 0) & (pm == 0) & (pp == 0)
    diag = -2.0 * C * phi_n / dx**2
    b = -phi_n * f
    for k in range(sweeps):
        ue = np.concatenate([u, u[-2:-1]])
        um = np.concatenate([u[:1], u[:-1]])
        up = ue[1:]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            off = C * (pp - pm) / (2 * dx) * (up - um) / (2 * dx) + C * phi_n * (up + um) / dx**2
            new = (b - off) / diag
        new[0] = 0.0
        new[pinned] = 0.0
        u = new
        record(k, u)
    return u


def _jacobi_1d_cell(phi_c, f, dx, C, u, sweeps, record):
    """Plain Jacobi with the order parameter on cells (flux form, zero flux past the ends)."""
    left = np.concatenate([[0.0], phi_c])
    right = np.concatenate([phi_c, [0.0]])
    pinned = (left == 0) & (right == 0)
    diag = -C * (left + right) / dx**2
    b = -0.5 * (left + right) * f
    safe = np.where(pinned, 1.0, diag)
    for k in range(sweeps):
        um = np.concatenate([u[:1], u[:-1]])
        up = np.concatenate([u[1:], u[-1:]])
        off = C * (right * up + left * um) / dx**2
        new = (b - off) / safe
        new[0] = 0.0
        new[pinned] = 0.0
        u = new
        record(k, u)
    return u


def run_jacobi_instability_demo(ncells=32, interface=0.5, f=1.0, C=1.0, node_sweeps=100, cell_sweeps=10_000, phi=None):
    """1-D bar on ``[0, 1]``, fixed at ``x = 0``, body force ``f`` in the material ``x < interface``.

    Variant (a) stores a sharp order parameter on nodes (zero on the
    interface node), variant (b) on cells.  Both run undamped Jacobi from
    zero.  ``phi="uniform"`` replaces the step by ``phi = 1``.
    """
    dx = 1.0 / ncells
    xn = np.arange(ncells + 1) * dx
    xc = (np.arange(ncells) + 0.5) * dx
    if phi == "uniform":
        phi_n = np.ones(ncells + 1)
        phi_c = np.ones(ncells)
    else:
        phi_n = (xn < interface - 1e-12).astype(float)
        phi_c = (xc < interface).astype(float)
    # exact static solution of the cell form: u = f/C (L x - x^2 / 2), L = support length
    L = float(np.sum(phi_c)) * dx
    static = f / C * (L * np.minimum(xn, L) - 0.5 * np.minimum(xn, L) ** 2)
    static_max = float(np.max(np.abs(static)))

    sweeps = max(node_sweeps, cell_sweeps)
    node_hist = np.full(sweeps, np.nan)
    cell_hist = np.full(sweeps, np.nan)

    def rec(h):
        def _r(k, u):
            with np.errstate(invalid="ignore"):
                h[k] = np.max(np.abs(u)) if np.all(np.isfinite(u)) else np.inf
        return _r

    _jacobi_1d_node(phi_n, f, dx, C, np.zeros(ncells + 1), node_sweeps, rec(node_hist))
    _jacobi_1d_cell(phi_c, f, dx, C, np.zeros(ncells + 1), cell_sweeps, rec(cell_hist))

    log = RunLog(["sweep", "max_u_node", "max_u_cell"], "jacobi_demo")
    for k in range(sweeps):
        log.append(sweep=k + 1, max_u_node=node_hist[k], max_u_cell=cell_hist[k])
    nh = node_hist[:node_sweeps]
    bad = ~np.isfinite(nh) | (nh > 1e6 * static_max)
    first_bad = int(np.argmax(bad)) + 1 if bad.any() else -1
    ch = cell_hist[:cell_sweeps]
    bounded = bool(np.all(np.isfinite(ch)) and np.max(ch) <= 10.0 * static_max)
    return JacobiDemoResult(log, static_max, bool(bad.any()), bounded, first_bad)


# ---------------------------------------------------------------------------
# Cyclic plasticity around a void

# in-plane (x, y) radii of the six reference ellipsoids
VOID_RADII = {
    "r1": (2.0, 0.5),
    "r2": (2.0, 7.07),
    "r3": (7.5, 4.08),
    "r4": (10.0, 10.0),
    "r5": (2.5, 14.14),
    "r6": (14.14, 8.16),
}


def cyclic_path(step=0.004, peak=0.1):
    """Applied displacements 0 -> peak -> -peak -> 0 in increments of ``step``."""
    n = int(round(peak / step))
    up = np.arange(1, n + 1) * step
    down = peak - np.arange(1, 2 * n + 1) * step
    back = -peak + np.arange(1, n + 1) * step
    return np.round(np.concatenate([up, down, back]), 12)


@dataclass
class PlasticityResult:
    log: RunLog
    radii: tuple
    converged: bool = True
    state: object = None
    phi: object = None
    u: object = None


def run_void_plasticity(
    radii=(2.0, 0.5),
    ncells=64,
    half_width=16.0,
    eps=0.4,
    E=210.0,
    nu=0.3,
    sigma_y=0.2,
    H=50.0,
    theta=1.0,
    path=None,
    settings=None,
    inner_tol=1e-6,
    max_inner=50,
    snapshot=None,
    snapshot_every=0,
):
    """Plane-strain cyclic tension-compression of a plate with an elliptical void.

    Left face: ``u_x = 0`` with ``u_y`` held at the mid node.  Right face:
    prescribed ``u_x`` following ``path``.  Each load step alternates
    elastic solves (plastic strain as eigenstrain) with cell-wise radial
    return until the plastic strain changes by less than ``inner_tol``
    times the yield strain.

    Logged traction is the right-face reaction per unit face length; the
    logged strain is the applied displacement over the plate length.
    Default units are GPa.
    """
    settings = settings or SolverSettings()
    path = cyclic_path() if path is None else np.asarray(path, dtype=float)
    grid = Grid((-half_width, -half_width), (half_width, half_width), (ncells, ncells))
    geom = Complement(Ellipsoid((0.0, 0.0), radii))
    phi = build_order_parameter(geom, eps, grid).phi
    model = J2Model.from_E_nu(E, nu, sigma_y, H, theta)
    mask = _roller_mask(grid)
    mask[-1, :, 0] = True
    op = SbmOperator(grid, phi, model.elastic, mask)
    hier = settings.hierarchy(op)
    load = np.where(face_mask(grid, "xhi")[..., None], np.array([1.0, 0.0]), 0.0)
    length = grid.hi[0] - grid.lo[0]
    height = grid.hi[1] - grid.lo[1]
    eps_y = sigma_y / E if np.isfinite(sigma_y) else 1.0
    vol = grid.cell_volume

    state = J2State.zero(grid.cell_shape)
    u = np.zeros(grid.node_shape + (2,))
    log_ = RunLog(
        ["step", "displacement", "strain", "traction", "dissipation", "max_alpha", "inner_iterations", "solver_cycles"],
        "void_plasticity",
    )
    from .multigrid import vcycle_solve

    result = PlasticityResult(log_, tuple(radii), state=state, phi=phi)
    for k, delta in enumerate(path, start=1):
        trial = state
        cycles = 0
        for inner in range(1, max_inner + 1):
            rhs = assemble_rhs(op, eps0=trial.eps_p, dirichlet_values=load * delta)
            u, rep = vcycle_solve(hier, rhs, u, settings.tol_rel, settings.max_iter)
            cycles += rep.iterations
            if not rep.converged:
                result.converged = False
            strain = op.strain(u)
            sigma, new, dg = j2_radial_return(model, strain, state)
            change = float(np.max(np.abs(new.eps_p - trial.eps_p))) / eps_y
            trial = new
            if change < inner_tol:
                break
        else:
            log.warning("step %d: plastic fixed point not converged (change %.3g)", k, change)
            result.converged = False
        dissipation = float(np.sum(phi * np.einsum("...ij,...ij->...", sigma, trial.eps_p - state.eps_p)) * vol)
        state = trial
        # reaction on the loaded face: F_ext = -V (A u - div(C eps_p))
        rhs_e = op.eigen_rhs(state.eps_p)
        reaction = -vol * (op.apply_raw(u) - rhs_e)[-1, :, 0].sum()
        log_.append(
            step=k,
            displacement=float(delta),
            strain=float(delta / length),
            traction=float(reaction / height),
            dissipation=dissipation,
            max_alpha=float(np.max(phi * state.alpha)),
            inner_iterations=inner,
            solver_cycles=cycles,
        )
        if snapshot is not None and snapshot_every and k % snapshot_every == 0:
            snapshot(k, grid, u, phi, state)
    result.state = state
    result.u = u
    return result


def hysteresis_metrics(log_: RunLog):
    """Peak traction, loop closure gap and minimum dissipation increment of a cyclic run.

    The loop is closed when the traction at the final zero-displacement
    state mirrors the traction at the zero crossing of the unloading
    branch: ``gap = |T_end + T_cross| / peak``.
    """
    d = log_.column("displacement")
    t = log_.column("traction")
    peak = float(np.max(np.abs(t)))
    top = int(np.argmax(d))
    down = np.arange(top, len(d))
    cross = down[np.argmin(np.abs(d[down]))]
    gap = abs(t[-1] + t[cross]) / peak
    return {
        "peak": peak,
        "peak_tension": float(np.max(t)),
        "t_cross": float(t[cross]),
        "t_end": float(t[-1]),
        "closure_gap": float(gap),
        "min_dissipation": float(np.min(log_.column("dissipation"))),
    }
