"""Phase-field structural topology optimization (volume-constrained Allen-Cahn).

The design field ``eta`` lives on cells; the elastic solve uses the cell
weight ``(eta + zeta)**2``.  The elastic contribution to the evolution is
``-(eta + zeta) eps:C:eps``, the derivative of the stored energy at
equilibrium taken with the sign that lowers compliance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from . import mesh
from .exceptions import ConfigurationError
from .io import RunLog
from .material import IsotropicModel
from .mesh import Grid
from .multigrid import SolverSettings, vcycle_solve
from .sbm import SbmOperator, assemble_rhs, face_mask, face_node_forces

log = logging.getLogger(__name__)


@dataclass
class DesignState:
    eta: np.ndarray
    alpha: float = 200.0
    beta: float = 0.01
    zeta: float = 0.01
    V0: float = 0.25
    L: float = 1.0
    lam_max: float = 400.0
    t_ramp: float = 1.0
    t: float = 0.0

    def multiplier(self, t=None):
        t = self.t if t is None else t
        if self.t_ramp <= 0:
            return self.lam_max
        return self.lam_max * min(1.0, t / self.t_ramp)

    def stable_dt(self, dx, elastic_max=0.0):
        """Explicit bound from the gradient, double-well and volume terms."""
        nd = len(dx)
        lap = 2.0 * self.beta * sum(1.0 / d**2 for d in dx)
        well = 2.0 * self.alpha
        vol = self.lam_max * float(np.prod(dx)) * self.eta.size
        return 2.0 / (self.L * (lap + well + vol + elastic_max))


def volume(eta, grid: Grid):
    return float(np.sum(eta) * grid.cell_volume)


def elastic_density(op: SbmOperator, u):
    """Cell values of ``eps : C : eps`` (unweighted)."""
    eps = op.strain(u)
    return np.einsum("...ij,...ij->...", op.stress(eps), eps)


def objective_terms(state: DesignState, grid: Grid, op: SbmOperator = None, u=None, node_forces=None):
    """``(E_chem, E_grad, E_elastic)`` with midpoint quadrature over cells.

    ``E_elastic = 1/2 int (eta + zeta)^2 eps:C:eps - sum F . u`` over the
    loaded nodes (``node_forces`` already carry the trapezoid weights).
    """
    eta = state.eta
    dv = grid.cell_volume
    chem = float(np.sum(state.alpha * eta**2 * (1.0 - eta) ** 2) * dv)
    g = mesh.cell_gradient_centered(eta, grid.dx)
    grad = float(np.sum(0.5 * state.beta * np.sum(g * g, axis=-1)) * dv)
    if u is None or op is None:
        return chem, grad, 0.0
    stored = 0.5 * float(np.sum((eta + state.zeta) ** 2 * elastic_density(op, u)) * dv)
    work = float(np.sum(node_forces * u)) if node_forces is not None else 0.0
    return chem, grad, stored - work


def design_derivative(state: DesignState, grid: Grid, energy=None):
    """``dW/deta`` without the volume term; ``energy`` is the cell ``eps:C:eps``."""
    eta = state.eta
    d = 2.0 * state.alpha * eta * (1.0 - eta) * (1.0 - 2.0 * eta)
    d = d - state.beta * mesh.cell_laplacian_neumann(eta, grid.dx)
    if energy is not None:
        d = d - (eta + state.zeta) * energy
    return d


def allen_cahn_step(state: DesignState, grid: Grid, dt, energy=None, check_dt=True):
    """Forward-Euler step of ``deta/dt = -L (dW/deta + lam(t) (int eta - V0))``, clamped to [0, 1]."""
    emax = 0.0 if energy is None else float(np.max(np.abs(energy)))
    if check_dt and dt > state.stable_dt(grid.dx, emax) * (1 + 1e-12):
        raise ConfigurationError(f"time step {dt:g} exceeds the explicit bound {state.stable_dt(grid.dx, emax):g}")
    rate = design_derivative(state, grid, energy) + state.multiplier() * (volume(state.eta, grid) - state.V0)
    eta = np.clip(state.eta - dt * state.L * rate, 0.0, 1.0)
    return replace(state, eta=eta, t=state.t + dt)


def connected_structure(eta, grid: Grid, load_point, threshold=0.5):
    """Connectivity of ``{eta > threshold}`` (4-neighbour labelling).

    Returns ``(ncomponents, links)`` where ``links`` says whether the
    component containing the cell nearest ``load_point`` touches the
    ``x = lo`` wall.
    """
    solid = eta > threshold
    labels, n = ndimage.label(solid)
    xc, yc = grid.cell_centers()
    d = np.hypot(xc - load_point[0], yc - load_point[1])
    d = np.where(solid, d, np.inf)
    if not np.isfinite(d).any():
        return n, False
    lab = labels[np.unravel_index(np.argmin(d), d.shape)]
    return n, bool(np.any(labels[0] == lab))


@dataclass(frozen=True)
class CantileverParams:
    length: float = 1.0
    height: float = 1.0
    ncells: tuple = (64, 64)
    E: float = 1480.0
    nu: float = 0.22
    alpha: float = 200.0
    beta: float = 0.01
    zeta: float = 0.01
    lam_max: float = 400.0
    fill: float = 0.25
    load: float = -0.1
    load_height: float = 0.01
    L: float = 1.0
    dt: float = 1e-3
    t_end: float = 5.0
    ramp_fraction: float = 0.1


def run_cantilever(p: CantileverParams = CantileverParams(), settings=None, snapshot=None, snapshot_every=0):
    """Left wall clamped, point load on the middle of the right face.

    The total force ``load`` (per unit depth) is split by trapezoid weights
    over the right-face nodes within ``load_height / 2`` of mid-height, or
    put on the nearest node when that band holds none.
    """
    settings = settings or SolverSettings()
    grid = Grid((0.0, 0.0), (p.length, p.height), p.ncells)
    area = p.length * p.height
    state = DesignState(
        np.full(grid.cell_shape, p.fill),
        p.alpha,
        p.beta,
        p.zeta,
        p.fill * area,
        p.L,
        p.lam_max,
        p.ramp_fraction * p.t_end,
    )
    model = IsotropicModel.from_E_nu(p.E, p.nu)
    mask = np.broadcast_to(face_mask(grid, "xlo")[..., None], grid.node_shape + (2,)).copy()
    ymid = 0.5 * p.height
    y_nodes = grid.axis_nodes(1)
    band = np.abs(y_nodes - ymid) <= 0.5 * p.load_height + 1e-12
    if not band.any():
        band = np.abs(y_nodes - ymid) == np.min(np.abs(y_nodes - ymid))
    forces = face_node_forces(grid, "xhi", (0.0, 1.0), where=lambda x: band[None, :] & np.ones(grid.node_shape, bool))
    forces *= p.load / forces[..., 1].sum()
    load_point = (p.length, ymid)

    nsteps = int(round(p.t_end / p.dt))
    run = RunLog(["step", "time", "E_chem", "E_grad", "E_elastic", "volume_fraction", "multiplier", "solver_iterations"], "topopt")
    u = np.zeros(grid.node_shape + (2,))
    converged = True
    for k in range(nsteps + 1):
        op = SbmOperator(grid, (state.eta + state.zeta) ** 2, model, mask)
        rhs = assemble_rhs(op, node_forces=forces)
        u, rep = vcycle_solve(settings.hierarchy(op), rhs, u, settings.tol_rel, settings.max_iter)
        chem, grad, el = objective_terms(state, grid, op, u, forces)
        run.append(
            step=k,
            time=state.t,
            E_chem=chem,
            E_grad=grad,
            E_elastic=el,
            volume_fraction=volume(state.eta, grid) / area,
            multiplier=state.multiplier(),
            solver_iterations=rep.iterations,
        )
        if not rep.converged:
            log.error("topopt: elastic solve did not converge at step %d", k)
            converged = False
            break
        if snapshot is not None and snapshot_every and k % snapshot_every == 0:
            snapshot(k, grid, u, op, state)
        if k == nsteps:
            break
        state = allen_cahn_step(state, grid, p.dt, elastic_density(op, u))
    run.meta["converged"] = converged
    run.meta["components"], run.meta["linked"] = connected_structure(state.eta, grid, load_point)
    return run, state, u
