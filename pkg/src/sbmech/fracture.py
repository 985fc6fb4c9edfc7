"""Hybrid phase-field brittle fracture on the diffuse-boundary elastic solver.

The crack field ``c`` (1 intact, 0 broken) and the tensile history ``H``
live on cells.  Each step solves elasticity with cell weight
``phi_geom * (g(c) + eta_res)``, refreshes ``H`` and advances ``c`` by one
explicit Ginzburg-Landau step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import mesh
from .exceptions import ConfigurationError
from .io import RunLog
from .material import IsotropicModel
from .mesh import Grid
from .multigrid import SolverSettings, vcycle_solve
from .sbm import SbmOperator, assemble_rhs, build_order_parameter, l_corner

log = logging.getLogger(__name__)


def degradation(c):
    """Quartic ``g = 4c^3 - 3c^4`` and ``g' = 12c^2 - 12c^3`` (``c`` clipped to [0, 1])."""
    c = np.clip(c, 0.0, 1.0)
    c2 = c * c
    return 4.0 * c2 * c - 3.0 * c2 * c2, 12.0 * c2 - 12.0 * c2 * c


def spectral_split(eps, lam, mu):
    """Tension/compression split of a symmetric strain.

    Returns ``(W_plus, W_minus, eps_plus, eps_minus)`` with
    ``W_pm = lam/2 (tr eps_pm)^2 + mu tr(eps_pm^2)``.  The projections are
    basis independent, so degenerate eigenvalues need no special care.
    """
    eps = np.asarray(eps, dtype=float)
    w, v = np.linalg.eigh(eps)
    wp = np.maximum(w, 0.0)
    wm = np.minimum(w, 0.0)
    ep = np.einsum("...k,...ik,...jk->...ij", wp, v, v)
    em = np.einsum("...k,...ik,...jk->...ij", wm, v, v)
    Wp = 0.5 * lam * wp.sum(-1) ** 2 + mu * (wp * wp).sum(-1)
    Wm = 0.5 * lam * wm.sum(-1) ** 2 + mu * (wm * wm).sum(-1)
    return Wp, Wm, ep, em


def update_history(H, W_plus):
    return np.maximum(H, W_plus)


@dataclass
class CrackState:
    c: np.ndarray
    H: np.ndarray
    xi: float
    Gc: float
    M: float
    eta_res: float = 1e-4

    def stable_dt(self, dx):
        """Explicit bound ``dx^2 / (8 M Gc xi)`` from the gradient term."""
        return float(np.min(dx)) ** 2 / (8.0 * self.M * self.Gc * self.xi)


def crack_driving_force(state: CrackState, dx, weight=1.0):
    """Variational derivative of ``int w_g (g H) + Gc (w / (2 xi) + xi |grad c|^2)`` in ``c``.

    ``w = 1 - g``; ``weight`` multiplies the elastic part (geometry order
    parameter in the L-shaped case).
    """
    _, gp = degradation(state.c)
    lap = mesh.cell_laplacian_neumann(state.c, dx)
    return gp * weight * state.H - state.Gc * gp / (2.0 * state.xi) - 2.0 * state.xi * state.Gc * lap


def evolve_crack(state: CrackState, dt, dx, compressive=None, weight=1.0, check_dt=True):
    """One forward-Euler Ginzburg-Landau step, hybrid override and clamp.

    ``compressive`` marks cells with ``W+ < W-``; they are reset to ``c = 1``.
    """
    if check_dt and dt > state.stable_dt(dx) * (1 + 1e-12):
        raise ConfigurationError(f"time step {dt:g} exceeds the explicit bound {state.stable_dt(dx):g}")
    c = state.c - dt * state.M * crack_driving_force(state, dx, weight)
    if compressive is not None:
        c = np.where(compressive, 1.0, c)
    return replace(state, c=np.clip(c, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Staggered drivers


@dataclass(frozen=True)
class FractureParams:
    lam: float = 121.15e9
    mu: float = 80.77e9
    xi: float = 1.0e-5
    Gc: float = 2700.0
    M: float = 1.0e-5
    eta_res: float = 1e-4
    dt: float = 1.0e-4
    nsteps: int = 50
    ncells: int = 128
    half_width: float = 0.01
    top_displacement: float = 1.5e-5
    notch_length: float = 1.5e-4
    geometry_eps: float = 4.0e-5
    seed: float = 0.0
    notch_history: float = 1.0e3


def _top_bottom_mask(grid, geom_phi=None):
    """Bottom nodes fixed, top nodes constrained in ``y``.

    With a geometry field only top nodes whose averaged ``phi`` is at least
    one half are loaded; clamping void nodes next to loaded ones would put
    a spurious strain jump on the edge.
    """
    mask = np.zeros(grid.node_shape + (2,), dtype=bool)
    mask[:, 0, :] = True
    top = np.ones(grid.node_shape[0], dtype=bool)
    if geom_phi is not None:
        top = mesh.cell_to_node_avg(np.asarray(geom_phi, dtype=float), grid.ndim)[:, -1] >= 0.5
    mask[:, -1, 1] = top
    return mask


def _crack_tip_x(grid, c, band=None):
    xc, yc = grid.cell_centers()
    broken = c < 0.5
    if band is not None:
        broken &= np.abs(yc) <= band
    return float(xc[broken].max()) if broken.any() else float(grid.lo[0])


def _staggered(grid, p: FractureParams, c0, geom_phi, name, settings, snapshot=None, snapshot_every=0, H0=None):
    model = IsotropicModel(p.lam, p.mu)
    mask = _top_bottom_mask(grid, geom_phi)
    top = np.where(mask & (np.arange(grid.node_shape[1]) == grid.node_shape[1] - 1)[None, :, None], p.top_displacement, 0.0)
    top[..., 0] = 0.0
    H0 = np.zeros(grid.cell_shape) if H0 is None else H0
    state = CrackState(c0, H0, p.xi, p.Gc, p.M, p.eta_res)
    if p.dt > state.stable_dt(grid.dx):
        raise ConfigurationError(f"dt={p.dt:g} exceeds the explicit bound {state.stable_dt(grid.dx):g}")
    weight = 1.0 if geom_phi is None else geom_phi
    u = np.zeros(grid.node_shape + (2,))
    band = 2.0 * float(grid.dx[1]) if geom_phi is None else None
    run = RunLog(["step", "time", "solver_iterations", "top_edge_force", "crack_tip_x", "min_c"], name)
    converged = True
    for k in range(p.nsteps):
        g, _ = degradation(state.c)
        coef = weight * (g + p.eta_res)
        op = SbmOperator(grid, coef, model, mask)
        rhs = assemble_rhs(op, dirichlet_values=top)
        u, rep = vcycle_solve(settings.hierarchy(op), rhs, u, settings.tol_rel, settings.max_iter)
        force = float(-grid.cell_volume * op.apply_raw(u)[:, -1, 1].sum())
        run.append(
            step=k,
            time=k * p.dt,
            solver_iterations=rep.iterations,
            top_edge_force=force,
            crack_tip_x=_crack_tip_x(grid, state.c, band),
            min_c=float(np.min(np.where(np.asarray(weight) > 0.5, state.c, 1.0))),
        )
        if not rep.converged:
            log.error("%s: elastic solve did not converge at step %d", name, k)
            converged = False
            break
        Wp, Wm, _, _ = spectral_split(op.strain(u), p.lam, p.mu)
        state = replace(state, H=update_history(state.H, Wp))
        state = evolve_crack(state, p.dt, grid.dx, compressive=Wp < Wm, weight=weight, check_dt=False)
        if snapshot is not None and snapshot_every and (k + 1) % snapshot_every == 0:
            snapshot(k + 1, grid, u, coef, state)
    run.meta["converged"] = converged
    return run, state, u


def run_mode_i(params: FractureParams = FractureParams(), settings=None, snapshot=None, snapshot_every=0):
    """Edge-notched square: bottom fixed, top pulled in ``y``.

    The notch is a band of broken cells (``c = 0``) on both sides of
    ``y = 0`` reaching ``notch_length`` in from the left edge.  Its history
    starts at ``notch_history * Gc / (2 xi)`` so that it stays broken; a
    bare ``c = 0`` band would diffuse away under the gradient term.
    """
    settings = settings or SolverSettings()
    h = params.half_width
    grid = Grid((-h, -h), (h, h), (params.ncells, params.ncells))
    xc, yc = grid.cell_centers()
    c0 = np.ones(grid.cell_shape) - params.seed
    notch = (xc < -h + params.notch_length + 0.5 * grid.dx[0]) & (np.abs(yc) < grid.dx[1])
    c0[notch] = 0.0
    H0 = np.where(notch, params.notch_history * params.Gc / (2.0 * params.xi), 0.0)
    return _staggered(grid, params, c0, None, "fracture_mode_i", settings, snapshot, snapshot_every, H0)


def run_l_shape(params: FractureParams = FractureParams(), settings=None, snapshot=None, snapshot_every=0):
    """L-shaped domain: the quadrant ``x > 0, y > 0`` is void.

    ``params.seed`` lowers the initial crack field to ``1 - seed``; an
    exactly intact field is a stationary point of the evolution law, so a
    small seed is needed for nucleation.
    """
    settings = settings or SolverSettings()
    h = params.half_width
    grid = Grid((-h, -h), (h, h), (params.ncells, params.ncells))
    geom = l_corner((0.0, 0.0), (1, 1), 4 * h)
    phi = build_order_parameter(geom, params.geometry_eps, grid).phi
    c0 = np.ones(grid.cell_shape) - params.seed
    return _staggered(grid, params, c0, phi, "fracture_l_shape", settings, snapshot, snapshot_every)
