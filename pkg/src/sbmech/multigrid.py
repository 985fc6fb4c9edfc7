"""Geometric multigrid V-cycles for :class:`~sbmech.sbm.SbmOperator`.

Coarse operators are rediscretized from cell-averaged weights and models;
residuals are restricted by full weighting and corrections prolonged by
multilinear interpolation.  The smoother is damped Jacobi with the exact
operator diagonal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import SolverError
from .sbm import SbmOperator, node_volume_fraction

log = logging.getLogger(__name__)


def restrict_residual(fine: np.ndarray, ndim: int) -> np.ndarray:
    """Full weighting (1/4, 1/2, 1/4 per axis) of a density-form field.

    Boundary nodes mirror their missing neighbour, giving weights (1/2, 1/2);
    the stencil is a partition of unity everywhere.  For densities this is
    the volume-weighted adjoint of :func:`prolong_correction`.
    """
    out = fine
    for a in range(ndim):
        widths = [(0, 0)] * out.ndim
        widths[a] = (1, 1)
        p = np.pad(out, widths, mode="reflect")
        n = out.shape[a]

        def take(start):
            sl = [slice(None)] * out.ndim
            sl[a] = slice(start, start + n, 2)
            return p[tuple(sl)]

        out = 0.25 * take(0) + 0.5 * take(1) + 0.25 * take(2)
    return out


def prolong_correction(coarse: np.ndarray, ndim: int) -> np.ndarray:
    """Multilinear interpolation; coincident nodes are copied exactly."""
    out = coarse
    for a in range(ndim):
        n = out.shape[a]
        shape = list(out.shape)
        shape[a] = 2 * n - 1
        f = np.empty(shape)
        even = [slice(None)] * out.ndim
        odd = [slice(None)] * out.ndim
        lo = [slice(None)] * out.ndim
        hi = [slice(None)] * out.ndim
        even[a] = slice(0, None, 2)
        odd[a] = slice(1, None, 2)
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        f[tuple(even)] = out
        f[tuple(odd)] = 0.5 * (out[tuple(lo)] + out[tuple(hi)])
        out = f
    return out


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    converged: bool

    def contraction(self, first=5, last=20):
        """Geometric-mean residual contraction per cycle over ``[first, last]``."""
        h = self.residual_history
        last = min(last, len(h) - 1)
        if last <= first or h[first] <= 0:
            return float("nan")
        return float((h[last] / h[first]) ** (1.0 / (last - first)))


def jacobi_smooth(op: SbmOperator, u, rhs, nsweeps, omega=2.0 / 3.0):
    """Damped Jacobi sweeps ``u <- u + omega D^-1 (rhs - A u)``.

    Constrained rows are set to their ``rhs`` value, pinned rows to zero.
    """
    D = op.diagonal()
    target = np.where(op.pinned[..., None], 0.0, rhs)
    u = np.where(op.fixed, target, u)
    for _ in range(nsweeps):
        r = rhs - op.apply_raw(u)
        u = np.where(op.fixed, target, u + omega * r / D)
    return u


def _matvec(A, x):
    # numpy reduction instead of BLAS: the summation order must not depend on the thread count
    return np.sum(A * x[None, :], axis=1)


def _norm(x):
    return float(np.sqrt(np.sum(x * x)))


class _DenseLevel:
    """Coarsest operator as an explicit matrix, probed column by column.

    The Jacobi sweeps it runs are the same as :func:`jacobi_smooth`; on a
    handful of nodes a matrix-vector product is far cheaper than a stencil
    pass.
    """

    def __init__(self, op: SbmOperator):
        shape = op.grid.node_shape + (op.ndim,)
        n = int(np.prod(shape))
        A = np.empty((n, n))
        e = np.zeros(n)
        for k in range(n):
            e[k] = 1.0
            A[:, k] = op.apply_raw(e.reshape(shape)).ravel()
            e[k] = 0.0
        self.A = A
        self.D = op.diagonal().ravel()
        self.fixed = op.fixed.ravel()
        self.pinned = np.broadcast_to(op.pinned[..., None], shape).ravel()
        self.shape = shape

    def smooth(self, u, rhs, nsweeps, omega):
        rhs = rhs.ravel()
        target = np.where(self.pinned, 0.0, rhs)
        u = np.where(self.fixed, target, u.ravel())
        free = ~self.fixed
        step = np.zeros_like(u)
        for _ in range(nsweeps):
            step[free] = omega * (rhs - _matvec(self.A, u))[free] / self.D[free]
            u = u + step
        return u.reshape(self.shape)


# above this many coarse unknowns the stencil sweep is used instead
DENSE_COARSE_LIMIT = 600


class MultigridHierarchy:
    """Fine-to-coarse sequence of operators, each coarser by 2 per axis.

    Parameters
    ----------
    op : SbmOperator
        Finest level.
    nlevels : int, optional
        Defaults to as many as keep at least ``min_cells`` cells per axis.
    """

    def __init__(self, op: SbmOperator, nlevels=None, omega=2.0 / 3.0, nu1=4, nu2=4, nu_coarse=200, min_cells=4):
        self.omega = omega
        self.nu1 = nu1
        self.nu2 = nu2
        self.nu_coarse = nu_coarse
        levels = [op]
        while nlevels is None or len(levels) < nlevels:
            g = levels[-1].grid
            if not (g.can_coarsen() and min(g.ncells) // 2 >= min_cells):
                break
            levels.append(levels[-1].coarsen())
        if nlevels is not None and len(levels) < nlevels:
            raise ValueError(f"grid {op.grid.ncells} does not support {nlevels} levels")
        if len(levels) < 2:
            log.info("multigrid hierarchy has a single level; solver reduces to Jacobi")
        self.levels = levels
        c = levels[-1]
        ncoarse = int(np.prod(c.grid.node_shape)) * c.ndim
        self._dense = _DenseLevel(c) if ncoarse <= DENSE_COARSE_LIMIT else None
        # node equations are control-volume integrals over the full cell volume
        self._vol = [node_volume_fraction(lv.grid)[..., None] for lv in levels]

    @property
    def nlevels(self):
        return len(self.levels)

    def vcycle(self, u, rhs, level=0):
        op = self.levels[level]
        nd = op.ndim
        if level == len(self.levels) - 1:
            if self._dense is not None:
                return self._dense.smooth(u, rhs, self.nu_coarse, self.omega)
            return jacobi_smooth(op, u, rhs, self.nu_coarse, self.omega)
        u = jacobi_smooth(op, u, rhs, self.nu1, self.omega)
        r = np.where(op.fixed, 0.0, rhs - op.apply_raw(u))
        coarse = self.levels[level + 1]
        rc = restrict_residual(r / self._vol[level], nd) * self._vol[level + 1]
        rc = np.where(coarse.fixed, 0.0, rc)
        ec = self.vcycle(np.zeros_like(rc), rc, level + 1)
        u = u + np.where(op.fixed, 0.0, prolong_correction(ec, nd))
        return jacobi_smooth(op, u, rhs, self.nu2, self.omega)

    def free_residual(self, u, rhs):
        op = self.levels[0]
        return np.where(op.fixed, 0.0, rhs - op.apply_raw(u))


def vcycle_solve(hier: MultigridHierarchy, rhs, u0=None, tol_rel=1e-8, max_iter=200, fixed_cycles=None):
    """Repeat V-cycles until the free-node relative residual drops below ``tol_rel``.

    ``rhs`` carries the prescribed values on Dirichlet rows.  The reference
    norm is that of the lifted right-hand side (Dirichlet data moved to the
    free rows).  With ``fixed_cycles`` the tolerance is ignored and exactly
    that many cycles run.

    Returns ``(u, SolveReport)``.  Non-convergence is reported, not raised;
    a non-finite residual raises :class:`SolverError`.
    """
    op = hier.levels[0]
    target = np.where(op.pinned[..., None], 0.0, rhs)
    lift = np.where(op.fixed, target, 0.0)
    ref = _norm(hier.free_residual(lift, rhs))
    u = np.zeros_like(rhs) if u0 is None else np.array(u0, dtype=float)
    u = np.where(op.fixed, target, u)
    if not np.isfinite(ref):
        raise SolverError("non-finite right-hand side")
    if ref == 0.0:
        return lift, SolveReport(0, [0.0], True)
    res = _norm(hier.free_residual(u, rhs)) / ref
    if not np.isfinite(res):
        raise SolverError("non-finite initial residual")
    history = [float(res)]
    it = 0
    ncycles = max_iter if fixed_cycles is None else fixed_cycles
    while it < ncycles and (fixed_cycles is not None or res >= tol_rel):
        u = hier.vcycle(u, rhs)
        it += 1
        res = _norm(hier.free_residual(u, rhs)) / ref
        if not np.isfinite(res):
            raise SolverError(f"non-finite residual at V-cycle {it}")
        history.append(float(res))
    converged = bool(res < tol_rel)
    tail = history[3:]
    if any(b > a * (1 + 1e-12) for a, b in zip(tail, tail[1:])):
        log.debug("residual history not monotone after cycle 3")
    return u, SolveReport(it, history, converged)


@dataclass(frozen=True)
class SolverSettings:
    """Multigrid parameters shared by the drivers."""

    tol_rel: float = 1e-8
    max_iter: int = 200
    omega: float = 2.0 / 3.0
    nu1: int = 4
    nu2: int = 4
    nu_coarse: int = 200
    nlevels: object = None

    def hierarchy(self, op: SbmOperator) -> MultigridHierarchy:
        return MultigridHierarchy(op, self.nlevels, self.omega, self.nu1, self.nu2, self.nu_coarse)

    def solve(self, op: SbmOperator, rhs, u0=None):
        return vcycle_solve(self.hierarchy(op), rhs, u0, self.tol_rel, self.max_iter)
