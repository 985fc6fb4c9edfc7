"""Diffuse-boundary elasticity: order parameters, traction sources, operator.

Conventions
-----------
* Displacements live on nodes, the order parameter and material models on
  cells.
* Signed distances are positive inside the material.
* A traction ``t`` is the force per area acting on the material surface with
  outward normal ``n`` (``sigma n = t``).  The discrete equation solved is::

      div((phi + floor) sigma(grad u)) = -phi f - t |grad phi| + div(phi C eps0)

  with body force ``f`` per unit volume.  Box faces not held by Dirichlet
  data are traction-free unless a face load is added.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import mesh
from .exceptions import ConfigurationError, SolverError
from .material import CubicModel, IsotropicModel
from .mesh import Grid

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Geometry


class Geometry:
    """Analytic region; ``signed_distance`` is positive inside."""

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def min_curvature_radius(self) -> float:
        return math.inf

    def __or__(self, other):
        return Union((self, other))

    def __invert__(self):
        return Complement(self)


@dataclass
class Sphere(Geometry):
    center: Sequence[float]
    radius: float

    def signed_distance(self, x):
        c = np.asarray(self.center, dtype=float)
        return self.radius - np.linalg.norm(x - c, axis=-1)

    def min_curvature_radius(self):
        return self.radius


@dataclass
class Ellipsoid(Geometry):
    """Axis-aligned ellipsoid.  Uses the first-order distance estimate
    ``(1 - |x/r|) |x/r| / |x/r^2|``, exact for spheres and on the surface."""

    center: Sequence[float]
    radii: Sequence[float]

    def signed_distance(self, x):
        r = np.asarray(self.radii, dtype=float)
        y = (x - np.asarray(self.center, dtype=float)) / r
        k0 = np.linalg.norm(y, axis=-1)
        k1 = np.linalg.norm(y / r, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = (1.0 - k0) * k0 / k1
        return np.where(k1 > 0, d, np.min(r))

    def min_curvature_radius(self):
        r = sorted(self.radii)
        return r[0] ** 2 / r[-1]


@dataclass
class HalfSpace(Geometry):
    """Material on the side opposite to the outward ``normal`` through ``point``."""

    point: Sequence[float]
    normal: Sequence[float]

    def signed_distance(self, x):
        n = np.asarray(self.normal, dtype=float)
        n = n / np.linalg.norm(n)
        return -np.sum((x - np.asarray(self.point, dtype=float)) * n, axis=-1)


@dataclass
class Box(Geometry):
    lo: Sequence[float]
    hi: Sequence[float]

    def signed_distance(self, x):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        q = np.abs(x - c) - h
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return -(outside + inside)


@dataclass
class Union(Geometry):
    parts: tuple

    def signed_distance(self, x):
        return np.max([p.signed_distance(x) for p in self.parts], axis=0)

    def min_curvature_radius(self):
        return min(p.min_curvature_radius() for p in self.parts)


@dataclass
class Complement(Geometry):
    inner: Geometry

    def signed_distance(self, x):
        return -self.inner.signed_distance(x)

    def min_curvature_radius(self):
        return self.inner.min_curvature_radius()


def l_corner(corner, quadrant, extent) -> Geometry:
    """Material everywhere except one quadrant cornered at ``corner``.

    ``quadrant`` is a sign tuple such as ``(1, 1)``; the removed box is made
    ``extent`` long so its far faces never sit inside the computational box.
    """
    corner = np.asarray(corner, dtype=float)
    s = np.sign(np.asarray(quadrant, dtype=float))
    far = corner + s * extent
    return Complement(Box(np.minimum(corner, far), np.maximum(corner, far)))


def profile(s, eps):
    """Regularized step across the interface, 1/2 (1 + tanh(4 s / eps))."""
    return 0.5 * (1.0 + np.tanh(4.0 * np.asarray(s) / eps))


@dataclass
class OrderParameter:
    phi: np.ndarray
    eps: float
    geometry: Optional[Geometry]
    grid: Grid


def build_order_parameter(geometry: Geometry, eps: float, grid: Grid) -> OrderParameter:
    if not isinstance(geometry, Geometry):
        raise ConfigurationError(f"unknown geometry {geometry!r}")
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    if eps < 2.0 * float(np.max(grid.dx)):
        log.warning("eps=%g is below 2*dx=%g; the diffuse interface is under-resolved", eps, 2 * np.max(grid.dx))
    x = np.stack(grid.cell_centers(), axis=-1)
    phi = profile(geometry.signed_distance(x), eps)
    return OrderParameter(phi=phi, eps=eps, geometry=geometry, grid=grid)


def _sd_normal(geometry, x, h):
    """Outward unit normal from central differences of the signed distance."""
    grads = []
    for a in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[a] = h
        grads.append((geometry.signed_distance(x + e) - geometry.signed_distance(x - e)) / (2 * h))
    g = np.stack(grads, axis=-1)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    return -g / np.where(norm > 0, norm, 1.0)


def build_traction_source(op: OrderParameter, t0: Optional[Callable] = None) -> np.ndarray:
    """Node field ``t_hat |grad phi|`` (shape ``node_shape + (ndim,)``).

    ``t0(y, n)`` receives closest boundary points and outward normals and
    returns tractions; ``None`` means traction-free.  The closest point is
    ``y = x + d n`` for the analytic signed distance ``d``.
    """
    grid = op.grid
    nd = grid.ndim
    if t0 is None:
        return np.zeros(grid.node_shape + (nd,))
    if op.geometry is not None and op.eps > op.geometry.min_curvature_radius():
        log.warning("eps exceeds the smallest boundary curvature radius; diffuse traction is ambiguous")
    gphi = mesh.cell_gradient_centered(op.phi, grid.dx)
    mag = mesh.cell_to_node_avg(np.linalg.norm(gphi, axis=-1), nd)
    x = np.stack(grid.node_coords(), axis=-1)
    if op.geometry is None:
        raise ConfigurationError("traction source needs an analytic geometry for closest-point extension")
    n = _sd_normal(op.geometry, x, 1e-6 * float(np.min(grid.dx)))
    y = x + op.geometry.signed_distance(x)[..., None] * n
    t = np.broadcast_to(np.asarray(t0(y, n), dtype=float), x.shape)
    return t * mag[..., None]


# ---------------------------------------------------------------------------
# Operator


def sym(g):
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def face_mask(grid: Grid, face: str) -> np.ndarray:
    axis = mesh.AXES.index(face[0])
    m = np.zeros(grid.node_shape, dtype=bool)
    idx = [slice(None)] * grid.ndim
    idx[axis] = 0 if face.endswith("lo") else -1
    m[tuple(idx)] = True
    return m


def face_node_forces(grid: Grid, face: str, traction, where: Optional[Callable] = None) -> np.ndarray:
    """Nodal forces (per unit out-of-plane depth in 2-D) from a traction on a box face.

    Trapezoid tributary areas; ``where(x)`` optionally restricts the loaded
    part of the face.
    """
    nd = grid.ndim
    axis = mesh.AXES.index(face[0])
    w = np.ones(grid.node_shape)
    for b in range(nd):
        if b == axis:
            continue
        wb = np.full(grid.node_shape[b], grid.dx[b])
        wb[0] *= 0.5
        wb[-1] *= 0.5
        shape = [1] * nd
        shape[b] = -1
        w = w * wb.reshape(shape)
    m = face_mask(grid, face)
    if where is not None:
        x = np.stack(grid.node_coords(), axis=-1)
        m &= where(x)
    t = np.broadcast_to(np.asarray(traction, dtype=float), grid.node_shape + (nd,))
    return np.where(m[..., None], t * w[..., None], 0.0)


@dataclass
class SbmOperator:
    """Discrete ``u -> div(coef * C : sym grad u)`` on nodes.

    Parameters
    ----------
    grid : Grid
    coef : ndarray, cell shape
        Effective cell weight, e.g. ``phi + floor``, ``g(c) + eta`` or
        ``(eta + zeta)**2``.
    model : IsotropicModel or CubicModel
        Scalar or cell-array parameters; any eigenstrain is ignored by
        :meth:`apply` and enters only through :meth:`eigen_rhs`.
    dirichlet_mask : bool ndarray, ``node_shape + (ndim,)``
        Constrained displacement components.
    pin_threshold : float
        Nodes whose adjacent cell weights are all below this are pinned to
        zero (identity rows).
    """

    grid: Grid
    coef: np.ndarray
    model: object
    dirichlet_mask: Optional[np.ndarray] = None
    pin_threshold: float = 1e-10
    floor: float = 0.0

    def __post_init__(self):
        g = self.grid
        coef = np.asarray(self.coef, dtype=float)
        if coef.ndim and coef.shape != g.cell_shape:
            raise ConfigurationError(f"coefficient shape {coef.shape} does not match grid {g.cell_shape}")
        self.coef = np.broadcast_to(coef, g.cell_shape) + self.floor
        self.floor = 0.0
        for name in ("lam", "mu", "C11"):
            v = getattr(self.model, name, None)
            if v is not None and np.ndim(v) > 0 and np.shape(v) != g.cell_shape:
                raise ConfigurationError(f"model field '{name}' shape {np.shape(v)} does not match grid")
        if self.dirichlet_mask is None:
            self.dirichlet_mask = np.zeros(g.node_shape + (g.ndim,), dtype=bool)
        cmax = mesh._pad_spatial(self.coef, g.ndim)
        for a in range(g.ndim):
            lo = [slice(None)] * g.ndim
            hi = [slice(None)] * g.ndim
            lo[a] = slice(None, -1)
            hi[a] = slice(1, None)
            cmax = np.maximum(cmax[tuple(lo)], cmax[tuple(hi)])
        self.pinned = cmax < self.pin_threshold
        self.fixed = self.dirichlet_mask | self.pinned[..., None]
        self._diag = None
        if isinstance(self.model, IsotropicModel):
            self._lam = np.asarray(self.model.lam, dtype=float)
            self._mu = np.asarray(self.model.mu, dtype=float)

    @property
    def ndim(self):
        return self.grid.ndim

    def stress(self, strain):
        """Linear stress ``C : strain`` (no eigenstrain)."""
        if isinstance(self.model, IsotropicModel):
            tr = np.trace(strain, axis1=-2, axis2=-1)
            out = 2.0 * self._mu[..., None, None] * strain
            for i in range(self.ndim):
                out[..., i, i] += self._lam * tr
            return out
        C = self.model.DDW(strain, check=False)
        return np.einsum("...ijkl,...kl->...ij", C, strain)

    def strain(self, u):
        return sym(mesh.grad_node_to_cell(u, self.grid.dx))

    def _edge_weight(self, w, axis):
        """Average a (zero-padded) cell array onto the edges parallel to ``axis``."""
        nd = self.ndim
        for b in range(nd):
            if b == axis:
                continue
            widths = [(0, 0)] * w.ndim
            widths[b] = (1, 1)
            w = mesh._avg(np.pad(w, widths), b)
        return w

    def _prepare(self):
        nd = self.ndim
        c = self.coef
        if isinstance(self.model, IsotropicModel):
            lam = c * self._lam
            mu = c * self._mu
            self._edge = []
            for a in range(nd):
                lam_e = self._edge_weight(lam, a)
                mu_e = self._edge_weight(mu, a)
                self._edge.append((lam_e + 2.0 * mu_e, mu_e))
            self._cell = (lam, mu)
        else:
            shape = self.grid.cell_shape + (nd, nd)
            C = self.model.DDW(np.zeros(shape), check=False) * c[..., None, None, None, None]
            self._edge = [self._edge_weight(C[..., :, a, :, a], a) for a in range(nd)]
            cross = C.copy()
            for a in range(nd):
                cross[..., :, a, :, a] = 0.0
            self._cell = cross

    def apply_raw(self, u):
        """``div(coef C grad u)`` without row constraints.

        Same-direction derivative pairs use node-to-node differences on edges
        (edge weight = mean of the adjacent cells), mixed pairs use the cell
        corner gradient.  The result is the negative gradient of a positive
        semidefinite quadratic energy, hence symmetric, and it has no
        checkerboard null mode.
        """
        if not hasattr(self, "_edge"):
            self._prepare()
        nd = self.ndim
        dx = self.grid.dx
        out = np.zeros_like(u)
        iso = isinstance(self.model, IsotropicModel)
        for a in range(nd):
            du = mesh._diff(u, a) / dx[a]
            if iso:
                normal, shear = self._edge[a]
                flux = shear[..., None] * du
                flux[..., a] = normal * du[..., a]
            else:
                flux = np.einsum("...ij,...j->...i", self._edge[a], du)
            out += mesh._diff_adjoint(flux, a) / dx[a]
        if nd > 1:
            G = mesh.grad_node_to_cell(u, dx)
            if iso:
                lam, mu = self._cell
                cflux = np.zeros(G.shape)
                trG = np.trace(G, axis1=-2, axis2=-1)
                for a in range(nd):
                    cflux[..., a, a] = lam * (trG - G[..., a, a])
                    for i in range(nd):
                        if i != a:
                            cflux[..., i, a] = mu * G[..., a, i]
            else:
                cflux = np.einsum("...iajb,...jb->...ia", self._cell, G)
            out += mesh.div_cell_to_node(cflux, dx)
        return out

    def cell_stress(self, u):
        """Cell-centered stress ``C : sym grad u`` (unweighted)."""
        return self.stress(self.strain(u))

    def apply(self, u):
        """Operator action; constrained and pinned rows act as the identity."""
        out = self.apply_raw(u)
        return np.where(self.fixed, u, out)

    def residual(self, u, u0):
        """Constraint residual ``u - u0`` on Dirichlet rows, raw action elsewhere."""
        out = self.apply_raw(u)
        return np.where(self.dirichlet_mask, u - u0, out)

    def diagonal(self):
        """Exact diagonal by probing with interleaved unit vectors (stride 3)."""
        if self._diag is not None:
            return self._diag
        g = self.grid
        nd = g.ndim
        diag = np.zeros(g.node_shape + (nd,))
        for offs in itertools.product(range(3), repeat=nd):
            sl = tuple(slice(o, None, 3) for o in offs)
            for c in range(nd):
                v = np.zeros(g.node_shape + (nd,))
                v[sl + (c,)] = 1.0
                diag[sl + (c,)] = self.apply_raw(v)[sl + (c,)]
        diag = np.where(self.fixed, 1.0, diag)
        if np.any(diag == 0.0):
            bad = np.argwhere(diag == 0.0)[0]
            raise SolverError(f"zero Jacobi diagonal at unpinned node {tuple(bad)}")
        self._diag = diag
        return diag

    def eigen_rhs(self, eps0):
        """``div(coef * C : eps0)`` for a cell eigenstrain (in-plane block used in 2-D)."""
        nd = self.ndim
        e0 = np.asarray(eps0, dtype=float)
        if e0.shape[-1] == 3 and nd == 2:
            if isinstance(self.model, IsotropicModel):
                tr3 = np.trace(e0, axis1=-2, axis2=-1)
                s = 2.0 * self._mu[..., None, None] * e0[..., :2, :2]
                for i in range(2):
                    s[..., i, i] += self._lam * tr3
            else:
                raise NotImplementedError("3-D eigenstrain with a 2-D cubic model")
        else:
            s = self.stress(e0)
        return mesh.div_cell_to_node(s * self.coef[..., None, None], self.grid.dx)

    def coarsen(self):
        from .material import model_field_interpolate

        g = self.grid
        cg = g.coarsen()
        coef = model_field_interpolate(self.coef, 2, g.ndim)
        model = model_field_interpolate(self.model, 2, g.ndim)
        sl = tuple(slice(None, None, 2) for _ in range(g.ndim))
        mask = self.dirichlet_mask[sl]
        return SbmOperator(cg, coef, model, mask, self.pin_threshold)


def node_volume_fraction(grid: Grid, cells=None) -> np.ndarray:
    """Node control volume (optionally weighted by a cell field) over the cell volume.

    One for interior nodes, 1/2 on faces, 1/4 at 2-D corners.
    """
    c = np.ones(grid.cell_shape) if cells is None else np.asarray(cells, dtype=float)
    out = mesh._pad_spatial(c, grid.ndim)
    for a in range(grid.ndim):
        out = mesh._avg(out, a)
    return out


def assemble_rhs(
    op: SbmOperator,
    body_force=None,
    traction_source=None,
    node_forces=None,
    eps0=None,
    phi_nodes=None,
    dirichlet_values=0.0,
):
    """Right-hand side of the node equations.

    ``body_force`` is a node vector field weighted by the node-averaged
    ``phi_nodes``; ``node_forces`` are concentrated forces such as those from
    :func:`face_node_forces`.  Rows constrained by the operator's Dirichlet
    mask carry ``dirichlet_values`` (scalar or node vector field).
    """
    g = op.grid
    rhs = np.zeros(g.node_shape + (g.ndim,))
    vol = node_volume_fraction(g)[..., None]
    if body_force is not None:
        w = 1.0 if phi_nodes is None else phi_nodes[..., None]
        rhs -= vol * w * np.asarray(body_force)
    if traction_source is not None:
        rhs -= vol * traction_source
    if node_forces is not None:
        rhs -= node_forces / g.cell_volume
    if eps0 is not None:
        rhs += op.eigen_rhs(eps0)
    values = np.broadcast_to(np.asarray(dirichlet_values, dtype=float), rhs.shape)
    return np.where(op.dirichlet_mask, values, rhs)
