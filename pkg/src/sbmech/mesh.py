"""Uniform structured grids with node- and cell-centered fields.

Field data are plain ``numpy`` arrays.  Spatial axes come first, followed by
any component axes, so a 2-D vector node field on a grid with ``ncells=(nx,
ny)`` has shape ``(nx + 1, ny + 1, 2)`` and a symmetric tensor cell field has
shape ``(nx, ny, 2, 2)``.  Ghosted arrays carry ``nghost`` extra layers on
every side of every spatial axis; only :func:`fill_ghosts` deals with those.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import ConfigurationError

AXES = "xyz"


def face_names(ndim: int) -> list[str]:
    return [f"{AXES[a]}{side}" for a in range(ndim) for side in ("lo", "hi")]


@dataclass(frozen=True)
class Grid:
    """Uniform box grid.

    Parameters
    ----------
    lo, hi : sequence of float
        Physical corner coordinates.
    ncells : sequence of int
        Number of cells along each axis (at least 2).
    nghost : int
        Ghost layer width used by ghosted arrays.
    """

    lo: tuple
    hi: tuple
    ncells: tuple
    nghost: int = 1

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        n = tuple(int(v) for v in self.ncells)
        if not (len(lo) == len(hi) == len(n)) or not 1 <= len(n) <= 3:
            raise ConfigurationError("lo, hi and ncells must have equal length 1, 2 or 3")
        if any(v < 2 for v in n):
            raise ConfigurationError(f"ncells must be >= 2 per axis, got {n}")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ConfigurationError("hi must exceed lo on every axis")
        if self.nghost < 1:
            raise ConfigurationError("nghost must be >= 1")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "ncells", n)

    @property
    def ndim(self) -> int:
        return len(self.ncells)

    @property
    def dx(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.ncells)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @property
    def node_shape(self) -> tuple:
        return tuple(n + 1 for n in self.ncells)

    @property
    def cell_shape(self) -> tuple:
        return tuple(self.ncells)

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.lo[axis] + self.dx[axis] * np.arange(self.ncells[axis] + 1)

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.lo[axis] + self.dx[axis] * (np.arange(self.ncells[axis]) + 0.5)

    def node_coords(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis_nodes(a) for a in range(self.ndim)], indexing="ij")

    def cell_centers(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis_centers(a) for a in range(self.ndim)], indexing="ij")

    def can_coarsen(self) -> bool:
        return all(n % 2 == 0 and n // 2 >= 2 for n in self.ncells)

    def coarsen(self) -> "Grid":
        if not self.can_coarsen():
            raise ValueError(f"grid {self.ncells} cannot be coarsened by 2")
        return Grid(self.lo, self.hi, tuple(n // 2 for n in self.ncells), self.nghost)

    def ghosted(self, centering: str, components: tuple = ()) -> np.ndarray:
        shape = self.node_shape if centering == "node" else self.cell_shape
        return np.zeros(tuple(s + 2 * self.nghost for s in shape) + tuple(components))

    def interior(self, arr: np.ndarray) -> np.ndarray:
        g = self.nghost
        return arr[tuple(slice(g, -g) for _ in range(self.ndim))]


# ---------------------------------------------------------------------------
# Boundary rules


@dataclass(frozen=True)
class Dirichlet:
    value: object = 0.0


@dataclass(frozen=True)
class Neumann:
    pass


@dataclass(frozen=True)
class Traction:
    value: object = 0.0


def _face_slices(ndim, axis, index):
    sl = [slice(None)] * ndim
    sl[axis] = index
    return tuple(sl)


def fill_ghosts(arr: np.ndarray, grid: Grid, rules: Mapping, centering: str = "node") -> np.ndarray:
    """Populate the ghost layers of a ghosted array in place.

    Node fields: ``Dirichlet`` forces the boundary node to the value and
    extrapolates linearly through it; ``Neumann`` and ``Traction`` mirror the
    interior about the boundary node.  Cell fields copy the nearest interior
    cell whatever the rule.  Axes are processed in order so corner ghosts are
    consistent and a second call changes nothing.
    """
    missing = [f for f in face_names(grid.ndim) if f not in rules]
    if missing:
        raise ConfigurationError(f"no boundary rule for face(s) {missing}")
    g = grid.nghost
    nd = grid.ndim
    for axis in range(nd):
        n = arr.shape[axis]
        for side in ("lo", "hi"):
            rule = rules[f"{AXES[axis]}{side}"]
            bnd = g if side == "lo" else n - g - 1
            step = -1 if side == "lo" else 1
            if centering == "cell":
                for k in range(1, g + 1):
                    arr[_face_slices(nd, axis, bnd + step * k)] = arr[_face_slices(nd, axis, bnd)]
                continue
            if isinstance(rule, Dirichlet):
                arr[_face_slices(nd, axis, bnd)] = rule.value
                for k in range(1, g + 1):
                    arr[_face_slices(nd, axis, bnd + step * k)] = (
                        2.0 * arr[_face_slices(nd, axis, bnd)] - arr[_face_slices(nd, axis, bnd - step * k)]
                    )
            elif isinstance(rule, (Neumann, Traction)):
                for k in range(1, g + 1):
                    arr[_face_slices(nd, axis, bnd + step * k)] = arr[_face_slices(nd, axis, bnd - step * k)]
            else:
                raise ConfigurationError(f"unknown boundary rule {rule!r}")
    return arr


# ---------------------------------------------------------------------------
# Stencil helpers (interior arrays, spatial axes first)


def _avg(x: np.ndarray, axis: int) -> np.ndarray:
    lo = [slice(None)] * x.ndim
    hi = [slice(None)] * x.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (x[tuple(lo)] + x[tuple(hi)])


def _diff(x: np.ndarray, axis: int) -> np.ndarray:
    return np.diff(x, axis=axis)


def _pad_spatial(x: np.ndarray, ndim: int, mode: str = "constant") -> np.ndarray:
    widths = [(1, 1)] * ndim + [(0, 0)] * (x.ndim - ndim)
    return np.pad(x, widths, mode=mode)


def cell_to_node_avg(cf: np.ndarray, ndim: int | None = None) -> np.ndarray:
    """Node value = mean of the ``2**ndim`` adjacent cells (constant-extrapolated ghosts)."""
    ndim = cf.ndim if ndim is None else ndim
    out = _pad_spatial(cf, ndim, mode="edge")
    for a in range(ndim):
        out = _avg(out, a)
    return out


def node_to_cell_avg(nf: np.ndarray, ndim: int | None = None) -> np.ndarray:
    """Cell value = mean of its ``2**ndim`` corner nodes."""
    ndim = nf.ndim if ndim is None else ndim
    out = nf
    for a in range(ndim):
        out = _avg(out, a)
    return out


def grad_node_to_cell(nf: np.ndarray, dx: Sequence[float], ndim: int | None = None) -> np.ndarray:
    """Compact corner-difference gradient evaluated at cell centers.

    A trailing axis of length ``ndim`` is appended; for a vector field the
    result is ``G[..., i, j] = d u_i / d x_j``.  Exact for affine fields.
    """
    ndim = len(dx) if ndim is None else ndim
    comps = []
    for a in range(ndim):
        g = _diff(nf, a) / dx[a]
        for b in range(ndim):
            if b != a:
                g = _avg(g, b)
        comps.append(g)
    return np.stack(comps, axis=-1)


def div_cell_to_node(flux: np.ndarray, dx: Sequence[float]) -> np.ndarray:
    """Divergence at nodes of a cell flux whose last axis is the derivative direction.

    This is the negative adjoint of :func:`grad_node_to_cell` (per unit cell
    volume).  Cells outside the box contribute zero flux, so boundary nodes see
    a traction-free natural condition.
    """
    ndim = len(dx)
    out = None
    for a in range(ndim):
        f = flux[..., a]
        for b in range(ndim):
            if b != a:
                f = _spread(f, b)
        term = _diff_adjoint(f, a) / dx[a]
        out = term if out is None else out + term
    return out


def _shifted(shape, axis, grow=1):
    s = list(shape)
    s[axis] += grow
    return s


def _spread(f: np.ndarray, axis: int) -> np.ndarray:
    """Zero-padded midpoint average from cells to nodes along ``axis``."""
    out = np.zeros(_shifted(f.shape, axis), dtype=f.dtype)
    lo = [slice(None)] * f.ndim
    hi = [slice(None)] * f.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    half = 0.5 * f
    out[tuple(lo)] += half
    out[tuple(hi)] += half
    return out


def _diff_adjoint(f: np.ndarray, axis: int) -> np.ndarray:
    """Zero-padded difference ``f[k] - f[k-1]`` from cells to nodes along ``axis``."""
    out = np.zeros(_shifted(f.shape, axis), dtype=f.dtype)
    lo = [slice(None)] * f.ndim
    hi = [slice(None)] * f.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] += f
    out[tuple(hi)] -= f
    return out


def cell_laplacian_neumann(cf: np.ndarray, dx: Sequence[float]) -> np.ndarray:
    """Standard (2*ndim+1)-point Laplacian of a cell field with zero-gradient walls."""
    ndim = len(dx)
    p = _pad_spatial(cf, ndim, mode="edge")
    core = tuple(slice(1, -1) for _ in range(ndim))
    out = np.zeros_like(cf)
    for a in range(ndim):
        lo = list(core)
        hi = list(core)
        lo[a] = slice(None, -2)
        hi[a] = slice(2, None)
        out += (p[tuple(lo)] - 2.0 * cf + p[tuple(hi)]) / dx[a] ** 2
    return out


def cell_gradient_centered(cf: np.ndarray, dx: Sequence[float]) -> np.ndarray:
    """Centered-difference gradient of a cell field at cell centers (zero-gradient walls)."""
    ndim = len(dx)
    p = _pad_spatial(cf, ndim, mode="edge")
    core = tuple(slice(1, -1) for _ in range(ndim))
    comps = []
    for a in range(ndim):
        lo = list(core)
        hi = list(core)
        lo[a] = slice(None, -2)
        hi[a] = slice(2, None)
        comps.append((p[tuple(hi)] - p[tuple(lo)]) / (2.0 * dx[a]))
    return np.stack(comps, axis=-1)


def interior_l2_norm(nf, mask, threshold, grid: Grid, normalized=False) -> float:
    """Discrete L2 norm over nodes whose surrounding cell-average of ``mask`` is >= threshold.

    With ``normalized=True`` the sum is divided by the selected volume, so a
    field identically one has norm one.
    """
    node_mask = cell_to_node_avg(np.asarray(mask, dtype=float), grid.ndim) >= threshold
    if not node_mask.any():
        raise ValueError("interior_l2_norm: empty node selection")
    vals = np.asarray(nf)[node_mask]
    sq = np.sum(vals.reshape(len(vals), -1) ** 2)
    dv = grid.cell_volume
    if normalized:
        return float(np.sqrt(sq / node_mask.sum()))
    return float(np.sqrt(sq * dv))
