"""Run logs, CSV tables and legacy-VTK structured-points output."""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path
from typing import Mapping

import numpy as np

from .mesh import Grid


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class RunLog:
    """Ordered table of per-step scalars plus free-form metadata."""

    def __init__(self, columns, name="log"):
        self.columns = list(columns)
        self.name = name
        self.rows = []
        self.meta = {}

    def append(self, **values):
        missing = set(self.columns) - set(values)
        extra = set(values) - set(self.columns)
        if missing or extra:
            raise KeyError(f"row mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        self.rows.append([values[c] for c in self.columns])

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv())


def write_csv(path, columns, rows):
    """Write plain rows (e.g. a line probe ``x, value``)."""
    log = RunLog(columns)
    for r in rows:
        log.rows.append(list(r))
    log.write_csv(path)


def write_vtk(path, grid: Grid, point_data: Mapping = None, cell_data: Mapping = None, title="sbmech"):
    """Legacy ASCII ``STRUCTURED_POINTS`` file with node (POINT_DATA) and cell (CELL_DATA) fields.

    Scalars are written as ``SCALARS``; 2- or 3-component vectors as
    ``VECTORS`` (2-D vectors padded with a zero z component); tensors are
    flattened into per-component scalars ``name_ij``.
    """
    nd = grid.ndim
    dims = list(grid.node_shape) + [1] * (3 - nd)
    origin = list(grid.lo) + [0.0] * (3 - nd)
    spacing = list(grid.dx) + [1.0] * (3 - nd)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(d) for d in dims),
        "ORIGIN " + " ".join(repr(float(v)) for v in origin),
        "SPACING " + " ".join(repr(float(v)) for v in spacing),
    ]

    def emit(section, data, shape):
        if not data:
            return
        npts = int(np.prod(shape))
        lines.append(f"{section} {npts}")
        for name, arr in data.items():
            a = np.asarray(arr, dtype=float)
            comp_shape = a.shape[nd:]
            if a.shape[:nd] != tuple(shape):
                raise ValueError(f"field '{name}' has spatial shape {a.shape[:nd]}, expected {tuple(shape)}")
            # x varies fastest in VTK ordering
            flat = np.transpose(a, tuple(reversed(range(nd))) + tuple(range(nd, a.ndim))).reshape(npts, -1)
            if comp_shape == ():
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(repr(float(v)) for v in flat[:, 0])
            elif len(comp_shape) == 1 and comp_shape[0] in (2, 3):
                vec = np.zeros((npts, 3))
                vec[:, : comp_shape[0]] = flat
                lines.append(f"VECTORS {name} double")
                lines.extend(" ".join(repr(float(v)) for v in row) for row in vec)
            else:
                for k, idx in enumerate(np.ndindex(*comp_shape)):
                    lines.append(f"SCALARS {name}_{''.join(str(i) for i in idx)} double 1")
                    lines.append("LOOKUP_TABLE default")
                    lines.extend(repr(float(v)) for v in flat[:, k])

    emit("POINT_DATA", point_data, grid.node_shape)
    emit("CELL_DATA", cell_data, grid.cell_shape)
    Path(path).write_text("\n".join(lines) + "\n")
