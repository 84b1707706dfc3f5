"""VTK legacy ASCII snapshots and CSV diagnostics."""
import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from . import lagrange
from .errors import EvosurfError
from .geometry import ElementGeometry


@dataclass
class DiagnosticsRow:
    n: int
    t: float
    E_kin: float
    area: float
    div_error: float
    normal_error: float
    fp_iterations: int
    fp_residual: float
    div_residual: float
    wall_time_ms: float


ROW_FIELDS = [f.name for f in fields(DiagnosticsRow)]
_INT_FIELDS = {"n", "fp_iterations"}


class OutputError(EvosurfError, OSError):
    category = "io"


def _values_at_nodes(field, mesh):
    """Nodal values of ``field`` at the geometry (order-k) nodes."""
    k = mesh.order
    if field.space.order == k:
        return field.values
    geo = ElementGeometry(mesh, lagrange.reference_nodes(k))
    phi, _ = geo.basis(field.space.order)
    c = field.values[field.space.l2g]
    local = np.einsum("qn,en...->eq...", phi, c)
    out = np.empty((mesh.ref.dof_count(k),) + field.values.shape[1:])
    out[mesh.l2g.ravel()] = local.reshape((-1,) + field.values.shape[1:])
    return out


def _nodal_normals(mesh):
    geo = ElementGeometry(mesh, lagrange.reference_nodes(mesh.order))
    acc = np.zeros((mesh.ref.dof_count(mesh.order), 3))
    np.add.at(acc, mesh.l2g.ravel(), geo.normal_raw.reshape(-1, 3))
    return acc / np.linalg.norm(acc, axis=1, keepdims=True)


def write_vtk(mesh, fields, path):
    """Write a curved mesh as linear sub-triangles of its Lagrange lattice.

    ``fields`` maps names to DiscreteFields on ``mesh``.  Vector fields add
    their tangential part, its magnitude and normal component; a non-empty
    field list also adds the averaged nodal normal.
    """
    path = Path(path)
    fields = dict(fields or {})
    k = mesh.order
    pts = mesh.nodes
    sub = lagrange.lattice_triangles(k)
    cells = mesh.l2g[:, sub].reshape(-1, 3)
    lines = [
        "# vtk DataFile Version 3.0",
        "evosurf surface",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(pts)} double",
    ]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in pts.tolist()]
    lines.append(f"CELLS {len(cells)} {4 * len(cells)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in cells.tolist()]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += ["5"] * len(cells)
    if fields:
        nu = _nodal_normals(mesh)
        data = []
        for name, fld in fields.items():
            vals = _values_at_nodes(fld, mesh)
            if vals.ndim == 2:
                un = np.sum(vals * nu, axis=1)
                pu = vals - un[:, None] * nu
                data += [("VECTORS", name, vals), ("VECTORS", f"P{name}", pu),
                         ("SCALARS", f"P{name}_magnitude", np.linalg.norm(pu, axis=1)),
                         ("SCALARS", f"{name}_normal", un)]
            else:
                data.append(("SCALARS", name, vals))
        data.append(("VECTORS", "normal", nu))
        lines.append(f"POINT_DATA {len(pts)}")
        for kind, name, vals in data:
            if kind == "VECTORS":
                lines.append(f"VECTORS {name} double")
                lines += [f"{a!r} {b!r} {c!r}" for a, b, c in vals.tolist()]
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines += [repr(v) for v in vals.tolist()]
    try:
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _cell(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


class CsvWriter:
    """Streams DiagnosticsRows, flushing after every row."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self._fh = open(self.path, "w", newline="", encoding="ascii")
        except OSError as exc:
            raise OutputError(f"cannot write {self.path}: {exc}") from exc
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(ROW_FIELDS)

    def write(self, row):
        self._w.writerow([_cell(v) for v in astuple(row)])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(rows, path):
    with CsvWriter(path) as w:
        for row in rows:
            w.write(row)
    return Path(path)


def read_csv(path):
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        return [
            DiagnosticsRow(**{k: (int(v) if k in _INT_FIELDS else float(v)) for k, v in r.items()})
            for r in reader
        ]
