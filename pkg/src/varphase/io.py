"""Diagnostics CSV and legacy-VTK snapshot files."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, VarphaseError

__all__ = [
    "BINARY_COLUMNS",
    "TERNARY_COLUMNS",
    "OutputError",
    "VTKData",
    "diagnostics_row",
    "write_diagnostics_csv",
    "write_snapshot",
    "read_vtk",
]

BINARY_COLUMNS = (
    "t",
    "mass_total",
    "free_energy",
    "dissipation",
    "min_xi",
    "interface_width",
    "newton_iters",
    "min_x",
    "max_x",
)
TERNARY_COLUMNS = BINARY_COLUMNS + ("mass_x0", "mass_x1", "min_x0", "max_x0")

# VTK cell types for quadratic edges and triangles
_VTK_CELL_TYPE = {1: 21, 2: 22}


class OutputError(VarphaseError, OSError):
    """Writing or reading an artifact failed; the message names the path."""


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def diagnostics_row(record, ternary: bool) -> list[str]:
    solute = "x1" if ternary else "x"
    lo, hi = record.ranges[solute]
    row = [
        record.t,
        record.mass_total,
        record.free_energy,
        record.dissipation,
        record.min_xi,
        record.interface_width,
        int(record.newton_iters),
        lo,
        hi,
    ]
    if ternary:
        row += [record.mass["x0"], record.mass["x1"], *record.ranges["x0"]]
    return [_fmt(v) for v in row]


def write_diagnostics_csv(trajectory, path, ternary: bool | None = None) -> Path:
    """One row per trajectory record, 17 significant digits.

    ``ternary`` selects the column set; by default it is inferred from
    the first record (binary for an empty trajectory).
    """
    records = [r for r in getattr(trajectory, "records", trajectory) if r is not None]
    if ternary is None:
        ternary = bool(records) and "x0" in records[0].mass
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TERNARY_COLUMNS if ternary else BINARY_COLUMNS)
            for rec in records:
                writer.writerow(diagnostics_row(rec, ternary))
    except OSError as exc:
        raise OutputError(f"cannot write diagnostics to {path}: {exc.strerror or exc}") from exc
    return path


def _point_fields(system, state) -> list[tuple[str, np.ndarray]]:
    """Nodal arrays per layout field, vectors padded to three components."""
    n = system.scalar_space.n_scalar_dofs
    out = []
    for name, part in system.layout.split(np.asarray(state, dtype=float)).items():
        comps = part.size // n
        if comps == 1:
            out.append((name, part))
        else:
            vec = np.zeros((n, 3))
            vec[:, :comps] = part.reshape(comps, n).T
            out.append((name, vec))
    # reported affinity is the negated multiplier
    for name, values in list(out):
        if name.startswith("mu"):
            out.append(("affinity" + name[2:], -values))
    return out


def write_snapshot(system, state, path, t: float | None = None) -> Path:
    """Legacy ASCII VTK unstructured grid with P2 cells and nodal fields."""
    space = system.scalar_space
    dim = space.mesh.dimension
    if dim not in _VTK_CELL_TYPE:
        raise InvalidArgumentError(f"no VTK cell type for dimension {dim}")
    pts = np.zeros((space.n_scalar_dofs, 3))
    pts[:, :dim] = space.dof_coordinates
    cells = space.scalar_dofmap
    lines = ["# vtk DataFile Version 3.0", f"varphase snapshot t={_fmt(t)}", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {pts.shape[0]} double")
    lines += [" ".join(_fmt(v) for v in p) for p in pts]
    nloc = cells.shape[1]
    lines.append(f"CELLS {cells.shape[0]} {cells.shape[0] * (nloc + 1)}")
    lines += [f"{nloc} " + " ".join(str(int(i)) for i in c) for c in cells]
    lines.append(f"CELL_TYPES {cells.shape[0]}")
    lines += [str(_VTK_CELL_TYPE[dim])] * cells.shape[0]
    lines.append(f"POINT_DATA {pts.shape[0]}")
    for name, values in _point_fields(system, state):
        if values.ndim == 1:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(v) for v in values]
        else:
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(v) for v in row) for row in values]
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write snapshot to {path}: {exc.strerror or exc}") from exc
    return path


@dataclass
class VTKData:
    points: np.ndarray
    cells: list[np.ndarray]
    cell_types: np.ndarray
    point_data: dict[str, np.ndarray]


def read_vtk(path) -> VTKData:
    """Parse the legacy ASCII subset written by :func:`write_snapshot`."""
    path = Path(path)
    try:
        tokens = path.read_text().split("\n")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    lines = [ln.strip() for ln in tokens]
    i = 4
    points = cells = types = None
    data: dict[str, np.ndarray] = {}
    n_points = 0
    while i < len(lines):
        head = lines[i].split()
        i += 1
        if not head:
            continue
        key = head[0]
        if key == "POINTS":
            n_points = int(head[1])
            points = np.array([[float(v) for v in lines[i + k].split()] for k in range(n_points)])
            i += n_points
        elif key == "CELLS":
            n = int(head[1])
            cells = [np.array([int(v) for v in lines[i + k].split()[1:]]) for k in range(n)]
            i += n
        elif key == "CELL_TYPES":
            n = int(head[1])
            types = np.array([int(lines[i + k]) for k in range(n)])
            i += n
        elif key == "POINT_DATA":
            continue
        elif key == "SCALARS":
            i += 1  # LOOKUP_TABLE
            data[head[1]] = np.array([float(lines[i + k]) for k in range(n_points)])
            i += n_points
        elif key == "VECTORS":
            data[head[1]] = np.array([[float(v) for v in lines[i + k].split()] for k in range(n_points)])
            i += n_points
        else:
            raise OutputError(f"{path}: unsupported VTK section {key!r} at line {i}")
    if points is None or cells is None or types is None:
        raise OutputError(f"{path}: missing POINTS, CELLS or CELL_TYPES")
    return VTKData(points, cells, types, data)
