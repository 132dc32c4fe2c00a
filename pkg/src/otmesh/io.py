"""Serialisation: legacy-format VTK meshes and CSV diagnostic reports.

Meshes are written as ASCII legacy VTK unstructured grids with polygon
cells.  The title line carries the parameters needed to rebuild the mesh
object (geometry kind and size, base-mesh kind), so an exported pair of
base + adapted meshes is enough to recompute every diagnostic.  Planar
vertices are embedded at z = 0 and stay wrapped into the periodic box;
cells crossing the boundary therefore look stretched in a viewer but
round-trip exactly.

CSV reports use full double precision in scientific notation so repeated
serial runs diff clean.  Headers:

- ``convergence.csv``: n, initial_residual, one_plus_alpha
- ``equidistribution.csv``: distance, <coords>, cell_area, c_over_m, deviation
- ``spacing.csv``: distance, <coords>, spacing, reference
- ``orthogonality.csv``: distance, <coords>, nonorthogonality_deg
- ``skewness.csv``: distance, <coords>, skewness, fallback

where <coords> is ``x, y`` on the plane and ``lon_deg, lat_deg`` on the
sphere (cell centroids for cell rows, face centres for face rows), and
deviation is cell_area * m / (c * base_area) - 1.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .diagnostics import MeshQualityReport
from .mesh_core import PlanePeriodic, PolygonalSurfaceMesh, Sphere, TransportedMesh

__all__ = [
    "write_vtk",
    "read_vtk",
    "mesh_from_vtk",
    "transported_from_vtk",
    "export_csv_reports",
    "write_convergence_csv",
]

_F = "{:.17e}"
_VTK_POLYGON = 7


def _fmt(x: float) -> str:
    return _F.format(float(x))


# ---------------------------------------------------------------------------
# VTK


def _title(mesh, role: str) -> str:
    geo = mesh.geometry
    if geo.kind == "plane":
        size = f"lx={geo.lx!r} ly={geo.ly!r}"
    else:
        size = f"radius={geo.radius!r}"
    return f"otmesh geometry={geo.kind} {size} kind={mesh.kind} role={role}"


def write_vtk(path, mesh, cell_fields: dict[str, np.ndarray] | None = None,
              role: str = "base") -> Path:
    """Write a mesh (and optional per-cell scalar fields) as legacy VTK."""
    path = Path(path)
    pts = np.asarray(mesh.vertices, dtype=float)
    if pts.shape[1] == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
    lines = [
        "# vtk DataFile Version 3.0",
        _title(mesh, role),
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(pts)} double",
    ]
    lines += [" ".join(_fmt(c) for c in p) for p in pts]
    nv = mesh.cell_nv
    total = int(nv.sum()) + mesh.n_cells
    lines.append(f"CELLS {mesh.n_cells} {total}")
    for i in range(mesh.n_cells):
        ids = mesh.cell_vertices[i, :nv[i]]
        lines.append(" ".join(str(int(v)) for v in [nv[i], *ids]))
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += [str(_VTK_POLYGON)] * mesh.n_cells
    if cell_fields:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, values in cell_fields.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (mesh.n_cells,):
                raise ValueError(
                    f"cell field {name!r} has shape {values.shape}, "
                    f"expected ({mesh.n_cells},)")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [_fmt(v) for v in values]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
    return path


def read_vtk(path) -> tuple[dict, np.ndarray, list[list[int]], dict]:
    """Parse a legacy VTK unstructured grid written by :func:`write_vtk`.

    Returns (metadata, points (N, 3), cells, cell_data).
    """
    path = Path(path)
    tokens_meta: dict[str, str] = {}
    lines = path.read_text().splitlines()
    title = lines[1] if len(lines) > 1 else ""
    for tok in title.split()[1:]:
        if "=" in tok:
            k, v = tok.split("=", 1)
            tokens_meta[k] = v

    points = None
    cells: list[list[int]] = []
    cell_data: dict[str, np.ndarray] = {}
    i = 0
    n_cells = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0].upper()
        if key == "POINTS":
            n = int(parts[1])
            flat: list[float] = []
            i += 1
            while len(flat) < 3 * n:
                flat.extend(float(t) for t in lines[i].split())
                i += 1
            points = np.array(flat, dtype=float).reshape(n, 3)
        elif key == "CELLS":
            n_cells = int(parts[1])
            i += 1
            for _ in range(n_cells):
                row = [int(t) for t in lines[i].split()]
                if len(row) != row[0] + 1:
                    raise ValueError(f"{path}: malformed CELLS row {lines[i]!r}")
                cells.append(row[1:])
                i += 1
        elif key == "SCALARS":
            name = parts[1]
            i += 2  # skip LOOKUP_TABLE
            vals: list[float] = []
            while len(vals) < n_cells:
                vals.extend(float(t) for t in lines[i].split())
                i += 1
            cell_data[name] = np.array(vals, dtype=float)
        else:
            i += 1
    if points is None:
        raise ValueError(f"{path}: no POINTS section found")
    return tokens_meta, points, cells, cell_data


def _geometry_from_meta(meta: dict):
    kind = meta.get("geometry")
    if kind == "plane":
        return PlanePeriodic(float(meta["lx"]), float(meta["ly"]))
    if kind == "sphere":
        return Sphere(float(meta["radius"]))
    raise ValueError(f"VTK title does not describe an otmesh geometry: {meta}")


def mesh_from_vtk(path) -> PolygonalSurfaceMesh:
    """Rebuild a mesh object from an exported VTK file."""
    meta, points, cells, _ = read_vtk(path)
    geometry = _geometry_from_meta(meta)
    if geometry.kind == "plane":
        points = points[:, :2]
    return PolygonalSurfaceMesh(geometry, points, cells,
                                kind=meta.get("kind", ""))


def transported_from_vtk(path, base: PolygonalSurfaceMesh) -> TransportedMesh:
    """Rebuild a transported mesh from its VTK export and its base mesh."""
    meta, points, cells, _ = read_vtk(path)
    if base.geometry.kind == "plane":
        points = points[:, :2]
    nv = [len(c) for c in cells]
    same = (len(cells) == base.n_cells
            and all(n == base.cell_nv[i] for i, n in enumerate(nv))
            and all(list(base.cell_vertices[i, :n]) == cells[i]
                    for i, n in enumerate(nv)))
    if not same:
        raise ValueError(
            f"{path}: cell list does not match the base mesh; the adapted "
            "mesh must share the base topology")
    return TransportedMesh(base, points)


# ---------------------------------------------------------------------------
# CSV reports


def _coords_header(geometry) -> str:
    return "x,y" if geometry.kind == "plane" else "lon_deg,lat_deg"


def _coords(points: np.ndarray, geometry) -> np.ndarray:
    if geometry.kind == "plane":
        return np.asarray(points, dtype=float)
    p = np.asarray(points, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    lat = np.degrees(np.arcsin(np.clip(p[:, 2] / r, -1.0, 1.0)))
    lon = np.degrees(np.arctan2(p[:, 1], p[:, 0]))
    return np.column_stack([lon, lat])


def _write_rows(path: Path, header: str, columns: list[np.ndarray]) -> Path:
    rows = [header]
    for row in zip(*columns):
        rows.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(rows) + "\n")
    return path


def write_convergence_csv(path, residual_history, alpha_history) -> Path:
    path = Path(path)
    rows = ["n,initial_residual,one_plus_alpha"]
    for n, (res, alpha) in enumerate(zip(residual_history, alpha_history)):
        rows.append(f"{n},{_fmt(res)},{_fmt(alpha)}")
    path.write_text("\n".join(rows) + "\n")
    return path


def export_csv_reports(outdir, mesh, report: MeshQualityReport,
                       state=None) -> list[Path]:
    """Write the diagnostic CSV files for a mesh into a directory.

    ``state`` (a solver state with residual/relaxation histories) adds
    ``convergence.csv``.  Returns the written paths.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    geo = mesh.geometry
    cell_xy = _coords(mesh.cell_centroid, geo).T
    face_xy = _coords(mesh.face_centre, geo).T
    ch = _coords_header(geo)
    written = []

    if report.equidistribution is not None:
        c_over_m = report.c / report.monitor_cell
        written.append(_write_rows(
            outdir / "equidistribution.csv",
            f"distance,{ch},cell_area,c_over_m,deviation",
            [report.cell_distance, *cell_xy, report.cell_volume, c_over_m,
             report.equidistribution - 1.0]))
    written.append(_write_rows(
        outdir / "spacing.csv",
        f"distance,{ch},spacing,reference",
        [report.face_distance, *face_xy, report.spacing,
         report.spacing_reference]))
    written.append(_write_rows(
        outdir / "orthogonality.csv",
        f"distance,{ch},nonorthogonality_deg",
        [report.face_distance, *face_xy, report.nonorthogonality_deg]))
    written.append(_write_rows(
        outdir / "skewness.csv",
        f"distance,{ch},skewness,fallback",
        [report.face_distance, *face_xy, report.skewness,
         report.skew_fallback.astype(float)]))
    if state is not None:
        written.append(write_convergence_csv(
            outdir / "convergence.csv",
            state.residual_history, state.alpha_history))
    return written
