"""Mesh quality metrics and equidistribution reports.

All metrics act on a transported (or base) mesh's cached geometry:

- non-orthogonality per face: the angle in degrees between the face area
  vector S and the centre-to-centre vector d, computed as
  atan2(|S x d|, S . d) so exactly parallel vectors give exactly zero
  (arccos of a rounded dot product cannot).  On the sphere both vectors are
  projected into the tangent plane at the face centre first.
- skewness per face: |crossing - face centre| / |d|, where "crossing" is
  the intersection of the d-line with the face; if they do not intersect
  within the face (or are parallel), the nearest face endpoint is used and
  the face is flagged.
- equidistribution: V_x * m / (c * V_xi) per cell, 1 everywhere at perfect
  adaptation (cell areas scale as c/m relative to their base areas).
- spacing: |d| per face against the monitor-implied reference,
  sqrt(c Vbar / m) for quadrilateral meshes and
  sqrt(2 c Vbar tan(pi/3) / (3 m)) for hexagonal ones -- the
  centre-to-centre distance of a regular cell of area c Vbar / m, with
  Vbar the mean base cell volume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .monitor import evaluate_monitor, monitor_centre
from .sphere_geometry import tangent_basis, unit

__all__ = [
    "nonorthogonality_deg",
    "max_nonorthogonality_deg",
    "skewness",
    "spacing_reference",
    "MeshQualityReport",
    "build_quality_report",
]


def nonorthogonality_deg(mesh) -> np.ndarray:
    """Angle between each face's area vector and its d vector, degrees."""
    s = mesh.face_area_vec
    d = mesh.d_vec
    if mesh.geometry.kind == "sphere":
        nhat = unit(mesh.face_centre)
        s = s - np.sum(s * nhat, axis=-1, keepdims=True) * nhat
        d = d - np.sum(d * nhat, axis=-1, keepdims=True) * nhat
        cross = np.linalg.norm(np.cross(s, d), axis=-1)
    else:
        cross = np.abs(s[:, 0] * d[:, 1] - s[:, 1] * d[:, 0])
    dot = np.sum(s * d, axis=-1)
    return np.rad2deg(np.arctan2(cross, dot))


def max_nonorthogonality_deg(mesh) -> float:
    return float(np.max(nonorthogonality_deg(mesh)))


def _face_frame(mesh):
    """2-D coordinates of face endpoints and adjacent centroids.

    Plane: minimum-image coordinates about the face centre.  Sphere:
    orthographic projection into the tangent plane at the face centre.
    Returns (v1, v2, co, cn) each of shape (F, 2).
    """
    fv = mesh.face_vertices
    if mesh.geometry.kind == "plane":
        geo = mesh.geometry
        fc = mesh.face_centre
        v1 = geo.min_image(mesh.vertices[fv[:, 0]] - fc)
        v2 = geo.min_image(mesh.vertices[fv[:, 1]] - fc)
        co = geo.min_image(mesh.cell_centroid[mesh.face_owner] - fc)
        cn = geo.min_image(mesh.cell_centroid[mesh.face_neighbour] - fc)
        return v1, v2, co, cn
    nhat = unit(mesh.face_centre)
    e1, e2 = tangent_basis(mesh.face_centre)

    def proj(p):
        rel = p - mesh.face_centre
        return np.stack([np.sum(rel * e1, axis=-1), np.sum(rel * e2, axis=-1)], axis=-1)

    return (proj(mesh.vertices[fv[:, 0]]), proj(mesh.vertices[fv[:, 1]]),
            proj(mesh.cell_centroid[mesh.face_owner]),
            proj(mesh.cell_centroid[mesh.face_neighbour]))


def skewness(mesh) -> tuple[np.ndarray, np.ndarray]:
    """Per-face skewness and a flag for faces that needed the endpoint
    fallback (d-line missing the face or parallel to it)."""
    v1, v2, co, cn = _face_frame(mesh)
    e = v2 - v1
    d = cn - co
    r = v1 - co
    denom = d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]
    dxr = d[:, 0] * r[:, 1] - d[:, 1] * r[:, 0]
    scale = np.linalg.norm(d, axis=-1) * np.linalg.norm(e, axis=-1)
    parallel = np.abs(denom) <= 1e-14 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(parallel, 0.5, -dxr / np.where(parallel, 1.0, denom))
    outside = (u < 0.0) | (u > 1.0)
    u_c = np.clip(np.where(parallel, np.nan, u), 0.0, 1.0)
    u_c = np.where(parallel, _nearest_endpoint(v1, v2), u_c)
    crossing = v1 + u_c[:, None] * e
    centre = v1 + 0.5 * e
    ds = np.linalg.norm(crossing - centre, axis=-1)
    d_mag = mesh.d_mag
    skew = ds / d_mag
    return skew, parallel | outside


def _nearest_endpoint(v1, v2) -> np.ndarray:
    """Parameter (0 or 1) of the endpoint nearer the origin of the frame."""
    return np.where(np.linalg.norm(v1, axis=-1) <= np.linalg.norm(v2, axis=-1),
                    0.0, 1.0)


def spacing_reference(m: np.ndarray, c: float, base_kind: str,
                      mean_base_volume: float = 1.0) -> np.ndarray:
    """Monitor-implied centre-to-centre spacing for a given cell shape.

    A cell at monitor value m should occupy the area c * Vbar / m, where
    Vbar is the mean base cell volume; the reference spacing is the
    centre-to-centre distance of a regular cell of that area.
    """
    area = c * mean_base_volume / m
    if base_kind == "square-grid":
        return np.sqrt(area)
    return np.sqrt(2.0 * area * np.tan(np.pi / 3.0) / 3.0)


@dataclass
class MeshQualityReport:
    """Per-face and per-cell quality arrays plus scalar summaries."""

    nonorthogonality_deg: np.ndarray
    skewness: np.ndarray
    skew_fallback: np.ndarray
    face_distance: np.ndarray
    spacing: np.ndarray
    spacing_reference: np.ndarray
    cell_distance: np.ndarray
    cell_volume: np.ndarray
    equidistribution: np.ndarray | None
    c: float | None = None
    monitor_cell: np.ndarray | None = None

    def summary(self) -> dict:
        out = {
            "max_nonorthogonality_deg": float(self.nonorthogonality_deg.max()),
            "mean_nonorthogonality_deg": float(self.nonorthogonality_deg.mean()),
            "max_skewness": float(self.skewness.max()),
            "skew_fallback_count": int(self.skew_fallback.sum()),
            "anisotropy_max_ratio": _anisotropy(self.face_distance, self.spacing),
        }
        if self.equidistribution is not None:
            dev = np.abs(self.equidistribution - 1.0)
            out["max_equidistribution_deviation"] = float(dev.max())
            out["median_equidistribution_deviation"] = float(np.median(dev))
        return out


def _anisotropy(distance: np.ndarray, spacing: np.ndarray, bins: int = 10) -> float:
    """Worst max/min spacing ratio among faces at comparable distances."""
    edges = np.linspace(distance.min(), distance.max() * (1 + 1e-12), bins + 1)
    worst = 1.0
    idx = np.digitize(distance, edges) - 1
    for b in range(bins):
        sel = spacing[idx == b]
        if len(sel) >= 2 and sel.min() > 0:
            worst = max(worst, float(sel.max() / sel.min()))
    return worst


def build_quality_report(mesh, monitor=None, c: float | None = None,
                         base_kind: str | None = None) -> MeshQualityReport:
    """Assemble all quality metrics for a mesh.

    ``monitor`` and ``c`` enable the equidistribution and spacing-reference
    columns; distances are measured from the monitor centre (origin/pole
    when absent).
    """
    geo = mesh.geometry
    if monitor is not None:
        centre = monitor_centre(monitor, geo)
    else:
        centre = np.zeros(2) if geo.kind == "plane" else np.array(
            [0.0, 0.0, geo.radius])
    face_dist = geo.distance(centre, mesh.face_centre)
    cell_dist = geo.distance(centre, mesh.cell_centroid)
    kind = base_kind or getattr(mesh, "kind", "") or "hex-icosahedron"

    if monitor is not None and c is not None:
        base = getattr(mesh, "base", mesh)
        m_face = evaluate_monitor(monitor, mesh.face_centre, geo)
        m_cell = evaluate_monitor(monitor, mesh.cell_centroid, geo)
        ref = spacing_reference(m_face, c, kind,
                                float(base.cell_volume.mean()))
        equi = mesh.cell_volume * m_cell / (c * base.cell_volume)
    else:
        m_cell = None
        ref = np.full(mesh.n_faces, np.nan)
        equi = None

    skew, fallback = skewness(mesh)
    return MeshQualityReport(
        nonorthogonality_deg=nonorthogonality_deg(mesh),
        skewness=skew,
        skew_fallback=fallback,
        face_distance=face_dist,
        spacing=mesh.d_mag.copy(),
        spacing_reference=ref,
        cell_distance=cell_dist,
        cell_volume=mesh.cell_volume.copy(),
        equidistribution=equi,
        c=c,
        monitor_cell=m_cell,
    )
