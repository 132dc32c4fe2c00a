"""Numpy fallback implementations of the geometry kernels.

Same signatures and conventions as the compiled ``_core`` extension:

- cell connectivity is padded: ``cell_vertices`` has shape (C, K) with -1
  fill past each cell's ``cell_nv`` count; vertex order is counterclockwise
  (seen from outside on the sphere).
- plane domains are periodic rectangles [-lx, lx) x [-ly, ly); all vertex
  differences are taken minimum-image.
- face vertex pairs are ordered as traversed by the owner cell, so the face
  area vector points out of the owner.
"""

from __future__ import annotations

import numpy as np


def _wrap(x: np.ndarray, half: float) -> np.ndarray:
    """Map values into [-half, half) (identity for in-range values)."""
    return x - 2.0 * half * np.floor((x + half) / (2.0 * half))


def _next_index(cell_nv: np.ndarray, k: int) -> np.ndarray:
    """Index of each polygon vertex's successor within the valid range."""
    j = np.arange(k)[None, :]
    return np.where(j + 1 < cell_nv[:, None], j + 1, 0)


def plane_cell_geometry(vertices: np.ndarray, cell_vertices: np.ndarray,
                        cell_nv: np.ndarray, lx: float, ly: float):
    """Signed areas and centroids of periodic planar polygons.

    Each cell is unwrapped about its first vertex (minimum image), the
    shoelace formula gives the signed area (positive when counterclockwise)
    and the polygon centroid; centroids are wrapped back into the domain.
    Returns (area (C,), centroid (C, 2)).
    """
    c, k = cell_vertices.shape
    idx = np.where(cell_vertices >= 0, cell_vertices, 0)
    pts = vertices[idx]                                    # (C, K, 2)
    mask = np.arange(k)[None, :] < cell_nv[:, None]
    ref = pts[:, 0:1, :]
    rel = pts - ref
    rel[..., 0] = _wrap(rel[..., 0], lx)
    rel[..., 1] = _wrap(rel[..., 1], ly)
    rel = np.where(mask[..., None], rel, 0.0)

    nxt = _next_index(cell_nv, k)
    rel_n = np.take_along_axis(rel, nxt[..., None], axis=1)
    cross = rel[..., 0] * rel_n[..., 1] - rel_n[..., 0] * rel[..., 1]
    cross = np.where(mask, cross, 0.0)
    area = 0.5 * cross.sum(axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        cx = np.sum((rel[..., 0] + rel_n[..., 0]) * cross, axis=1) / (6.0 * area)
        cy = np.sum((rel[..., 1] + rel_n[..., 1]) * cross, axis=1) / (6.0 * area)
    centroid = np.stack([cx, cy], axis=-1) + ref[:, 0, :]
    bad = area == 0.0
    if np.any(bad):
        centroid[bad] = ref[bad, 0, :]
    centroid[:, 0] = _wrap(centroid[:, 0], lx)
    centroid[:, 1] = _wrap(centroid[:, 1], ly)
    return area, centroid


def sphere_cell_geometry(vertices: np.ndarray, cell_vertices: np.ndarray,
                         cell_nv: np.ndarray, radius: float):
    """Signed areas and centroids of spherical polygons.

    Each cell is fanned from the normalised mean of its vertices; triangle
    areas are signed excesses (atan2 form), so non-convex transported cells
    are handled correctly.  The centroid is the area-weighted mean of the
    fan triangles' flat centroids, renormalised to the sphere.  Returns
    (area (C,), centroid (C, 3)).
    """
    c, k = cell_vertices.shape
    idx = np.where(cell_vertices >= 0, cell_vertices, 0)
    pts = vertices[idx].astype(float)                      # (C, K, 3)
    pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
    mask = np.arange(k)[None, :] < cell_nv[:, None]
    pts = np.where(mask[..., None], pts, 0.0)

    hint = pts.sum(axis=1) / cell_nv[:, None]
    hint /= np.linalg.norm(hint, axis=-1, keepdims=True)

    nxt = _next_index(cell_nv, k)
    p2 = pts
    p3 = np.take_along_axis(pts, nxt[..., None], axis=1)
    h = hint[:, None, :]
    num = np.sum(h * np.cross(p2, p3), axis=-1)
    den = 1.0 + np.sum(h * p2, axis=-1) + np.sum(p2 * p3, axis=-1) + np.sum(p3 * h, axis=-1)
    tri = np.where(mask, 2.0 * np.arctan2(num, den), 0.0)  # unit-sphere excess
    area = tri.sum(axis=1) * radius * radius

    flat = (h + p2 + p3) / 3.0
    cen = np.sum(tri[..., None] * flat, axis=1)
    norm = np.linalg.norm(cen, axis=-1, keepdims=True)
    bad = norm[:, 0] == 0.0
    norm[bad] = 1.0
    cen = cen / norm
    if np.any(bad):
        cen[bad] = hint[bad]
    return area, radius * cen


def plane_face_geometry(vertices: np.ndarray, face_vertices: np.ndarray,
                        owner: np.ndarray, neighbour: np.ndarray,
                        centroids: np.ndarray, lx: float, ly: float):
    """Face vectors and metrics on the periodic plane.

    Returns (s_vec (F,2), face_centre (F,2), d_vec (F,2), d_mag (F,),
    lam (F,)).  s_vec is the minimum-image edge rotated -90 deg ((x,y) ->
    (y,-x)), outward from the owner for counterclockwise cells; d_vec runs
    from owner centroid to neighbour centroid (minimum image); lam is the
    interpolation weight |face centre -> neighbour centroid| / |d|.
    """
    v1 = vertices[face_vertices[:, 0]]
    v2 = vertices[face_vertices[:, 1]]
    edge = v2 - v1
    edge[:, 0] = _wrap(edge[:, 0], lx)
    edge[:, 1] = _wrap(edge[:, 1], ly)
    s_vec = np.stack([edge[:, 1], -edge[:, 0]], axis=-1)

    fc = v1 + 0.5 * edge
    fc[:, 0] = _wrap(fc[:, 0], lx)
    fc[:, 1] = _wrap(fc[:, 1], ly)

    d_vec = centroids[neighbour] - centroids[owner]
    d_vec[:, 0] = _wrap(d_vec[:, 0], lx)
    d_vec[:, 1] = _wrap(d_vec[:, 1], ly)
    d_mag = np.linalg.norm(d_vec, axis=-1)

    fn = centroids[neighbour] - fc
    fn[:, 0] = _wrap(fn[:, 0], lx)
    fn[:, 1] = _wrap(fn[:, 1], ly)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.linalg.norm(fn, axis=-1) / d_mag
    return s_vec, fc, d_vec, d_mag, lam


def sphere_face_geometry(vertices: np.ndarray, face_vertices: np.ndarray,
                         owner: np.ndarray, neighbour: np.ndarray,
                         centroids: np.ndarray, radius: float):
    """Face vectors and metrics on the sphere.

    Returns (s_vec (F,3), face_centre (F,3), d_vec (F,3), d_mag (F,),
    lam (F,)).  |s_vec| is the great-circle edge length; its direction is
    tangent at the edge midpoint, perpendicular to the edge, outward from
    the owner (t x m for edge tangent t along owner traversal).  d_vec is
    the chord from owner to neighbour centroid while d_mag is the geodesic
    distance; lam uses geodesic distances.
    """
    p1 = vertices[face_vertices[:, 0]].astype(float)
    p2 = vertices[face_vertices[:, 1]].astype(float)
    p1h = p1 / np.linalg.norm(p1, axis=-1, keepdims=True)
    p2h = p2 / np.linalg.norm(p2, axis=-1, keepdims=True)

    cr = np.cross(p1h, p2h)
    sin_t = np.linalg.norm(cr, axis=-1)
    cos_t = np.sum(p1h * p2h, axis=-1)
    theta = np.arctan2(sin_t, cos_t)
    arc = radius * theta

    mid = p1h + p2h
    mid /= np.linalg.norm(mid, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        n_gc = cr / sin_t[:, None]                        # great-circle normal
    tang = np.cross(n_gc, mid)                            # along owner traversal
    s_dir = np.cross(tang, mid)                           # outward from owner
    s_vec = arc[:, None] * s_dir
    fc = radius * mid

    co = centroids[owner] / np.linalg.norm(centroids[owner], axis=-1, keepdims=True)
    cn = centroids[neighbour] / np.linalg.norm(centroids[neighbour], axis=-1, keepdims=True)
    d_vec = radius * (cn - co)
    cr2 = np.cross(co, cn)
    d_mag = radius * np.arctan2(np.linalg.norm(cr2, axis=-1), np.sum(co * cn, axis=-1))

    cr3 = np.cross(mid, cn)
    fn = radius * np.arctan2(np.linalg.norm(cr3, axis=-1), np.sum(mid * cn, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = fn / d_mag
    return s_vec, fc, d_vec, d_mag, lam
