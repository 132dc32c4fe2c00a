"""Polygonal surface meshes on the periodic plane and the sphere.

The mesh model is face-based, in the style of unstructured finite-volume
codes: a face is an edge between two vertices, owned by the lower-numbered
of its two cells; cell vertex lists run counterclockwise (seen from outside
on the sphere), and face k of a cell joins its vertices k and k+1.  All
topology is immutable after construction -- adaptation moves vertices only
-- and all geometry (areas, centroids, face vectors, interpolation weights)
lives in a cache that is recomputed in full from vertex positions.

Conventions:

- plane: periodic rectangle [-lx, lx) x [-ly, ly); every coordinate
  difference is minimum-image, and cached positions are wrapped into the
  fundamental domain.
- sphere: vertices lie on the sphere of the given radius; face "lengths"
  are great-circle arcs and distances are geodesic.
- face area vector S_f points out of the owner cell; d_f runs from owner
  centroid to neighbour centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateFace, InvalidPolygon, ZeroAreaCell
from .sphere_geometry import exp_map, unit

__all__ = [
    "PlanePeriodic",
    "Sphere",
    "PolygonalSurfaceMesh",
    "TransportedMesh",
    "CellScalarField",
    "VertexVectorField",
    "CellTensorField",
    "transport_vertices",
]


@dataclass(frozen=True)
class PlanePeriodic:
    """Doubly periodic rectangle [-lx, lx) x [-ly, ly)."""

    lx: float = 1.0
    ly: float = 1.0

    kind = "plane"
    dim = 2

    def wrap(self, pts: np.ndarray) -> np.ndarray:
        """Map points into the fundamental domain (identity if already in)."""
        out = np.array(pts, dtype=float)
        out[..., 0] -= 2.0 * self.lx * np.floor((out[..., 0] + self.lx) / (2.0 * self.lx))
        out[..., 1] -= 2.0 * self.ly * np.floor((out[..., 1] + self.ly) / (2.0 * self.ly))
        return out

    def min_image(self, d: np.ndarray) -> np.ndarray:
        """Minimum-image representative of coordinate differences."""
        return self.wrap(d)

    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.min_image(np.asarray(q, float) - np.asarray(p, float)), axis=-1)


@dataclass(frozen=True)
class Sphere:
    """Sphere of the given radius centred at the origin."""

    radius: float = 1.0

    kind = "sphere"
    dim = 3

    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        ph = unit(np.asarray(p, float))
        qh = unit(np.asarray(q, float))
        cross = np.linalg.norm(np.cross(ph, qh), axis=-1)
        dot = np.sum(ph * qh, axis=-1)
        return self.radius * np.arctan2(cross, dot)


def _pad_cells(cells) -> tuple[np.ndarray, np.ndarray]:
    """Pack a list of vertex-index sequences into (C, K) with -1 fill."""
    nv = np.array([len(c) for c in cells], dtype=np.int64)
    if np.any(nv < 3):
        raise InvalidPolygon("every cell needs at least 3 vertices")
    k = int(nv.max())
    padded = np.full((len(cells), k), -1, dtype=np.int64)
    for i, c in enumerate(cells):
        if len(set(c)) != len(c):
            raise InvalidPolygon(f"cell {i} repeats a vertex")
        padded[i, :len(c)] = c
    return padded, nv


class PolygonalSurfaceMesh:
    """A closed polygonal mesh (periodic plane or whole sphere).

    Constructed from counterclockwise per-cell vertex index lists; faces and
    owner/neighbour relations are derived here.  Every edge must be shared
    by exactly two cells with opposite traversal directions.
    """

    def __init__(self, geometry, vertices: np.ndarray, cells,
                 kind: str = "", generators: np.ndarray | None = None):
        self.geometry = geometry
        self.kind = kind
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        if vertices.ndim != 2 or vertices.shape[1] != geometry.dim:
            raise InvalidPolygon(
                f"vertices must have shape (V, {geometry.dim}), got {vertices.shape}")
        if geometry.kind == "plane":
            vertices = geometry.wrap(vertices)
        self.vertices = vertices
        self.generators = None if generators is None else np.asarray(generators, float)

        self.cell_vertices, self.cell_nv = _pad_cells(cells)
        if self.cell_vertices.max() >= len(vertices):
            raise InvalidPolygon("cell refers to a vertex that does not exist")
        self._build_topology()
        self._vertex_faces = None
        self._stencil_cache: dict = {}
        self.build_face_geometry()

    # -- topology ---------------------------------------------------------

    def _build_topology(self):
        n_cells, k = self.cell_vertices.shape
        by_edge: dict[tuple[int, int], list[tuple[int, int, int, int]]] = {}
        for i in range(n_cells):
            nv = int(self.cell_nv[i])
            for j in range(nv):
                v1 = int(self.cell_vertices[i, j])
                v2 = int(self.cell_vertices[i, (j + 1) % nv])
                by_edge.setdefault((min(v1, v2), max(v1, v2)), []).append((i, j, v1, v2))

        face_vertices = []
        face_owner = []
        face_neighbour = []
        cell_faces = np.full((n_cells, k), -1, dtype=np.int64)
        cell_face_sign = np.zeros((n_cells, k), dtype=np.float64)

        # Deterministic face order: first encounter while walking cells.
        fid_of: dict[tuple[int, int], int] = {}
        for i in range(n_cells):
            nv = int(self.cell_nv[i])
            for j in range(nv):
                v1 = int(self.cell_vertices[i, j])
                v2 = int(self.cell_vertices[i, (j + 1) % nv])
                key = (min(v1, v2), max(v1, v2))
                if key in fid_of:
                    continue
                users = by_edge[key]
                if len(users) != 2:
                    raise InvalidPolygon(
                        f"edge {key} is shared by {len(users)} cells; the surface must be closed")
                (ca, _, a1, a2), (cb, _, b1, b2) = users
                if (a1, a2) != (b2, b1):
                    raise InvalidPolygon(
                        f"cells {ca} and {cb} traverse edge {key} in the same direction; "
                        "cell orientations are inconsistent")
                if ca == cb:
                    raise InvalidPolygon(f"edge {key} appears twice in cell {ca}")
                fid = len(face_vertices)
                fid_of[key] = fid
                if ca < cb:
                    face_vertices.append((a1, a2))
                    face_owner.append(ca)
                    face_neighbour.append(cb)
                else:
                    face_vertices.append((b1, b2))
                    face_owner.append(cb)
                    face_neighbour.append(ca)
        for i in range(n_cells):
            nv = int(self.cell_nv[i])
            for j in range(nv):
                v1 = int(self.cell_vertices[i, j])
                v2 = int(self.cell_vertices[i, (j + 1) % nv])
                fid = fid_of[(min(v1, v2), max(v1, v2))]
                cell_faces[i, j] = fid
                cell_face_sign[i, j] = 1.0 if face_owner[fid] == i else -1.0

        self.face_vertices = np.array(face_vertices, dtype=np.int64)
        self.face_owner = np.array(face_owner, dtype=np.int64)
        self.face_neighbour = np.array(face_neighbour, dtype=np.int64)
        self.cell_faces = cell_faces
        self.cell_face_sign = cell_face_sign

    @property
    def n_cells(self) -> int:
        return len(self.cell_nv)

    @property
    def n_faces(self) -> int:
        return len(self.face_owner)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def vertex_faces(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded (V, max_vf) face ids per vertex plus counts."""
        if self._vertex_faces is None:
            lists: list[list[int]] = [[] for _ in range(self.n_vertices)]
            for f, (v1, v2) in enumerate(self.face_vertices):
                lists[v1].append(f)
                lists[v2].append(f)
            counts = np.array([len(l) for l in lists], dtype=np.int64)
            padded = np.full((self.n_vertices, int(counts.max())), -1, dtype=np.int64)
            for v, l in enumerate(lists):
                padded[v, :len(l)] = l
            self._vertex_faces = (padded, counts)
        return self._vertex_faces

    # -- geometry ---------------------------------------------------------

    def build_face_geometry(self):
        """Recompute the full geometry cache from current vertex positions."""
        cache = _compute_geometry(self.geometry, self.vertices, self)
        (self.cell_volume, self.cell_centroid, self.face_area_vec,
         self.face_area, self.face_centre, self.d_vec, self.d_mag, self.lam) = cache

    def closure_defects(self) -> np.ndarray:
        """|sum of outward S_f| per cell (tangential part on the sphere)."""
        return _closure_defects(self)

    def cell_perimeters(self) -> np.ndarray:
        acc = np.zeros(self.n_cells)
        np.add.at(acc, self.face_owner, self.face_area)
        np.add.at(acc, self.face_neighbour, self.face_area)
        return acc

    def centroid(self, i: int) -> np.ndarray:
        """Centroid of one cell; raises ZeroAreaCell when undefined."""
        if self.cell_volume[i] == 0.0:
            raise ZeroAreaCell(f"cell {i} has zero area")
        return self.cell_centroid[i]

    def cell_polygon(self, i: int) -> np.ndarray:
        """Vertex coordinates of cell i, unwrapped about its first vertex
        on the plane (sphere: positions as stored)."""
        ids = self.cell_vertices[i, :self.cell_nv[i]]
        pts = self.vertices[ids]
        if self.geometry.kind == "plane":
            ref = pts[0]
            return ref + self.geometry.min_image(pts - ref)
        return pts

    def adjacency_pairs(self) -> set[frozenset]:
        """Set of unordered owner/neighbour cell pairs (the mesh topology)."""
        return {frozenset((int(o), int(n)))
                for o, n in zip(self.face_owner, self.face_neighbour)}


class TransportedMesh:
    """The image of a computational mesh under a vertex displacement.

    Shares topology arrays with its base (never copied, never mutated) and
    carries its own vertex positions and geometry cache, rebuilt in full by
    ``rebuild_geometry``.
    """

    _TOPOLOGY = ("face_vertices", "face_owner", "face_neighbour",
                 "cell_vertices", "cell_nv", "cell_faces", "cell_face_sign")

    def __init__(self, base: PolygonalSurfaceMesh, vertices: np.ndarray):
        self.base = base
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        if vertices.shape != base.vertices.shape:
            raise InvalidPolygon(
                f"moved vertices must have shape {base.vertices.shape}, got {vertices.shape}")
        if base.geometry.kind == "plane":
            vertices = base.geometry.wrap(vertices)
        else:
            # Positions must already sit on the sphere (the exponential map
            # renormalises); renormalising here would perturb untouched
            # vertices and break bit-reproducibility of identity transports.
            r = np.linalg.norm(vertices, axis=-1)
            if np.any(np.abs(r - base.geometry.radius) > 1e-9 * base.geometry.radius):
                raise InvalidPolygon("moved vertices do not lie on the sphere")
        self.vertices = vertices
        self.rebuild_geometry()

    def __getattr__(self, name):
        if name in TransportedMesh._TOPOLOGY or name in (
                "geometry", "kind", "generators", "n_cells", "n_faces",
                "n_vertices", "vertex_faces"):
            return getattr(self.base, name)
        raise AttributeError(name)

    @classmethod
    def identity(cls, base: PolygonalSurfaceMesh) -> "TransportedMesh":
        return cls(base, base.vertices.copy())

    def rebuild_geometry(self):
        cache = _compute_geometry(self.base.geometry, self.vertices, self.base)
        (self.cell_volume, self.cell_centroid, self.face_area_vec,
         self.face_area, self.face_centre, self.d_vec, self.d_mag, self.lam) = cache

    def closure_defects(self) -> np.ndarray:
        return _closure_defects(self)

    def cell_perimeters(self) -> np.ndarray:
        acc = np.zeros(self.n_cells)
        np.add.at(acc, self.face_owner, self.face_area)
        np.add.at(acc, self.face_neighbour, self.face_area)
        return acc

    def centroid(self, i: int) -> np.ndarray:
        if self.cell_volume[i] == 0.0:
            raise ZeroAreaCell(f"cell {i} has zero area")
        return self.cell_centroid[i]

    def cell_polygon(self, i: int) -> np.ndarray:
        ids = self.cell_vertices[i, :self.cell_nv[i]]
        pts = self.vertices[ids]
        if self.geometry.kind == "plane":
            ref = pts[0]
            return ref + self.geometry.min_image(pts - ref)
        return pts

    def adjacency_pairs(self) -> set[frozenset]:
        return self.base.adjacency_pairs()


def _compute_geometry(geometry, vertices, topo):
    """Shared cache builder for base and transported meshes."""
    if geometry.kind == "plane":
        vol, cen = _kernels.plane_cell_geometry(
            vertices, topo.cell_vertices, topo.cell_nv, geometry.lx, geometry.ly)
        s_vec, fc, d_vec, d_mag, lam = _kernels.plane_face_geometry(
            vertices, topo.face_vertices, topo.face_owner, topo.face_neighbour,
            cen, geometry.lx, geometry.ly)
        s_mag = np.linalg.norm(s_vec, axis=-1)
    else:
        vol, cen = _kernels.sphere_cell_geometry(
            vertices, topo.cell_vertices, topo.cell_nv, geometry.radius)
        s_vec, fc, d_vec, d_mag, lam = _kernels.sphere_face_geometry(
            vertices, topo.face_vertices, topo.face_owner, topo.face_neighbour,
            cen, geometry.radius)
        s_mag = np.linalg.norm(s_vec, axis=-1)
    if np.any(s_mag == 0.0):
        f = int(np.argmin(s_mag))
        raise DegenerateFace(f"face {f} has zero length")
    return vol, cen, s_vec, s_mag, fc, d_vec, d_mag, lam


def _closure_defects(mesh) -> np.ndarray:
    dim = mesh.geometry.dim
    acc = np.zeros((mesh.n_cells, dim))
    np.add.at(acc, mesh.face_owner, mesh.face_area_vec)
    np.add.at(acc, mesh.face_neighbour, -mesh.face_area_vec)
    if mesh.geometry.kind == "sphere":
        nhat = unit(mesh.cell_centroid)
        acc = acc - np.sum(acc * nhat, axis=-1, keepdims=True) * nhat
    return np.linalg.norm(acc, axis=-1)


def transport_vertices(base: PolygonalSurfaceMesh,
                       displacement: np.ndarray) -> TransportedMesh:
    """Move every vertex along its displacement and rebuild geometry.

    On the plane the displacement is added and wrapped; on the sphere it
    must be tangent at each vertex and the vertex walks the geodesic of that
    length (exponential map).  A zero displacement reproduces the base
    vertex positions bit-for-bit.
    """
    displacement = np.asarray(displacement, dtype=float)
    if base.geometry.kind == "plane":
        moved = base.vertices + displacement
    else:
        moved = exp_map(base.vertices, displacement, base.geometry.radius)
    return TransportedMesh(base, moved)


@dataclass
class CellScalarField:
    """One finite value per cell of a mesh."""

    mesh: PolygonalSurfaceMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_cells,):
            raise ValueError(f"expected {self.mesh.n_cells} cell values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("cell values must be finite")
        self.values = v


@dataclass
class VertexVectorField:
    """One vector per vertex; tangent to the sphere where applicable.

    On the sphere, vectors are ambient 3-vectors whose radial component
    must vanish to round-off (checked against 1e-10 of the field scale).
    """

    mesh: PolygonalSurfaceMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        dim = self.mesh.geometry.dim
        if v.shape != (self.mesh.n_vertices, dim):
            raise ValueError(
                f"expected shape {(self.mesh.n_vertices, dim)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertex vectors must be finite")
        if self.mesh.geometry.kind == "sphere":
            nhat = unit(self.mesh.vertices)
            radial = np.abs(np.sum(v * nhat, axis=-1))
            scale = np.linalg.norm(v, axis=-1)
            tol = 1e-10 * max(1e-300, float(scale.max())) + 1e-300
            if np.any(radial > np.maximum(1e-10 * scale, tol)):
                raise ValueError("vertex vectors must be tangent to the sphere")
        self.values = v


@dataclass
class CellTensorField:
    """One 2x2 tensor per cell (planar meshes only)."""

    mesh: PolygonalSurfaceMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_cells, 2, 2):
            raise ValueError(
                f"expected shape {(self.mesh.n_cells, 2, 2)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("tensor values must be finite")
        self.values = v
