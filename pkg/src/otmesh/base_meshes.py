"""Builders for the two computational base meshes.

- ``SquareGrid(n)``: n x n uniform squares tiling the doubly periodic
  rectangle [-1, 1) x [-1, 1).
- ``HexIcosahedron(n, radius)``: the dual of an icosahedron bisected n
  times, i.e. a quasi-uniform mesh of 10*4^n + 2 cells of which exactly 12
  are pentagons and the rest hexagons.  Cells are Voronoi polygons around
  the triangulation vertices (circumcentre dual), so face vectors are
  parallel to the generator-to-generator geodesics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh_core import PlanePeriodic, PolygonalSurfaceMesh, Sphere
from .sphere_geometry import tangent_basis, unit

__all__ = ["SquareGrid", "HexIcosahedron", "build_base_mesh"]


@dataclass(frozen=True)
class SquareGrid:
    """n x n squares on the periodic plane [-1, 1)^2; n in [4, 4096]."""

    n: int

    def __post_init__(self):
        if not (4 <= self.n <= 4096):
            raise ValueError(f"square grid size must be in [4, 4096], got {self.n}")


@dataclass(frozen=True)
class HexIcosahedron:
    """Hexagonal icosahedron from n bisections; n in [1, 8]."""

    n: int
    radius: float = 1.0

    def __post_init__(self):
        if not (1 <= self.n <= 8):
            raise ValueError(f"bisection count must be in [1, 8], got {self.n}")
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")


def build_base_mesh(spec) -> PolygonalSurfaceMesh:
    """Construct the mesh described by a base-mesh spec."""
    if isinstance(spec, SquareGrid):
        return _build_square_grid(spec.n)
    if isinstance(spec, HexIcosahedron):
        return _build_hex_icosahedron(spec.n, spec.radius)
    raise TypeError(f"unknown base mesh spec {spec!r}")


def _build_square_grid(n: int) -> PolygonalSurfaceMesh:
    h = 2.0 / n
    ij = np.arange(n)
    xs = -1.0 + h * ij
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])  # id = j*n + i

    def vid(i, j):
        return (j % n) * n + (i % n)

    cells = []
    for j in range(n):
        for i in range(n):
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return PolygonalSurfaceMesh(PlanePeriodic(1.0, 1.0), vertices, cells,
                                kind="square-grid")


# -- hexagonal icosahedron --------------------------------------------------

def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    """Unit icosahedron with a vertex at the north pole.

    Rings sit at latitude +/- atan(1/2); longitudes are 72 k degrees on the
    upper ring and 36 + 72 k on the lower, fixing a deterministic mesh.
    """
    z = 1.0 / np.sqrt(5.0)
    r = 2.0 / np.sqrt(5.0)
    verts = [np.array([0.0, 0.0, 1.0])]
    for k in range(5):
        lon = np.deg2rad(72.0 * k)
        verts.append(np.array([r * np.cos(lon), r * np.sin(lon), z]))
    for k in range(5):
        lon = np.deg2rad(36.0 + 72.0 * k)
        verts.append(np.array([r * np.cos(lon), r * np.sin(lon), -z]))
    verts.append(np.array([0.0, 0.0, -1.0]))
    verts = np.array(verts)

    tris = []
    for k in range(5):
        a, b = 1 + k, 1 + (k + 1) % 5
        c, d = 6 + k, 6 + (k + 1) % 5
        tris.append((0, a, b))       # top fan
        tris.append((a, c, b))       # upper band
        tris.append((b, c, d))       # lower band
        tris.append((11, d, c))      # bottom fan
    tris = np.array(tris, dtype=np.int64)

    # Fix all triangles counterclockwise seen from outside.
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    flip = np.sum(a * np.cross(b, c), axis=-1) < 0.0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return verts, tris


def _bisect(verts: np.ndarray, tris: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One edge-bisection refinement; midpoints projected onto the sphere."""
    verts = list(verts)
    midpoint: dict[tuple[int, int], int] = {}

    def mid(i, j):
        key = (min(i, j), max(i, j))
        if key not in midpoint:
            m = verts[i] + verts[j]
            verts.append(m / np.linalg.norm(m))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    out = []
    for a, b, c in tris:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return np.array(verts), np.array(out, dtype=np.int64)


def _build_hex_icosahedron(n: int, radius: float) -> PolygonalSurfaceMesh:
    verts, tris = _icosahedron()
    for _ in range(n):
        verts, tris = _bisect(verts, tris)
    verts = unit(verts)

    # Dual vertices: circumcentres of the primal triangles, oriented outward.
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    cc = np.cross(b - a, c - a)
    cc = unit(cc)
    inward = np.sum(cc * (a + b + c), axis=-1) < 0.0
    cc[inward] *= -1.0

    # Triangles around each primal vertex, sorted counterclockwise in the
    # tangent plane -> one dual cell per primal vertex.
    v_tris: list[list[int]] = [[] for _ in range(len(verts))]
    for t, (i, j, k) in enumerate(tris):
        v_tris[i].append(t)
        v_tris[j].append(t)
        v_tris[k].append(t)

    e1, e2 = tangent_basis(verts)
    cells = []
    for v, incident in enumerate(v_tris):
        rel = cc[incident]
        ang = np.arctan2(rel @ e2[v], rel @ e1[v])
        order = np.argsort(ang)
        cells.append([incident[o] for o in order])

    return PolygonalSurfaceMesh(Sphere(radius), radius * cc, cells,
                                kind="hex-icosahedron",
                                generators=radius * verts)
