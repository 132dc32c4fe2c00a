"""Spherical Voronoi repair of distorted transported meshes.

Extreme compression can drive transported cells non-convex (or, numerically,
inverted).  Tessellating the sphere with the Voronoi diagram of the
transported cell centres replaces them with guaranteed-convex cells whose
areas stay close to the input's, at the price of possibly changing the
connectivity slightly.  The diagram is the convex-hull dual of the generator
points (hull facets are the Delaunay triangles on the sphere), computed by
scipy's SphericalVoronoi.

Two entry points:

- :func:`voronoi_of_cell_centres` tessellates from the transported cell
  centroids, run once on a finished mesh.
- :func:`move_generators_and_retessellate` moves the base mesh's own
  generating points with the exponential map of the cell-centre potential
  gradient and tessellates those, giving an alternative adapted mesh whose
  cells are exactly Voronoi.

Both report whether the cell connectivity differs from the input mesh and
the per-cell relative area change.  :func:`convexity_scan` is the detector
the repair exists for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import SphericalVoronoi, cKDTree

from .errors import DuplicateGenerators, UnsupportedGeometry
from .mesh_core import PolygonalSurfaceMesh, Sphere
from .operators import cell_centre_gradient_volume_weighted
from .sphere_geometry import exp_map, spherical_polygon_area, unit

__all__ = [
    "VoronoiResult",
    "voronoi_of_cell_centres",
    "move_generators_and_retessellate",
    "convexity_scan",
    "tessellate_sphere",
]

#: Vertices of the raw Voronoi diagram closer than this (relative to the
#: radius) are merged; degenerate generator rings (co-circular points)
#: produce several copies of the same circumcentre.
_VERTEX_MERGE_TOL = 1e-9


@dataclass(frozen=True)
class VoronoiResult:
    """A Voronoi tessellation compared against the mesh it was built from.

    ``mesh`` indexes its cells in generator order, so cell i of the new mesh
    corresponds to cell i of the input; ``generator_cells`` records that map
    explicitly.  ``area_change`` is |V_new - V_old| / V_old per cell.
    """

    mesh: PolygonalSurfaceMesh
    generator_cells: np.ndarray
    connectivity_changed: bool
    area_change: np.ndarray


def _require_sphere(geometry):
    if geometry.kind != "sphere":
        raise UnsupportedGeometry(
            "Voronoi post-processing tessellates the sphere only; the planar "
            "runs it repairs do not occur")


def _check_distinct(points: np.ndarray, radius: float):
    d, _ = cKDTree(points).query(points, k=2)
    nearest = d[:, 1].min()
    if nearest < 1e-12 * radius:
        raise DuplicateGenerators(
            f"generator points coincide (nearest pair {nearest:.3e} apart)")


def tessellate_sphere(points: np.ndarray, radius: float,
                      kind: str = "voronoi") -> PolygonalSurfaceMesh:
    """Voronoi tessellation of the sphere from generator points.

    Cells come out in generator order, traversed counterclockwise seen from
    outside.  Near-duplicate diagram vertices (from co-circular generator
    rings) are merged before the mesh is built.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    _check_distinct(points, radius)
    sv = SphericalVoronoi(points, radius=radius, center=np.zeros(3))
    sv.sort_vertices_of_regions()

    verts = sv.vertices
    parent = np.arange(len(verts))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return int(x)

    for i, j in cKDTree(verts).query_pairs(_VERTEX_MERGE_TOL * radius):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    remap = np.array([find(x) for x in range(len(verts))])

    cells = []
    for gid, region in enumerate(sv.regions):
        ids = [int(remap[v]) for v in region]
        ids = [v for k, v in enumerate(ids) if v != ids[k - 1]]  # cyclic dedup
        if spherical_polygon_area(verts[ids], points[gid], radius) < 0.0:
            ids.reverse()
        cells.append(ids)

    used = np.unique(np.concatenate([np.asarray(c) for c in cells]))
    compact = np.full(len(verts), -1)
    compact[used] = np.arange(len(used))
    cells = [[int(compact[v]) for v in c] for c in cells]

    return PolygonalSurfaceMesh(Sphere(radius), verts[used], cells,
                                kind=kind, generators=points)


def voronoi_of_cell_centres(transported) -> VoronoiResult:
    """Re-tessellate a transported mesh from its cell centroids.

    The result has one convex cell per input cell, in the same order; run it
    once on a finished mesh, never inside the solver loop.
    """
    _require_sphere(transported.geometry)
    radius = transported.geometry.radius
    mesh = tessellate_sphere(transported.cell_centroid, radius,
                             kind=transported.kind)
    return VoronoiResult(
        mesh=mesh,
        generator_cells=np.arange(mesh.n_cells),
        connectivity_changed=(mesh.adjacency_pairs()
                              != transported.adjacency_pairs()),
        area_change=np.abs(mesh.cell_volume - transported.cell_volume)
        / np.abs(transported.cell_volume),
    )


def move_generators_and_retessellate(mesh: PolygonalSurfaceMesh,
                                     phi: np.ndarray) -> VoronoiResult:
    """Transport the base mesh's generating points and re-tessellate.

    The generators move with the exponential map of the volume-weighted
    cell-centre gradient of ``phi`` (the same map that moves the vertices),
    and the moved points generate a fresh Voronoi mesh.  Edge swapping means
    the connectivity may legitimately differ from the input's.
    """
    _require_sphere(mesh.geometry)
    if mesh.generators is None:
        raise ValueError("mesh has no generator points to move")
    radius = mesh.geometry.radius
    phi = np.asarray(getattr(phi, "values", phi), dtype=float)
    grad = cell_centre_gradient_volume_weighted(phi, mesh)
    nhat = unit(mesh.generators)
    grad = grad - np.sum(grad * nhat, axis=-1, keepdims=True) * nhat
    moved = exp_map(mesh.generators, grad, radius)
    new = tessellate_sphere(moved, radius, kind=mesh.kind)
    return VoronoiResult(
        mesh=new,
        generator_cells=np.arange(new.n_cells),
        connectivity_changed=(new.adjacency_pairs() != mesh.adjacency_pairs()),
        area_change=np.abs(new.cell_volume - mesh.cell_volume)
        / np.abs(mesh.cell_volume),
    )


def convexity_scan(mesh, tolerance: float = 1e-10) -> np.ndarray:
    """Ids of non-convex or tangled cells.

    A cell is non-convex when the signed cross products of consecutive edge
    vectors change sign around the polygon (on the sphere the edges are
    projected to the tangent plane at the cell centroid first); cross
    products are normalised by the edge lengths, so ``tolerance`` is a sine
    of turn angle.  Cells with non-positive signed volume are tangled and
    always included.
    """
    on_sphere = mesh.geometry.kind == "sphere"
    bad = set(np.flatnonzero(mesh.cell_volume <= 0.0).tolist())
    for i in range(mesh.n_cells):
        poly = mesh.cell_polygon(i)
        edges = np.roll(poly, -1, axis=0) - poly
        if on_sphere:
            nhat = unit(mesh.cell_centroid[i])
            edges = edges - np.outer(edges @ nhat, nhat)
            e2 = np.roll(edges, -1, axis=0)
            turn = np.cross(edges, e2) @ nhat
        else:
            e2 = np.roll(edges, -1, axis=0)
            turn = edges[:, 0] * e2[:, 1] - edges[:, 1] * e2[:, 0]
        norm = np.linalg.norm(edges, axis=1) * np.linalg.norm(e2, axis=1)
        turn = turn / np.where(norm > 0.0, norm, 1.0)
        if (turn > tolerance).any() and (turn < -tolerance).any():
            bad.add(i)
    return np.array(sorted(bad), dtype=np.int64)
