"""Finite-volume operators on polygonal surface meshes.

All operators discretise fields stored at cell centres of the (fixed)
computational mesh.  Face-based quantities use the owner->neighbour
orientation; every formula below is written so that flipping a face's
orientation leaves cell-level results unchanged.

- ``face_normal_gradient``: (phi_N - phi_O) / |d_f|.
- ``assemble_laplacian``: per-cell divergence of face normal gradients,
  (1/V_i) sum_f |S_f| grad_nf(phi); assembled once per mesh as a symmetric
  volume-integrated sparse matrix.
- ``cell_lsq_gradient``: least-squares fit over a cell's faces,
  (sum_f s_hat_f s_f^T)^-1 sum_f grad_nf(phi) s_f.
- ``face_gradient``: distance-weighted interpolation of the two adjacent
  cell gradients plus a correction that makes dot(grad_f, s_hat) equal the
  face normal gradient exactly.
- ``fd_hessian``: (1/V_i) sum_f grad_f(phi) outer S_f (plane only); its
  trace reproduces the Laplacian by construction.
- ``vertex_gradient``: least-squares reconstructions at vertices with three
  stencil sizes (``small``, ``goldilocks``, ``large``).
- ``solve_poisson``: Jacobi-preconditioned conjugate gradients with an
  L1-relative residual metric, sum|b - A phi| / sum(|b| + |A phi|), as the
  stopping rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (DegenerateCellGeometry, DegenerateVertexStencil,
                     IncompatibleRHS, LinearSolveDiverged, UnsupportedGeometry)
from .sphere_geometry import tangent_basis, unit

__all__ = [
    "SparseOperator",
    "PoissonSolveInfo",
    "face_normal_gradient",
    "assemble_laplacian",
    "cell_lsq_gradient",
    "face_gradient",
    "fd_hessian",
    "vertex_gradient",
    "cell_centre_gradient_volume_weighted",
    "vertex_stencil",
    "residual_metric",
    "solve_poisson",
]

_COND_LIMIT = 1e8


@dataclass
class SparseOperator:
    """A symmetric volume-integrated operator: matrix @ phi = V * (op phi).

    ``apply`` returns the per-volume action (e.g. the Laplacian of phi);
    ``scaled`` returns the operator multiplied by a scalar.
    """

    matrix: sp.csr_matrix
    volumes: np.ndarray

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return (self.matrix @ phi) / self.volumes

    def scaled(self, factor: float) -> "SparseOperator":
        return SparseOperator(self.matrix * factor, self.volumes)


@dataclass
class PoissonSolveInfo:
    initial_residual: float
    final_residual: float
    iterations: int


def face_normal_gradient(phi: np.ndarray, mesh) -> np.ndarray:
    """Normal derivative at each face, (phi_neighbour - phi_owner)/|d_f|."""
    return (phi[mesh.face_neighbour] - phi[mesh.face_owner]) / mesh.d_mag


def assemble_laplacian(mesh) -> SparseOperator:
    """Divergence of face normal gradients as a sparse symmetric operator.

    Row i of the matrix holds |S_f|/|d_f| couplings to each neighbour of
    cell i and their negated sum on the diagonal; dividing by V_i gives the
    finite-volume Laplacian.  Cached on the mesh.
    """
    cached = mesh._stencil_cache.get("laplacian")
    if cached is not None:
        return cached
    w = mesh.face_area / mesh.d_mag
    o = mesh.face_owner
    n = mesh.face_neighbour
    c = mesh.n_cells
    rows = np.concatenate([o, n, o, n])
    cols = np.concatenate([n, o, o, n])
    vals = np.concatenate([w, w, -w, -w])
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(c, c)).tocsr()
    op = SparseOperator(matrix, mesh.cell_volume.copy())
    mesh._stencil_cache["laplacian"] = op
    return op


def _cell_lsq_inverses(mesh):
    """Per-cell inverse of sum_f s_hat s^T, in tangent coordinates on the
    sphere; cached."""
    cached = mesh._stencil_cache.get("cell_lsq")
    if cached is not None:
        return cached
    c = mesh.n_cells
    kmax = mesh.cell_faces.shape[1]
    fidx = np.where(mesh.cell_faces >= 0, mesh.cell_faces, 0)
    mask = np.arange(kmax)[None, :] < mesh.cell_nv[:, None]
    s = mesh.face_area_vec[fidx]                       # (C, K, dim)
    smag = mesh.face_area[fidx]
    if mesh.geometry.kind == "sphere":
        e1, e2 = tangent_basis(mesh.cell_centroid)
        s = np.stack([np.sum(s * e1[:, None, :], axis=-1),
                      np.sum(s * e2[:, None, :], axis=-1)], axis=-1)
        basis = (e1, e2)
    else:
        basis = None
    shat = s / smag[..., None]
    m = np.einsum("cki,ckj,ck->cij", shat, s, mask.astype(float))
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    tr = m[:, 0, 0] + m[:, 1, 1]
    # eigenvalues of a symmetric-ish 2x2 for a condition estimate
    disc = np.sqrt(np.maximum((tr / 2) ** 2 - det, 0.0))
    lam_min = tr / 2 - disc
    lam_max = tr / 2 + disc
    if np.any(lam_min <= lam_max / _COND_LIMIT):
        i = int(np.argmin(lam_min - lam_max / _COND_LIMIT))
        raise DegenerateCellGeometry(f"cell {i} has a singular gradient matrix")
    inv = np.empty_like(m)
    inv[:, 0, 0] = m[:, 1, 1] / det
    inv[:, 1, 1] = m[:, 0, 0] / det
    inv[:, 0, 1] = -m[:, 0, 1] / det
    inv[:, 1, 0] = -m[:, 1, 0] / det
    cached = (inv, fidx, mask, basis)
    mesh._stencil_cache["cell_lsq"] = cached
    return cached


def cell_lsq_gradient(phi: np.ndarray, mesh) -> np.ndarray:
    """Least-squares gradient per cell from face normal gradients.

    Orientation-free: grad_nf and S_f flip sign together, so their product
    is the same seen from either side.  On the sphere the fit is done in
    the tangent plane of the cell centroid and returned as a tangent
    3-vector.
    """
    inv, fidx, mask, basis = _cell_lsq_inverses(mesh)
    g_nf = face_normal_gradient(phi, mesh)[fidx] * mask  # (C, K)
    s = mesh.face_area_vec[fidx]
    if basis is not None:
        e1, e2 = basis
        s = np.stack([np.sum(s * e1[:, None, :], axis=-1),
                      np.sum(s * e2[:, None, :], axis=-1)], axis=-1)
    rhs = np.sum(g_nf[..., None] * s, axis=1)            # (C, 2)
    g = np.einsum("cij,cj->ci", inv, rhs)
    if basis is not None:
        e1, e2 = basis
        return g[:, 0:1] * e1 + g[:, 1:2] * e2
    return g


def face_gradient(phi: np.ndarray, mesh) -> np.ndarray:
    """Full gradient at faces: interpolated cell gradients plus a normal
    correction so that dot(grad_f, s_hat_f) == grad_nf exactly."""
    gc = cell_lsq_gradient(phi, mesh)
    lam = mesh.lam[:, None]
    gp = lam * gc[mesh.face_owner] + (1.0 - lam) * gc[mesh.face_neighbour]
    shat = mesh.face_area_vec / mesh.face_area[:, None]
    gn = face_normal_gradient(phi, mesh)
    corr = gn - np.sum(gp * shat, axis=-1)
    return gp + corr[:, None] * shat


def fd_hessian(phi: np.ndarray, mesh) -> np.ndarray:
    """Finite-difference Hessian per cell, (1/V_i) sum_f grad_f outer S_f
    with S_f outward.  Planar meshes only; trace equals the Laplacian."""
    if mesh.geometry.kind != "plane":
        raise UnsupportedGeometry("the finite-difference Hessian is planar only")
    gf = face_gradient(phi, mesh)
    fidx = np.where(mesh.cell_faces >= 0, mesh.cell_faces, 0)
    kmax = fidx.shape[1]
    mask = np.arange(kmax)[None, :] < mesh.cell_nv[:, None]
    sign = mesh.cell_face_sign * mask
    g = gf[fidx]                                        # (C, K, 2)
    s = mesh.face_area_vec[fidx] * sign[..., None]      # outward
    h = np.einsum("cki,ckj->cij", g, s) / mesh.cell_volume[:, None, None]
    return h


def vertex_stencil(mesh, scheme: str):
    """Face ids and weights of each vertex's gradient stencil.

    Returns (faces (V, K) padded with -1, weights (V, K)).  ``small`` uses
    the faces that meet at the vertex; ``goldilocks`` adds every face that
    shares a vertex with those, with the central faces triple-weighted;
    ``large`` reuses the small face set (averaging of full face gradients).
    """
    key = ("vstencil", scheme)
    cached = mesh._stencil_cache.get(key)
    if cached is not None:
        return cached
    vf, vf_count = mesh.vertex_faces
    if scheme in ("small", "large"):
        w = (vf >= 0).astype(float)
        cached = (vf, w)
    elif scheme == "goldilocks":
        fv = mesh.face_vertices
        lists = []
        for v in range(mesh.n_vertices):
            central = [int(f) for f in vf[v, :vf_count[v]]]
            seen = dict.fromkeys(central)  # ordered set
            for f in central:
                for u in fv[f]:
                    for g in vf[u, :vf_count[u]]:
                        seen.setdefault(int(g))
            lists.append((central, [f for f in seen if f not in central]))
        kmax = max(len(c) + len(o) for c, o in lists)
        faces = np.full((mesh.n_vertices, kmax), -1, dtype=np.int64)
        weights = np.zeros((mesh.n_vertices, kmax))
        for v, (central, outer) in enumerate(lists):
            k = len(central)
            faces[v, :k] = central
            weights[v, :k] = 3.0
            faces[v, k:k + len(outer)] = outer
            weights[v, k:k + len(outer)] = 1.0
        cached = (faces, weights)
    else:
        raise ValueError(f"unknown vertex gradient scheme {scheme!r}")
    mesh._stencil_cache[key] = cached
    return cached


def _vertex_lsq(phi, mesh, faces, weights):
    """Weighted least squares over rows d_f . g = delta phi_f."""
    fidx = np.where(faces >= 0, faces, 0)
    dphi = (phi[mesh.face_neighbour] - phi[mesh.face_owner])[fidx]
    d = mesh.d_vec[fidx]                                 # (V, K, dim)
    if mesh.geometry.kind == "sphere":
        nhat = unit(mesh.vertices)
        d = d - np.sum(d * nhat[:, None, :], axis=-1, keepdims=True) * nhat[:, None, :]
        dn = np.linalg.norm(d, axis=-1)
        scale = np.where(dn > 0.0, mesh.d_mag[fidx] / np.where(dn > 0, dn, 1.0), 0.0)
        d = d * scale[..., None]                         # geodesic length, tangent direction
        e1, e2 = tangent_basis(mesh.vertices)
        d2 = np.stack([np.sum(d * e1[:, None, :], axis=-1),
                       np.sum(d * e2[:, None, :], axis=-1)], axis=-1)
    else:
        d2 = d
    m = np.einsum("vki,vkj,vk->vij", d2, d2, weights)
    rhs = np.einsum("vki,vk,vk->vi", d2, dphi, weights)
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    tr = m[:, 0, 0] + m[:, 1, 1]
    disc = np.sqrt(np.maximum((tr / 2) ** 2 - det, 0.0))
    lam_min = tr / 2 - disc
    lam_max = tr / 2 + disc
    if np.any(lam_min <= lam_max / _COND_LIMIT):
        v = int(np.argmin(lam_min * _COND_LIMIT - lam_max))
        raise DegenerateVertexStencil(
            f"vertex {v} gradient stencil is rank deficient")
    gx = (m[:, 1, 1] * rhs[:, 0] - m[:, 0, 1] * rhs[:, 1]) / det
    gy = (m[:, 0, 0] * rhs[:, 1] - m[:, 1, 0] * rhs[:, 0]) / det
    if mesh.geometry.kind == "sphere":
        return gx[:, None] * e1 + gy[:, None] * e2
    return np.stack([gx, gy], axis=-1)


def vertex_gradient(phi: np.ndarray, mesh, scheme: str = "small") -> np.ndarray:
    """Gradient of a cell field at mesh vertices.

    ``small`` and ``goldilocks`` fit the face normal gradients around the
    vertex in a (weighted) least-squares sense; ``large`` averages the full
    face gradients of the faces that meet at the vertex.  On the sphere the
    result is tangent at each vertex.
    """
    if scheme == "large":
        vf, vf_count = mesh.vertex_faces
        fidx = np.where(vf >= 0, vf, 0)
        mask = (vf >= 0).astype(float)
        gf = face_gradient(phi, mesh)[fidx] * mask[..., None]
        g = gf.sum(axis=1) / vf_count[:, None]
        if mesh.geometry.kind == "sphere":
            nhat = unit(mesh.vertices)
            g = g - np.sum(g * nhat, axis=-1, keepdims=True) * nhat
        return g
    faces, weights = vertex_stencil(mesh, scheme)
    return _vertex_lsq(phi, mesh, faces, weights)


def cell_centre_gradient_volume_weighted(phi: np.ndarray, mesh) -> np.ndarray:
    """Cell-centre gradient as the volume-weighted mean of the cell's face
    gradients (face weight |S_f| |d_f|, each face's share of the volume)."""
    gf = face_gradient(phi, mesh)
    w = mesh.face_area * mesh.d_mag
    dim = mesh.geometry.dim
    acc = np.zeros((mesh.n_cells, dim))
    wsum = np.zeros(mesh.n_cells)
    np.add.at(acc, mesh.face_owner, w[:, None] * gf)
    np.add.at(acc, mesh.face_neighbour, w[:, None] * gf)
    np.add.at(wsum, mesh.face_owner, w)
    np.add.at(wsum, mesh.face_neighbour, w)
    g = acc / wsum[:, None]
    if mesh.geometry.kind == "sphere":
        nhat = unit(mesh.cell_centroid)
        g = g - np.sum(g * nhat, axis=-1, keepdims=True) * nhat
    return g


def residual_metric(b: np.ndarray, ax: np.ndarray) -> float:
    """L1-relative residual sum|b - Ax| / sum(|b| + |Ax|); 0 when both sides
    vanish."""
    den = float(np.sum(np.abs(b)) + np.sum(np.abs(ax)))
    if den == 0.0:
        return 0.0
    return float(np.sum(np.abs(b - ax))) / den


def solve_poisson(rhs: np.ndarray, operator: SparseOperator,
                  guess: np.ndarray | None = None, tolerance: float = 1e-8,
                  max_iterations: int = 50000) -> tuple[np.ndarray, PoissonSolveInfo]:
    """Solve (op) phi = rhs for a compatible rhs on a closed surface.

    ``rhs`` is per-volume (same units as the operator's ``apply``); the
    system is solved in volume-integrated symmetric form with
    Jacobi-preconditioned conjugate gradients, stopping when the
    L1-relative residual metric falls below ``tolerance``.  The returned
    phi has zero volume-weighted mean.  Raises IncompatibleRHS when the
    volume-weighted mean of rhs is not (numerically) zero, and
    LinearSolveDiverged if the iteration cap is hit.
    """
    v = operator.volumes
    b = -(v * rhs)                       # solve (-M) phi = -V rhs, -M is PSD
    a = -operator.matrix
    scale = float(np.sum(np.abs(b)))
    if scale == 0.0:
        # Zero rhs: the mean-free solution is identically zero.
        x0 = np.zeros_like(b) if guess is None else np.asarray(guess, float)
        initial = residual_metric(b, a @ x0)
        return np.zeros_like(b), PoissonSolveInfo(initial, 0.0, 0)
    if abs(float(np.sum(b))) > 1e-10 * scale:
        raise IncompatibleRHS(
            "rhs has a non-zero volume-weighted mean; no solution exists")

    x = np.zeros_like(b) if guess is None else np.array(guess, dtype=float)
    r = b - a @ x
    initial = residual_metric(b, b - r)
    metric = initial
    it = 0
    if metric > tolerance:
        dinv = 1.0 / a.diagonal()
        z = dinv * r
        p = z.copy()
        rz = float(r @ z)
        while True:
            it += 1
            ap = a @ p
            pap = float(p @ ap)
            if pap <= 0.0:
                break                    # null-space drift; metric decides below
            alpha = rz / pap
            x += alpha * p
            r -= alpha * ap
            metric = residual_metric(b, b - r)
            if metric <= tolerance:
                break
            if it >= max_iterations:
                raise LinearSolveDiverged(
                    f"conjugate gradients hit {max_iterations} iterations "
                    f"(residual metric {metric:.3e}, tolerance {tolerance:.3e})")
            z = dinv * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        if metric > tolerance:
            raise LinearSolveDiverged(
                f"conjugate gradients stalled (residual metric {metric:.3e})")
    x -= float(np.sum(v * x) / np.sum(v))
    return x, PoissonSolveInfo(initial, metric, it)
