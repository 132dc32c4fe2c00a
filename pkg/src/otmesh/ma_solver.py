"""Semi-implicit fixed point for optimally transported meshes.

The mesh map is x = xi + grad(phi) on the periodic plane and
x = exp_xi(grad(phi)) on the sphere, with phi a cell-centred potential on
the fixed computational mesh.  Equidistribution of a monitor m(x) requires

    (Hessian term)(phi) * m(x(phi)) = c,

where the Hessian term is det(I + H(phi)) on the plane (``fd`` mode) or the
cell volume ratio r = V_x / V_xi (``geometric`` mode, the only choice on
the sphere), and c makes the equation solvable.  Each iteration linearises
around the current phi and solves one Poisson-like system:

    (1 + alpha) lap(phi_new) = (1 + alpha) lap(phi) - s,
    s = (Hessian term) - c / m(x),

with the under-relaxation weight updated from the source magnitude,
1 + alpha <- max(1 + alpha, ratio * max(floor, max|s|)), never decreasing.
The iteration stops when the initial residual of this linear system -- an
L1-relative metric evaluated before the inner solve -- falls below the stop
threshold.  Connectivity never changes; only vertices move.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveMonitor, UnsupportedGeometry
from .mesh_core import (CellScalarField, PolygonalSurfaceMesh, TransportedMesh,
                        transport_vertices)
from .monitor import Gridded, evaluate_monitor, smooth_on_computational_grid
from .operators import (assemble_laplacian, fd_hessian, solve_poisson,
                        vertex_gradient)

logger = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "SolverState",
    "ConvergenceReport",
    "equidistribution_constant",
    "hessian_term",
    "update_relaxation",
    "fixed_point_step",
    "run",
]


@dataclass
class SolverConfig:
    """Knobs of the fixed-point iteration.

    ``hessian_mode``: "fd" (finite-difference Hessian determinant, plane
    only), "geometric" (cell volume ratio), or "auto" (fd on the plane,
    geometric on the sphere).  ``vertex_gradient``: "small", "goldilocks",
    "large", or "auto" (small on the plane, goldilocks on the sphere).
    """

    hessian_mode: str = "auto"
    vertex_gradient: str = "auto"
    max_fixed_point_iterations: int = 2000
    fixed_point_stop_residual: float = 1e-8
    inner_tolerance_factor: float = 0.001
    inner_tolerance_floor: float = 1e-8
    smoothing: bool = True
    alpha_floor_ratio: float = 4.0
    alpha_source_floor: float = 0.25

    def resolved(self, geometry) -> "SolverConfig":
        """Fill the "auto" fields for a concrete geometry and validate."""
        hess = self.hessian_mode
        vg = self.vertex_gradient
        if hess == "auto":
            hess = "fd" if geometry.kind == "plane" else "geometric"
        if vg == "auto":
            vg = "small" if geometry.kind == "plane" else "goldilocks"
        if hess not in ("fd", "geometric"):
            raise ValueError(f"unknown hessian mode {hess!r}")
        if hess == "fd" and geometry.kind != "plane":
            raise UnsupportedGeometry(
                "the finite-difference Hessian is only defined on the plane")
        if vg not in ("small", "goldilocks", "large"):
            raise ValueError(f"unknown vertex gradient scheme {vg!r}")
        out = SolverConfig(**{**self.__dict__})
        out.hessian_mode = hess
        out.vertex_gradient = vg
        return out


@dataclass
class SolverState:
    """Everything the fixed point carries between iterations."""

    mesh: PolygonalSurfaceMesh
    phi: CellScalarField
    transported: TransportedMesh
    one_plus_alpha: float = 1.0
    c: float = 1.0
    n: int = 0
    converged: bool = False
    residual_history: list = field(default_factory=list)
    alpha_history: list = field(default_factory=list)
    c_history: list = field(default_factory=list)


@dataclass
class ConvergenceReport:
    converged: bool
    iterations: int
    final_residual: float
    reason: str
    runtime_seconds: float = 0.0


def hessian_term(state: SolverState, mode: str) -> np.ndarray:
    """det(I + H(phi)) per cell (fd) or the volume ratio V_x/V_xi."""
    if mode == "fd":
        h = fd_hessian(state.phi.values, state.mesh)
        return ((1.0 + h[:, 0, 0]) * (1.0 + h[:, 1, 1])
                - h[:, 0, 1] * h[:, 1, 0])
    return state.transported.cell_volume / state.mesh.cell_volume


def equidistribution_constant(hess: np.ndarray, m: np.ndarray,
                              base_volumes: np.ndarray) -> float:
    """c = sum(hess * V) / sum(V / m): makes the source volume-mean-free."""
    return float(np.sum(hess * base_volumes) / np.sum(base_volumes / m))


def update_relaxation(one_plus_alpha: float, s: np.ndarray,
                      config: SolverConfig) -> float:
    """1+alpha <- max(current, ratio * max(floor, max|s|)); never decreases."""
    target = config.alpha_floor_ratio * max(config.alpha_source_floor,
                                            float(np.max(np.abs(s))))
    return max(one_plus_alpha, target)


def _monitor_values(state: SolverState, monitor, config: SolverConfig) -> np.ndarray:
    m = evaluate_monitor(monitor, state.transported.cell_centroid,
                         state.mesh.geometry)
    if np.any(m <= 0.0):
        raise NonPositiveMonitor("monitor must be strictly positive")
    if config.smoothing and isinstance(monitor, Gridded) and monitor.smoothing:
        try:
            m = smooth_on_computational_grid(m, state.mesh)
        except NonPositiveMonitor:
            floor = float(m[m > 0.0].min())
            m = np.maximum(smooth_raw(m, state.mesh), floor)
            logger.warning("smoothing clamped at %.3e to keep the monitor positive", floor)
    return m


def smooth_raw(values: np.ndarray, mesh) -> np.ndarray:
    """Smoothing pass without the positivity check (used when clamping)."""
    values = np.asarray(values, dtype=float)
    gn = (values[mesh.face_neighbour] - values[mesh.face_owner]) / mesh.d_mag
    flux = 0.25 * mesh.face_area * mesh.d_mag ** 2 * gn
    out = values * mesh.cell_volume
    np.add.at(out, mesh.face_owner, flux)
    np.add.at(out, mesh.face_neighbour, -flux)
    return out / mesh.cell_volume


def fixed_point_step(state: SolverState, monitor, config: SolverConfig,
                     operator=None) -> float:
    """One semi-implicit update; returns the initial residual it saw.

    Computes the source s = hess - c/m at the current state, updates the
    relaxation weight, and evaluates the L1-relative initial residual of
    the linear system.  If that is already below the stop threshold the
    state is marked converged and left untouched; otherwise the system is
    solved (warm-started from phi, inner tolerance
    max(factor * initial residual, floor)), vertices are transported along
    the vertex gradient of the new phi, and the transported geometry is
    rebuilt in full.
    """
    mesh = state.mesh
    op = operator if operator is not None else assemble_laplacian(mesh)
    v = mesh.cell_volume

    hess = hessian_term(state, config.hessian_mode)
    m = _monitor_values(state, monitor, config)
    c = equidistribution_constant(hess, m, v)
    s = hess - c / m
    state.one_plus_alpha = update_relaxation(state.one_plus_alpha, s, config)
    state.c = c

    # Initial residual of A phi_new = b at phi_new = phi; here
    # b - A phi = -V s exactly, and the metric is scale-free.
    a_phi = state.one_plus_alpha * (op.matrix @ state.phi.values)
    vs = v * s
    b = a_phi - vs
    den = float(np.sum(np.abs(b)) + np.sum(np.abs(a_phi)))
    res0 = float(np.sum(np.abs(vs))) / den if den > 0.0 else 0.0

    state.residual_history.append(res0)
    state.alpha_history.append(state.one_plus_alpha)
    state.c_history.append(c)

    if res0 < config.fixed_point_stop_residual:
        state.converged = True
        return res0

    rhs = state.one_plus_alpha * op.apply(state.phi.values) - s
    # c makes the source volume-mean-free in exact arithmetic; project the
    # floating-point remainder off so the singular system stays compatible.
    rhs -= float(np.sum(v * rhs) / np.sum(v))
    inner_tol = max(config.inner_tolerance_factor * res0,
                    config.inner_tolerance_floor)
    phi_new, _ = solve_poisson(rhs, op.scaled(state.one_plus_alpha),
                               guess=state.phi.values, tolerance=inner_tol)
    gv = vertex_gradient(phi_new, mesh, config.vertex_gradient)
    state.phi = CellScalarField(mesh, phi_new)
    state.transported = transport_vertices(mesh, gv)
    state.n += 1
    return res0


def run(mesh: PolygonalSurfaceMesh, monitor, config: SolverConfig | None = None
        ) -> tuple[SolverState, ConvergenceReport]:
    """Adapt a mesh to a monitor; returns the final state and a report.

    The state starts from phi = 0 (identity transport).  Each iteration
    logs the iteration number, initial residual, relaxation weight, c, the
    minimum volume ratio (tangling indicator), and the maximum
    non-orthogonality of the transported mesh.
    """
    config = (config or SolverConfig()).resolved(mesh.geometry)
    t0 = time.perf_counter()
    state = SolverState(
        mesh=mesh,
        phi=CellScalarField(mesh, np.zeros(mesh.n_cells)),
        transported=TransportedMesh.identity(mesh),
    )
    op = assemble_laplacian(mesh)
    res = np.inf
    for _ in range(config.max_fixed_point_iterations):
        res = fixed_point_step(state, monitor, config, operator=op)
        if state.converged:
            break
        if logger.isEnabledFor(logging.INFO):
            from .diagnostics import max_nonorthogonality_deg
            min_r = float(np.min(state.transported.cell_volume / mesh.cell_volume))
            logger.info(
                "n=%d residual=%.3e 1+alpha=%.4f c=%.6g min_r=%.4f max_nonorth=%.2f",
                state.n, res, state.one_plus_alpha, state.c, min_r,
                max_nonorthogonality_deg(state.transported))
    dt = time.perf_counter() - t0
    if state.converged:
        report = ConvergenceReport(True, state.n, res,
                                   f"initial residual {res:.3e} below "
                                   f"{config.fixed_point_stop_residual:.1e}", dt)
    else:
        report = ConvergenceReport(False, state.n, res,
                                   f"iteration cap {config.max_fixed_point_iterations} "
                                   f"reached with residual {res:.3e}", dt)
    return state, report
