"""Monitor-equidistributed mesh generation by optimal transport.

Meshes on the doubly periodic plane and on the sphere are adapted to a
prescribed density (monitor) function by solving a Monge-Ampere-type
equation for a mesh potential with a semi-implicit fixed-point iteration;
vertices move along the gradient of the potential (through the exponential
map on the sphere) so the cell connectivity never changes.  Post-processing
can re-tessellate the result as a spherical Voronoi diagram, and the
diagnostics module scores meshes by non-orthogonality, skewness, spacing,
and equidistribution.
"""

from .base_meshes import HexIcosahedron, SquareGrid, build_base_mesh
from .errors import (
    DegenerateCellGeometry,
    DegenerateFace,
    DegenerateVertexStencil,
    DuplicateGenerators,
    IncompatibleRHS,
    InvalidPolygon,
    LinearSolveDiverged,
    NonPositiveMonitor,
    NotConverged,
    OTMeshError,
    UnsupportedGeometry,
    ZeroAreaCell,
)
from .ma_solver import ConvergenceReport, SolverConfig, SolverState, run
from .mesh_core import (
    CellScalarField,
    PlanePeriodic,
    PolygonalSurfaceMesh,
    Sphere,
    TransportedMesh,
)
from .monitor import (
    Gridded,
    PlanarSech,
    SphericalTanh,
    evaluate_monitor,
    load_gridded_monitor,
    named_monitor,
)
from .diagnostics import MeshQualityReport, build_quality_report
from .voronoi_post import (
    VoronoiResult,
    convexity_scan,
    move_generators_and_retessellate,
    voronoi_of_cell_centres,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "build_base_mesh",
    "SquareGrid",
    "HexIcosahedron",
    "PlanePeriodic",
    "Sphere",
    "PolygonalSurfaceMesh",
    "TransportedMesh",
    "CellScalarField",
    "PlanarSech",
    "SphericalTanh",
    "Gridded",
    "named_monitor",
    "evaluate_monitor",
    "load_gridded_monitor",
    "SolverConfig",
    "SolverState",
    "ConvergenceReport",
    "run",
    "MeshQualityReport",
    "build_quality_report",
    "VoronoiResult",
    "voronoi_of_cell_centres",
    "move_generators_and_retessellate",
    "convexity_scan",
    "OTMeshError",
    "InvalidPolygon",
    "DegenerateFace",
    "ZeroAreaCell",
    "DegenerateCellGeometry",
    "DegenerateVertexStencil",
    "UnsupportedGeometry",
    "NonPositiveMonitor",
    "IncompatibleRHS",
    "LinearSolveDiverged",
    "NotConverged",
    "DuplicateGenerators",
]
