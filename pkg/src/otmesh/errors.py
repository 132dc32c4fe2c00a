"""Exception types raised by the mesh, operator, and solver layers."""


class OTMeshError(Exception):
    """Base class for all otmesh errors."""


class InvalidPolygon(OTMeshError):
    """Polygon input is malformed (too few vertices, repeated vertex, ...)."""


class DegenerateFace(OTMeshError):
    """A face has (numerically) zero length."""


class ZeroAreaCell(OTMeshError):
    """A cell's area vanished; its centroid is undefined."""


class DegenerateCellGeometry(OTMeshError):
    """A cell's least-squares gradient matrix is singular."""


class DegenerateVertexStencil(OTMeshError):
    """A vertex gradient stencil is rank deficient (condition number > 1e8)."""


class UnsupportedGeometry(OTMeshError):
    """Operation not available for this surface geometry."""


class NonPositiveMonitor(OTMeshError):
    """A monitor evaluation or smoothing produced a non-positive value."""


class IncompatibleRHS(OTMeshError):
    """Poisson right-hand side has a non-zero volume-weighted mean."""


class LinearSolveDiverged(OTMeshError):
    """The inner linear solver failed to reach its tolerance."""


class NotConverged(OTMeshError):
    """The fixed-point iteration hit its cap before the stop residual."""


class DuplicateGenerators(OTMeshError):
    """Two Voronoi generating points (numerically) coincide."""
