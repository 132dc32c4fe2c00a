"""Geometry kernels, with a compiled core and a numpy fallback.

The functions here are the per-iteration hot path of mesh adaptation: every
fixed-point step rebuilds all cell areas/centroids and face vectors of the
transported mesh.  ``_core`` is a Cython extension built at install time; if
it is missing (no compiler) or ``OTMESH_PURE_PYTHON=1`` is set, the
vectorised numpy implementations in ``_core_py`` are used instead.  Both
expose identical signatures and are compared in ``benchmarks/`` and tests.
"""

import os

if os.environ.get("OTMESH_PURE_PYTHON", "") not in ("", "0"):
    from . import _core_py as _impl
    COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
        COMPILED = True
    except ImportError:
        from . import _core_py as _impl
        COMPILED = False

plane_cell_geometry = _impl.plane_cell_geometry
sphere_cell_geometry = _impl.sphere_cell_geometry
plane_face_geometry = _impl.plane_face_geometry
sphere_face_geometry = _impl.sphere_face_geometry

__all__ = [
    "COMPILED",
    "plane_cell_geometry",
    "sphere_cell_geometry",
    "plane_face_geometry",
    "sphere_face_geometry",
]
