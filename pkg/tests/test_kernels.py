"""Compiled geometry kernels agree with the numpy fallback bit-for-bit-close."""

import numpy as np
import pytest

from otmesh import _kernels
from otmesh._kernels import _core_py

compiled = pytest.importorskip(
    "otmesh._kernels._core",
    reason="compiled kernel extension not built in this environment")


def _args_plane(mesh):
    return (mesh.vertices, mesh.cell_vertices, mesh.cell_nv,
            mesh.geometry.lx, mesh.geometry.ly)


def _args_sphere(mesh):
    return (mesh.vertices, mesh.cell_vertices, mesh.cell_nv,
            mesh.geometry.radius)


class TestBackendAgreement:
    def test_plane_cell_geometry(self, square30, rng):
        disp = rng.uniform(-0.02, 0.02, size=square30.vertices.shape)
        verts = square30.geometry.wrap(square30.vertices + disp)
        args = (verts, square30.cell_vertices, square30.cell_nv, 1.0, 1.0)
        vol_c, cen_c = compiled.plane_cell_geometry(*args)
        vol_p, cen_p = _core_py.plane_cell_geometry(*args)
        assert np.allclose(vol_c, vol_p, rtol=1e-14, atol=0)
        assert np.allclose(cen_c, cen_p, rtol=0, atol=1e-14)

    def test_plane_face_geometry(self, square30, rng):
        disp = rng.uniform(-0.02, 0.02, size=square30.vertices.shape)
        verts = square30.geometry.wrap(square30.vertices + disp)
        _, cen = compiled.plane_cell_geometry(
            verts, square30.cell_vertices, square30.cell_nv, 1.0, 1.0)
        args = (verts, square30.face_vertices, square30.face_owner,
                square30.face_neighbour, cen, 1.0, 1.0)
        got_c = compiled.plane_face_geometry(*args)
        got_p = _core_py.plane_face_geometry(*args)
        for a, b in zip(got_c, got_p):
            assert np.allclose(a, b, rtol=1e-13, atol=1e-15)

    def test_sphere_cell_geometry(self, hex3, rng):
        from otmesh.sphere_geometry import exp_map, tangent_basis
        e1, e2 = tangent_basis(hex3.vertices)
        amp = rng.uniform(-0.01, 0.01, (hex3.n_vertices, 2))
        verts = exp_map(hex3.vertices, amp[:, :1] * e1 + amp[:, 1:] * e2, 1.0)
        args = (verts, hex3.cell_vertices, hex3.cell_nv, 1.0)
        vol_c, cen_c = compiled.sphere_cell_geometry(*args)
        vol_p, cen_p = _core_py.sphere_cell_geometry(*args)
        assert np.allclose(vol_c, vol_p, rtol=1e-12, atol=1e-16)
        assert np.allclose(cen_c, cen_p, rtol=0, atol=1e-13)

    def test_sphere_face_geometry(self, hex3):
        _, cen = compiled.sphere_cell_geometry(
            hex3.vertices, hex3.cell_vertices, hex3.cell_nv, 1.0)
        args = (hex3.vertices, hex3.face_vertices, hex3.face_owner,
                hex3.face_neighbour, cen, 1.0)
        got_c = compiled.sphere_face_geometry(*args)
        got_p = _core_py.sphere_face_geometry(*args)
        for a, b in zip(got_c, got_p):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-14)

    def test_radius_two_sphere(self, hex2):
        verts = 2.0 * hex2.vertices
        args = (verts, hex2.cell_vertices, hex2.cell_nv, 2.0)
        vol_c, cen_c = compiled.sphere_cell_geometry(*args)
        vol_p, cen_p = _core_py.sphere_cell_geometry(*args)
        assert np.allclose(vol_c, vol_p, rtol=1e-12)
        assert vol_c.sum() == pytest.approx(16 * np.pi, rel=1e-10)
        assert np.allclose(cen_c, cen_p, atol=1e-13)


class TestGuards:
    def test_compiled_rejects_oversized_cells_plane(self):
        verts = np.zeros((100, 2))
        cv = np.zeros((1, 65), dtype=np.int64)
        nv = np.array([65], dtype=np.int64)
        with pytest.raises(ValueError, match="64"):
            compiled.plane_cell_geometry(verts, cv, nv, 1.0, 1.0)

    def test_compiled_rejects_oversized_cells_sphere(self):
        verts = np.zeros((100, 3))
        cv = np.zeros((1, 65), dtype=np.int64)
        nv = np.array([65], dtype=np.int64)
        with pytest.raises(ValueError, match="64"):
            compiled.sphere_cell_geometry(verts, cv, nv, 1.0)


class TestSelection:
    def test_default_import_uses_compiled_core(self):
        # the environment builds the extension; the dispatcher must pick it
        assert _kernels.COMPILED
        assert _kernels.plane_cell_geometry is compiled.plane_cell_geometry

    def test_pure_python_opt_out(self):
        import subprocess
        import sys
        code = ("import otmesh._kernels as k; "
                "print(k.COMPILED, k.plane_cell_geometry.__module__)")
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True, text=True, check=True,
            env={"PATH": "/usr/bin:/bin", "OTMESH_PURE_PYTHON": "1"},
        ).stdout.split()
        assert out[0] == "False"
        assert out[1] == "otmesh._kernels._core_py"
