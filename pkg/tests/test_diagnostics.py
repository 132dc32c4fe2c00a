"""Tests for mesh-quality metrics."""

from types import SimpleNamespace

import numpy as np
import pytest

from otmesh.diagnostics import (
    MeshQualityReport,
    build_quality_report,
    max_nonorthogonality_deg,
    nonorthogonality_deg,
    skewness,
    spacing_reference,
)
from otmesh.ma_solver import equidistribution_constant
from otmesh.mesh_core import PlanePeriodic, TransportedMesh
from otmesh.monitor import Gridded, PlanarSech, evaluate_monitor, named_monitor


def plane_face_stub(v1, v2, co, cn, d_mag=None):
    """One-face planar stand-in carrying exactly what skewness() reads."""
    co = np.asarray(co, float)
    cn = np.asarray(cn, float)
    v1 = np.asarray(v1, float)
    v2 = np.asarray(v2, float)
    if d_mag is None:
        d_mag = np.linalg.norm(cn - co)
    return SimpleNamespace(
        geometry=PlanePeriodic(),
        face_vertices=np.array([[0, 1]]),
        vertices=np.stack([v1, v2]),
        face_centre=(0.5 * (v1 + v2))[None, :],
        cell_centroid=np.stack([co, cn]),
        face_owner=np.array([0]),
        face_neighbour=np.array([1]),
        d_mag=np.array([float(d_mag)]),
    )


class TestNonorthogonality:
    def test_square_grid_is_exactly_orthogonal(self, square16):
        assert np.all(nonorthogonality_deg(square16) == 0.0)

    def test_square30_orthogonal_to_roundoff(self, square30):
        assert nonorthogonality_deg(square30).max() < 1e-8

    def test_hex_base_near_orthogonal(self, hex2, hex3):
        # Centroid-to-centroid d vectors deviate slightly from the
        # generator-to-generator geodesics; recorded baseline max is 2.04 deg.
        for mesh in (hex2, hex3):
            assert max_nonorthogonality_deg(mesh) < 3.0

    def test_uniform_shear_gives_the_shear_angle(self, square16):
        # x -> x + tan(30 deg) y turns every face-normal/d pair by 30 deg.
        shear = np.tan(np.pi / 6.0)
        verts = square16.vertices.copy()
        verts[:, 0] += shear * verts[:, 1]
        moved = TransportedMesh(square16, verts)
        angles = nonorthogonality_deg(moved)
        # The shear is not periodic across the y seam, so faces touching the
        # wrapped top row measure the wrap offset; restrict to interior rows.
        h = 2.0 / 16.0
        fc_y = moved.face_centre[:, 1]
        interior = (fc_y > -1.0 + h / 4.0) & (fc_y < 1.0 - 1.2 * h)
        assert interior.sum() > 0.8 * square16.n_faces
        assert np.allclose(angles[interior], 30.0, atol=1e-10)

    def test_max_helper_matches_array(self, hex3):
        assert max_nonorthogonality_deg(hex3) == nonorthogonality_deg(hex3).max()


class TestSkewness:
    def test_square_grid_exactly_centred(self, square16):
        skew, flagged = skewness(square16)
        assert np.all(skew == 0.0)
        assert not flagged.any()

    def test_square30_centred_to_roundoff(self, square30):
        skew, flagged = skewness(square30)
        assert skew.max() < 1e-12
        assert not flagged.any()

    def test_hex_base_small_skew(self, hex3):
        skew, flagged = skewness(hex3)
        assert skew.max() < 0.05  # recorded baseline 3.3e-2
        assert not flagged.any()

    def test_quarter_offset_crossing(self):
        # d-line crosses the unit face a quarter edge from its centre with
        # |d| = 1: skewness 0.25 by construction.
        stub = plane_face_stub([0.0, -0.5], [0.0, 0.5],
                               [-0.5, 0.25], [0.5, 0.25])
        skew, flagged = skewness(stub)
        assert skew[0] == pytest.approx(0.25, abs=1e-15)
        assert not flagged[0]

    def test_missed_face_falls_back_to_endpoint(self):
        # The d-line passes beyond the far endpoint: flagged, and the
        # crossing is clamped to that endpoint (half an edge from centre).
        stub = plane_face_stub([0.0, -0.5], [0.0, 0.5],
                               [-0.5, 0.75], [0.5, 0.75])
        skew, flagged = skewness(stub)
        assert flagged[0]
        assert skew[0] == pytest.approx(0.5, abs=1e-15)

    def test_parallel_d_flagged(self):
        stub = plane_face_stub([0.0, -0.5], [0.0, 0.5],
                               [0.25, -0.3], [0.25, 0.4])
        skew, flagged = skewness(stub)
        assert flagged[0]
        assert np.isfinite(skew[0])

    def test_agrees_with_segment_intersection_oracle(self, square16, rng):
        verts = square16.vertices + rng.uniform(-0.02, 0.02,
                                                square16.vertices.shape)
        moved = TransportedMesh(square16, verts)
        skew, flagged = skewness(moved)

        geo = moved.geometry
        for f in range(moved.n_faces):
            fc = moved.face_centre[f]
            a = geo.min_image(moved.vertices[moved.face_vertices[f, 0]] - fc)
            b = geo.min_image(moved.vertices[moved.face_vertices[f, 1]] - fc)
            p = geo.min_image(moved.cell_centroid[moved.face_owner[f]] - fc)
            q = geo.min_image(moved.cell_centroid[moved.face_neighbour[f]] - fc)
            mat = np.column_stack([q - p, a - b])
            try:
                t_u = np.linalg.solve(mat, a - p)
            except np.linalg.LinAlgError:
                assert flagged[f]
                continue
            u = t_u[1]
            if u < 0.0 or u > 1.0:
                assert flagged[f]
                continue
            crossing = a + u * (b - a)
            want = np.linalg.norm(crossing - 0.5 * (a + b)) / moved.d_mag[f]
            assert skew[f] == pytest.approx(want, abs=1e-12)


class TestSpacingReference:
    def test_square_formula(self):
        got = spacing_reference(np.array([4.0]), 2.0, "square-grid", 0.5)
        assert got[0] == pytest.approx(0.5, rel=1e-15)

    def test_hex_formula(self):
        m = np.array([2.0])
        got = spacing_reference(m, 3.0, "hex-icosahedron", 0.25)
        area = 3.0 * 0.25 / 2.0
        assert got[0] == pytest.approx(
            np.sqrt(2.0 * area * np.tan(np.pi / 3.0) / 3.0), rel=1e-15)

    def test_hex_base_spacing_matches_reference(self, hex3):
        # m = 1, c = 1: |d| should equal the regular-hexagon spacing for the
        # mean cell area, up to mesh irregularity (recorded: [0.91, 1.08]).
        ref = spacing_reference(np.ones(hex3.n_faces), 1.0, "hex-icosahedron",
                                float(hex3.cell_volume.mean()))
        ratio = hex3.d_mag / ref
        assert 0.95 < np.median(ratio) < 1.05
        assert ratio.min() > 0.85
        assert ratio.max() < 1.15

    def test_square_base_spacing_matches_reference(self, square16):
        ref = spacing_reference(np.ones(square16.n_faces), 1.0, "square-grid",
                                float(square16.cell_volume.mean()))
        assert np.allclose(square16.d_mag, ref, rtol=1e-12)


class TestQualityReport:
    def test_shapes_and_summary_keys(self, hex3):
        report = build_quality_report(hex3)
        assert isinstance(report, MeshQualityReport)
        for arr in (report.nonorthogonality_deg, report.skewness,
                    report.skew_fallback, report.face_distance,
                    report.spacing, report.spacing_reference):
            assert arr.shape == (hex3.n_faces,)
        for arr in (report.cell_distance, report.cell_volume):
            assert arr.shape == (hex3.n_cells,)
        summary = report.summary()
        for key in ("max_nonorthogonality_deg", "mean_nonorthogonality_deg",
                    "max_skewness", "skew_fallback_count",
                    "anisotropy_max_ratio"):
            assert key in summary
        assert isinstance(summary["skew_fallback_count"], int)

    def test_without_monitor_no_equidistribution(self, hex3):
        report = build_quality_report(hex3)
        assert report.equidistribution is None
        assert report.c is None
        assert np.all(np.isnan(report.spacing_reference))
        assert "max_equidistribution_deviation" not in report.summary()

    def test_uniform_monitor_equidistributes_exactly(self, hex3):
        uniform = Gridded(lat0=-80.0, lon0=0.0, dlat=20.0, dlon=30.0,
                          values=np.full((9, 12), 1.0), p_min=0.5)
        report = build_quality_report(TransportedMesh.identity(hex3),
                                      monitor=uniform, c=1.0)
        assert np.all(report.equidistribution == 1.0)
        assert report.summary()["max_equidistribution_deviation"] == 0.0

    def test_equidistribution_normalised_by_base_volume(self, square30):
        # On an identity transport the deviation reduces to m/c: the per-cell
        # reading is V_x m / (c V_base), dimensionless.
        ring = named_monitor("ring")
        m = evaluate_monitor(ring, square30.cell_centroid, square30.geometry)
        c = equidistribution_constant(np.ones_like(m), m, square30.cell_volume)
        report = build_quality_report(TransportedMesh.identity(square30),
                                      monitor=ring, c=c)
        assert np.allclose(report.equidistribution, m / c, rtol=1e-14)
        assert np.array_equal(report.monitor_cell, m)
        assert report.c == c

    def test_distance_key_uses_monitor_centre(self, square16):
        spec = PlanarSech(centre=(0.3, -0.2))
        report = build_quality_report(square16, monitor=spec, c=1.0)
        want = square16.geometry.distance(np.array([0.3, -0.2]),
                                          square16.cell_centroid)
        assert np.allclose(report.cell_distance, want, atol=1e-15)

    def test_distance_key_defaults_to_pole_on_sphere(self, hex2):
        report = build_quality_report(hex2)
        want = hex2.geometry.distance(np.array([0.0, 0.0, 1.0]),
                                      hex2.face_centre)
        assert np.allclose(report.face_distance, want, atol=1e-12)

    def test_uniform_grid_has_unit_anisotropy(self, square16):
        report = build_quality_report(square16)
        assert report.summary()["anisotropy_max_ratio"] == 1.0
