"""Tests for VTK export/import and CSV diagnostic reports."""

import numpy as np
import pytest

from otmesh.base_meshes import HexIcosahedron, build_base_mesh
from otmesh.diagnostics import build_quality_report
from otmesh.io import (
    export_csv_reports,
    mesh_from_vtk,
    read_vtk,
    transported_from_vtk,
    write_convergence_csv,
    write_vtk,
)
from otmesh.ma_solver import SolverConfig, run
from otmesh.monitor import named_monitor


@pytest.fixture
def bell_state(square16):
    state, _ = run(square16, named_monitor("bell"),
                   SolverConfig(max_fixed_point_iterations=3))
    return state


class TestVtkRoundTrip:
    def test_plane_mesh_bit_exact(self, tmp_path, square16):
        path = write_vtk(tmp_path / "base.vtk", square16)
        back = mesh_from_vtk(path)
        assert np.array_equal(back.vertices, square16.vertices)
        assert np.array_equal(back.cell_vertices, square16.cell_vertices)
        assert back.geometry == square16.geometry
        assert back.kind == square16.kind
        assert np.array_equal(back.cell_volume, square16.cell_volume)

    def test_sphere_mesh_bit_exact(self, tmp_path, hex2):
        path = write_vtk(tmp_path / "hex.vtk", hex2)
        back = mesh_from_vtk(path)
        assert np.array_equal(back.vertices, hex2.vertices)
        assert back.geometry == hex2.geometry
        assert np.array_equal(back.cell_volume, hex2.cell_volume)

    def test_polygon_record_count(self, tmp_path, hex3):
        path = write_vtk(tmp_path / "hex3.vtk", hex3)
        _, points, cells, _ = read_vtk(path)
        assert len(cells) == 642
        text = path.read_text().splitlines()
        types = text[text.index("CELL_TYPES 642") + 1:][:642]
        assert set(types) == {"7"}  # VTK_POLYGON

    def test_cell_fields_round_trip(self, tmp_path, hex2, rng):
        fields = {"monitor": rng.uniform(0.1, 2.0, hex2.n_cells),
                  "area_ratio": rng.uniform(0.5, 1.5, hex2.n_cells)}
        path = write_vtk(tmp_path / "f.vtk", hex2, cell_fields=fields)
        _, _, _, data = read_vtk(path)
        assert set(data) == {"monitor", "area_ratio"}
        for name in fields:
            assert np.array_equal(data[name], fields[name])

    def test_field_length_must_match_cells(self, tmp_path, hex2):
        with pytest.raises(ValueError, match="shape"):
            write_vtk(tmp_path / "bad.vtk", hex2,
                      cell_fields={"short": np.ones(3)})

    def test_transported_round_trip(self, tmp_path, square16, bell_state):
        t = bell_state.transported
        path = write_vtk(tmp_path / "adapted.vtk", t, role="adapted")
        back = transported_from_vtk(path, square16)
        assert np.array_equal(back.vertices, t.vertices)
        assert np.array_equal(back.cell_volume, t.cell_volume)

    def test_transported_needs_matching_base(self, tmp_path, square16,
                                             square30, bell_state):
        path = write_vtk(tmp_path / "adapted.vtk", bell_state.transported,
                         role="adapted")
        with pytest.raises(ValueError, match="does not match"):
            transported_from_vtk(path, square30)

    def test_write_failure_names_the_path(self, tmp_path, square16):
        target = tmp_path / "missing-dir" / "mesh.vtk"
        with pytest.raises(OSError, match="mesh.vtk"):
            write_vtk(target, square16)

    def test_unreadable_title_rejected(self, tmp_path):
        path = tmp_path / "foreign.vtk"
        path.write_text("# vtk DataFile Version 3.0\nsomething else\nASCII\n"
                        "DATASET UNSTRUCTURED_GRID\nPOINTS 1 double\n0 0 0\n"
                        "CELLS 0 0\nCELL_TYPES 0\n")
        with pytest.raises(ValueError, match="geometry"):
            mesh_from_vtk(path)

    def test_radius_preserved(self, tmp_path):
        mesh = build_base_mesh(HexIcosahedron(2, radius=2.5))
        path = write_vtk(tmp_path / "r.vtk", mesh)
        back = mesh_from_vtk(path)
        assert back.geometry.radius == 2.5


class TestDiagnosticsSurviveReload:
    def test_reports_identical_after_round_trip(self, tmp_path, square16,
                                                bell_state):
        t = bell_state.transported
        before = build_quality_report(t)
        path = write_vtk(tmp_path / "adapted.vtk", t, role="adapted")
        back = transported_from_vtk(path, square16)
        after = build_quality_report(back)
        assert np.allclose(after.nonorthogonality_deg,
                           before.nonorthogonality_deg, atol=1e-12)
        assert np.allclose(after.skewness, before.skewness, atol=1e-12)
        assert np.array_equal(after.cell_volume, before.cell_volume)
        assert np.array_equal(after.spacing, before.spacing)


class TestCsvReports:
    def export(self, tmp_path, square16, bell_state):
        monitor = named_monitor("bell")
        report = build_quality_report(bell_state.transported, monitor=monitor,
                                      c=bell_state.c)
        return report, export_csv_reports(tmp_path, bell_state.transported,
                                          report, state=bell_state)

    def test_files_headers_and_row_counts(self, tmp_path, square16, bell_state):
        report, written = self.export(tmp_path, square16, bell_state)
        names = {p.name for p in written}
        assert names == {"equidistribution.csv", "spacing.csv",
                         "orthogonality.csv", "skewness.csv",
                         "convergence.csv"}
        want_headers = {
            "equidistribution.csv": "distance,x,y,cell_area,c_over_m,deviation",
            "spacing.csv": "distance,x,y,spacing,reference",
            "orthogonality.csv": "distance,x,y,nonorthogonality_deg",
            "skewness.csv": "distance,x,y,skewness,fallback",
            "convergence.csv": "n,initial_residual,one_plus_alpha",
        }
        want_rows = {
            "equidistribution.csv": square16.n_cells,
            "spacing.csv": square16.n_faces,
            "orthogonality.csv": square16.n_faces,
            "skewness.csv": square16.n_faces,
            "convergence.csv": len(bell_state.residual_history),
        }
        for path in written:
            lines = path.read_text().splitlines()
            assert lines[0] == want_headers[path.name]
            assert len(lines) == want_rows[path.name] + 1

    def test_columns_round_trip_exactly(self, tmp_path, square16, bell_state):
        report, written = self.export(tmp_path, square16, bell_state)
        by_name = {p.name: p for p in written}
        spacing = np.loadtxt(by_name["spacing.csv"], delimiter=",", skiprows=1)
        assert np.array_equal(spacing[:, 3], report.spacing)
        assert np.array_equal(spacing[:, 4], report.spacing_reference)
        equi = np.loadtxt(by_name["equidistribution.csv"], delimiter=",",
                          skiprows=1)
        assert np.array_equal(equi[:, 3], report.cell_volume)
        assert np.array_equal(equi[:, 4], report.c / report.monitor_cell)
        assert np.array_equal(equi[:, 5], report.equidistribution - 1.0)
        conv = np.loadtxt(by_name["convergence.csv"], delimiter=",", skiprows=1)
        assert np.array_equal(conv[:, 1], bell_state.residual_history)
        assert np.array_equal(conv[:, 2], bell_state.alpha_history)

    def test_no_monitor_skips_equidistribution(self, tmp_path, square16):
        report = build_quality_report(square16)
        written = export_csv_reports(tmp_path, square16, report)
        names = {p.name for p in written}
        assert "equidistribution.csv" not in names
        assert "convergence.csv" not in names
        assert {"spacing.csv", "orthogonality.csv", "skewness.csv"} <= names

    def test_sphere_reports_use_lon_lat(self, tmp_path, hex2):
        report = build_quality_report(hex2)
        written = export_csv_reports(tmp_path, hex2, report)
        by_name = {p.name: p for p in written}
        header = by_name["spacing.csv"].read_text().splitlines()[0]
        assert header == "distance,lon_deg,lat_deg,spacing,reference"
        rows = np.loadtxt(by_name["spacing.csv"], delimiter=",", skiprows=1)
        assert np.all(np.abs(rows[:, 1]) <= 180.0)
        assert np.all(np.abs(rows[:, 2]) <= 90.0)

    def test_serial_reruns_diff_clean(self, tmp_path, square16, bell_state):
        _, first = self.export(tmp_path / "a", square16, bell_state)
        _, second = self.export(tmp_path / "b", square16, bell_state)
        for p1, p2 in zip(first, second):
            assert p1.read_bytes() == p2.read_bytes()

    def test_convergence_writer_direct(self, tmp_path):
        path = write_convergence_csv(tmp_path / "conv.csv",
                                     [1.0, 0.5, 0.25], [1.0, 4.0, 4.0])
        lines = path.read_text().splitlines()
        assert lines[0] == "n,initial_residual,one_plus_alpha"
        assert lines[1].startswith("0,")
        assert len(lines) == 4
