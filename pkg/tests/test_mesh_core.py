"""Mesh data model: topology construction, cached geometry, field containers."""

import numpy as np
import pytest

from otmesh.base_meshes import SquareGrid, build_base_mesh
from otmesh.errors import InvalidPolygon, ZeroAreaCell
from otmesh.mesh_core import (
    CellScalarField,
    CellTensorField,
    PlanePeriodic,
    PolygonalSurfaceMesh,
    Sphere,
    TransportedMesh,
    VertexVectorField,
    transport_vertices,
)
from otmesh.sphere_geometry import tangent_basis, unit


class TestPlanePeriodic:
    def test_wrap_into_fundamental_domain(self):
        geo = PlanePeriodic(1.0, 1.0)
        pts = np.array([[1.5, -2.3], [-1.0, 1.0], [0.25, -0.75]])
        w = geo.wrap(pts)
        assert np.all(w[:, 0] >= -1.0) and np.all(w[:, 0] < 1.0)
        assert np.all(w[:, 1] >= -1.0) and np.all(w[:, 1] < 1.0)
        assert np.allclose(w[0], [-0.5, -0.3])
        assert np.allclose(w[1], [-1.0, -1.0])  # 1.0 aliases -1.0
        assert np.allclose(w[2], [0.25, -0.75])  # already inside: unchanged

    def test_wrap_is_identity_inside(self, rng):
        geo = PlanePeriodic(0.7, 1.3)
        pts = np.column_stack([rng.uniform(-0.7, 0.7, 50),
                               rng.uniform(-1.3, 1.3, 50)])
        assert np.array_equal(geo.wrap(pts), pts)

    def test_min_image_picks_short_vector(self):
        geo = PlanePeriodic(1.0, 1.0)
        d = geo.min_image(np.array([1.9, -1.9]))
        assert np.allclose(d, [-0.1, 0.1])

    def test_distance_across_seam(self):
        geo = PlanePeriodic(1.0, 1.0)
        d = geo.distance(np.array([-0.95, 0.0]), np.array([0.95, 0.0]))
        assert d == pytest.approx(0.1, rel=1e-12)

    def test_rectangular_domain(self):
        geo = PlanePeriodic(2.0, 0.5)
        assert np.allclose(geo.min_image(np.array([3.9, 0.9])), [-0.1, -0.1])


class TestSphereGeometryObject:
    def test_distance_is_geodesic(self):
        geo = Sphere(radius=3.0)
        d = geo.distance(np.array([3.0, 0.0, 0.0]), np.array([0.0, 3.0, 0.0]))
        assert d == pytest.approx(3.0 * np.pi / 2, rel=1e-14)


class TestSquareGridTables:
    def test_counts_and_torus_euler(self, square30):
        n = 30
        assert square30.n_cells == n * n
        assert square30.n_vertices == n * n
        assert square30.n_faces == 2 * n * n
        # V - E + F = 0 on the torus
        assert square30.n_vertices - square30.n_faces + square30.n_cells == 0

    def test_uniform_cell_areas(self, square30):
        h = 2.0 / 30
        assert np.allclose(square30.cell_volume, h * h, rtol=1e-13)
        built = build_base_mesh(SquareGrid(60))
        assert np.allclose(built.cell_volume, 1.0 / 900.0, rtol=1e-13)

    def test_total_area_is_domain_area(self, square30):
        assert square30.cell_volume.sum() == pytest.approx(4.0, rel=1e-12)

    def test_face_vectors_perpendicular_with_edge_length(self, square30):
        h = 2.0 / 30
        geo = square30.geometry
        v1 = square30.vertices[square30.face_vertices[:, 0]]
        v2 = square30.vertices[square30.face_vertices[:, 1]]
        edge = geo.min_image(v2 - v1)
        assert np.allclose(square30.face_area, h, rtol=1e-12)
        assert np.max(np.abs(np.sum(square30.face_area_vec * edge, axis=-1))) < 1e-14

    def test_face_vectors_point_out_of_owner(self, square30):
        outward = np.sum(square30.face_area_vec * square30.d_vec, axis=-1)
        assert np.all(outward > 0.0)

    def test_centre_distances_and_weights(self, square30):
        h = 2.0 / 30
        assert np.allclose(square30.d_mag, h, rtol=1e-12)
        assert np.allclose(square30.lam, 0.5, atol=1e-12)

    def test_periodic_seam_adjacency(self, square30):
        # cell 0 sits in the domain corner; its left neighbour is cell n-1
        # across the seam, its lower neighbour cell n(n-1).
        n = 30
        nbrs = set()
        for f in range(square30.n_faces):
            o, nb = square30.face_owner[f], square30.face_neighbour[f]
            if o == 0:
                nbrs.add(int(nb))
            elif nb == 0:
                nbrs.add(int(o))
        assert nbrs == {1, n - 1, n, n * (n - 1)}

    def test_cell_perimeters(self, square16):
        h = 2.0 / 16
        assert np.allclose(square16.cell_perimeters(), 4 * h, rtol=1e-12)

    def test_every_vertex_touches_four_faces(self, square16):
        _, counts = square16.vertex_faces
        assert np.all(counts == 4)

    def test_planar_closure_is_exact(self, square30):
        assert square30.closure_defects().max() < 1e-12

    def test_square_centroids_are_cell_centres(self, square16):
        h = 2.0 / 16
        # cell 0 spans [-1, -1+h]^2
        assert np.allclose(square16.centroid(0), [-1 + h / 2, -1 + h / 2],
                           atol=1e-14)


class TestHexIcosahedronTables:
    def test_counts_and_sphere_euler(self, hex2):
        assert hex2.n_cells == 162          # 10*4^2 + 2
        assert hex2.n_vertices == 320       # 20*4^2
        assert hex2.n_faces == 480          # 30*4^2
        assert hex2.n_vertices - hex2.n_faces + hex2.n_cells == 2

    def test_pentagon_count(self, hex2):
        assert int((hex2.cell_nv == 5).sum()) == 12
        assert int((hex2.cell_nv == 6).sum()) == 150

    def test_partition_of_sphere(self, hex2, hex3):
        for mesh in (hex2, hex3):
            total = mesh.cell_volume.sum()
            assert abs(total - 4 * np.pi) / (4 * np.pi) < 1e-10

    def test_interpolation_weights_interior(self, hex2, hex3):
        for mesh in (hex2, hex3):
            assert np.all(mesh.lam > 0.0) and np.all(mesh.lam < 1.0)
            assert np.all(mesh.d_mag > 0.0)

    def test_every_vertex_touches_three_faces(self, hex2):
        _, counts = hex2.vertex_faces
        assert np.all(counts == 3)

    def test_closure_defect_survey(self, hex4):
        # The tangential closure defect of curved cells is O(V/a); the
        # recorded baseline on the 2,562-cell mesh stays three orders below
        # the perimeter.
        ratio = hex4.closure_defects() / hex4.cell_perimeters()
        assert ratio.max() < 1e-3

    def test_pole_pentagon_centroid_is_the_pole(self, hex2):
        i = int(np.argmax(hex2.cell_centroid[:, 2]))
        assert hex2.cell_nv[i] == 5
        assert np.allclose(hex2.centroid(i), [0.0, 0.0, 1.0], atol=1e-12)

    def test_face_vectors_point_out_of_owner(self, hex3):
        outward = np.sum(hex3.face_area_vec * hex3.d_vec, axis=-1)
        assert np.all(outward > 0.0)


class TestCentroidOracle:
    def test_irregular_quad_matches_triangle_decomposition(self, square16, rng):
        h = 2.0 / 16
        disp = rng.uniform(-0.2 * h, 0.2 * h, size=square16.vertices.shape)
        moved = transport_vertices(square16, disp)
        for i in (0, 7, 100):
            poly = moved.cell_polygon(i)
            # fan the quad from its third vertex -- a different decomposition
            # than the implementation uses
            root = poly[2]
            area_sum = 0.0
            weighted = np.zeros(2)
            for k in range(len(poly)):
                a, b = poly[k], poly[(k + 1) % len(poly)]
                tri = 0.5 * ((a[0] - root[0]) * (b[1] - root[1])
                             - (b[0] - root[0]) * (a[1] - root[1]))
                area_sum += tri
                weighted += tri * (root + a + b) / 3.0
            oracle = square16.geometry.wrap(weighted / area_sum)
            assert np.allclose(moved.centroid(i), oracle, atol=1e-12)


class TestTransportedMesh:
    def test_identity_is_bit_identical(self, square16, hex2):
        for base in (square16, hex2):
            tm = TransportedMesh.identity(base)
            assert np.array_equal(tm.vertices, base.vertices)
            assert np.array_equal(tm.cell_volume, base.cell_volume)
            assert np.array_equal(tm.cell_centroid, base.cell_centroid)
            assert np.array_equal(tm.face_area_vec, base.face_area_vec)

    def test_topology_arrays_are_shared_not_copied(self, square16):
        tm = TransportedMesh.identity(square16)
        assert tm.face_owner is square16.face_owner
        assert tm.face_neighbour is square16.face_neighbour
        assert tm.cell_vertices is square16.cell_vertices
        assert tm.adjacency_pairs() == square16.adjacency_pairs()

    def test_zero_displacement_transport_is_bitwise(self, square16, hex2):
        for base in (square16, hex2):
            tm = transport_vertices(base, np.zeros_like(base.vertices))
            assert np.array_equal(tm.vertices, base.vertices)

    def test_wrong_shape_rejected(self, square16):
        with pytest.raises(InvalidPolygon):
            TransportedMesh(square16, square16.vertices[:-1])

    def test_off_sphere_vertices_rejected(self, hex2):
        with pytest.raises(InvalidPolygon):
            TransportedMesh(hex2, 1.001 * hex2.vertices)

    def test_planar_transport_wraps(self, square16):
        tm = transport_vertices(square16, np.full_like(square16.vertices, 2.0))
        assert np.allclose(tm.vertices, square16.vertices, atol=1e-14)
        assert np.allclose(tm.cell_volume, square16.cell_volume, rtol=1e-12)

    def test_area_conserving_shear_keeps_volumes(self, square16):
        # x -> x + 0.3 sin(pi y) preserves every column's area map Jacobian
        disp = np.zeros_like(square16.vertices)
        disp[:, 0] = 0.05 * np.sin(np.pi * square16.vertices[:, 1])
        tm = transport_vertices(square16, disp)
        assert tm.cell_volume.sum() == pytest.approx(4.0, rel=1e-12)

    def test_inverted_cell_reports_negative_area(self, square16):
        verts = square16.vertices.copy()
        ids = square16.cell_vertices[0, :4]
        centre = verts[ids].mean(axis=0)
        # reflect the cell's corners across its horizontal midline: the
        # traversal order flips to clockwise
        verts[ids, 1] = 2 * centre[1] - verts[ids, 1]
        tm = TransportedMesh(square16, verts)
        h = 2.0 / 16
        assert tm.cell_volume[0] == pytest.approx(-h * h, rel=1e-12)

    def test_zero_area_cells_raise_on_centroid(self, square16):
        # collapse the whole mesh onto the x-axis with distinct abscissae:
        # edges keep nonzero length but every shoelace area is exactly zero
        nv = square16.n_vertices
        verts = np.column_stack([np.linspace(-1.0, 0.8, nv), np.zeros(nv)])
        tm = TransportedMesh(square16, verts)
        assert np.all(tm.cell_volume == 0.0)
        with pytest.raises(ZeroAreaCell):
            tm.centroid(0)


class TestCellPolygon:
    def test_seam_cell_unwraps(self, square30):
        h = 2.0 / 30
        # the cell owning the domain corner spans the seam in both axes
        n = 30
        corner = n * n - 1
        poly = square30.cell_polygon(corner)
        spread = np.ptp(poly, axis=0)
        assert np.all(spread <= h + 1e-12)

    def test_polygon_starts_at_first_vertex(self, square16):
        poly = square16.cell_polygon(3)
        first = square16.vertices[square16.cell_vertices[3, 0]]
        assert np.array_equal(poly[0], first)


def _tetra_points():
    p = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0],
                  [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])
    return unit(p)


class TestConstructionErrors:
    def test_too_few_vertices(self):
        with pytest.raises(InvalidPolygon):
            PolygonalSurfaceMesh(Sphere(), _tetra_points(),
                                 [[0, 1], [1, 0], [2, 3], [3, 2]])

    def test_repeated_vertex_in_cell(self):
        with pytest.raises(InvalidPolygon):
            PolygonalSurfaceMesh(Sphere(), _tetra_points(),
                                 [[0, 1, 1], [0, 2, 3], [0, 3, 1], [1, 3, 2]])

    def test_vertex_id_out_of_range(self):
        with pytest.raises(InvalidPolygon):
            PolygonalSurfaceMesh(Sphere(), _tetra_points(),
                                 [[0, 1, 2], [0, 2, 4], [0, 3, 1], [1, 3, 2]])

    def test_open_surface_rejected(self):
        with pytest.raises(InvalidPolygon, match="closed"):
            PolygonalSurfaceMesh(Sphere(), _tetra_points(),
                                 [[0, 1, 2], [0, 2, 3]])

    def test_inconsistent_orientation_rejected(self):
        cells = [[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 2, 3]]  # last flipped
        with pytest.raises(InvalidPolygon, match="direction"):
            PolygonalSurfaceMesh(Sphere(), _tetra_points(), cells)

    def test_tetrahedron_partition_accepted(self):
        mesh = PolygonalSurfaceMesh(Sphere(), _tetra_points(),
                                    [[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
        assert mesh.n_vertices - mesh.n_faces + mesh.n_cells == 2
        total = mesh.cell_volume.sum()
        assert abs(total - 4 * np.pi) / (4 * np.pi) < 1e-10


class TestFieldContainers:
    def test_cell_scalar_shape_and_finiteness(self, square16):
        CellScalarField(square16, np.zeros(square16.n_cells))
        with pytest.raises(ValueError):
            CellScalarField(square16, np.zeros(square16.n_cells - 1))
        bad = np.zeros(square16.n_cells)
        bad[3] = np.nan
        with pytest.raises(ValueError):
            CellScalarField(square16, bad)

    def test_vertex_vector_shape(self, square16):
        VertexVectorField(square16, np.zeros((square16.n_vertices, 2)))
        with pytest.raises(ValueError):
            VertexVectorField(square16, np.zeros((square16.n_vertices, 3)))

    def test_vertex_vector_tangency_on_sphere(self, hex2):
        e1, _ = tangent_basis(hex2.vertices)
        VertexVectorField(hex2, 0.1 * e1)  # tangent: accepted
        radial = 0.1 * unit(hex2.vertices)
        with pytest.raises(ValueError, match="tangent"):
            VertexVectorField(hex2, radial)

    def test_cell_tensor_shape(self, square16):
        CellTensorField(square16, np.zeros((square16.n_cells, 2, 2)))
        with pytest.raises(ValueError):
            CellTensorField(square16, np.zeros((square16.n_cells, 2, 3)))
