import numpy as np
import pytest

import hhoskew as hs
from hhoskew.mesh import cell_flatness, d_TF, polygon_area

from conftest import random_convex_polygon


def all_generated_meshes():
    return [
        hs.generate_cartesian(3),
        hs.generate_hexagonal(3, 1.0),
        hs.generate_hexagonal(3, 6.0),
        hs.generate_locally_refined(4, 2),
    ]


class TestMeshInvariants:
    @pytest.mark.parametrize("mesh_index", range(4))
    def test_closed_boundary_identity(self, mesh_index):
        mesh = all_generated_meshes()[mesh_index]
        for ci in range(mesh.n_cells):
            view = mesh.cell(ci)
            resultant = sum(ev.length * ev.normal for ev in view.edges)
            scale = sum(ev.length for ev in view.edges)
            assert np.abs(resultant).max() <= 1e-12 * scale

    @pytest.mark.parametrize("mesh_index", range(4))
    def test_edge_incidence_counts(self, mesh_index):
        mesh = all_generated_meshes()[mesh_index]
        counts = (mesh.edge_cells >= 0).sum(axis=1)
        assert counts.min() >= 1 and counts.max() <= 2
        assert np.array_equal(mesh.boundary_edge, counts == 1)

    @pytest.mark.parametrize("mesh_index", range(4))
    def test_d_tf_bounds(self, mesh_index):
        # d_TF <= h_T literally fails already on a regular hexagon
        # (|T|/|F| = 1.3 h_T) and on a split side (2s vs sqrt(2) s); the
        # honest bound on all generated families is 1.5 h_T.
        mesh = all_generated_meshes()[mesh_index]
        for ci in range(mesh.n_cells):
            for eid in mesh.cell_edges[ci]:
                d = d_TF(mesh, ci, int(eid))
                assert 0.0 < d <= 1.5 * mesh.cell_diameter[ci]

    def test_partition_of_unity(self):
        for mesh in all_generated_meshes():
            assert abs(mesh.cell_area.sum() - 1.0) <= 1e-14 * mesh.n_cells

    def test_d_tf_requires_incidence(self):
        mesh = hs.generate_cartesian(2)
        outside = [e for e in range(mesh.n_edges)
                   if e not in set(map(int, mesh.cell_edges[0]))][0]
        with pytest.raises(hs.MeshValidationError):
            d_TF(mesh, 0, outside)


class TestDTF:
    def test_unit_square(self, unit_square_mesh):
        assert d_TF(unit_square_mesh, 0, 0) == pytest.approx(1.0)

    def test_rectangle(self):
        verts = np.array([[0, 0], [3.0, 0], [3.0, 0.5], [0, 0.5]])
        mesh = hs.Mesh.from_cell_loops(verts, [[0, 1, 2, 3]])
        long_edge = int(np.argmax(mesh.edge_length))
        assert d_TF(mesh, 0, long_edge) == pytest.approx(0.5)

    def test_hexagonal_against_shoelace_oracle(self):
        mesh = hs.generate_hexagonal(4, 1.0)
        for ci in [0, mesh.n_cells // 2, mesh.n_cells - 1]:
            loop = mesh.vertices[mesh.cell_loops[ci]]
            area = polygon_area(loop)
            for eid in mesh.cell_edges[ci]:
                expected = area / mesh.edge_length[int(eid)]
                assert d_TF(mesh, ci, int(eid)) == pytest.approx(expected, rel=1e-13)


class TestFlatness:
    def test_unit_square(self, unit_square_mesh):
        fl_h, fl = hs.flatness(unit_square_mesh)
        assert fl_h == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-12)

    @pytest.mark.parametrize("s", [2.0, 5.0, 12.0])
    def test_rectangle_closed_form(self, s):
        verts = np.array([[0, 0], [1.0, 0], [1.0, 1.0 / s], [0, 1.0 / s]])
        mesh = hs.Mesh.from_cell_loops(verts, [[0, 1, 2, 3]])
        expected = 2.0 * s * np.sqrt(1.0 + 1.0 / s**2)
        assert hs.flatness(mesh)[0] == pytest.approx(expected, rel=1e-12)

    def test_stretch_scaling(self):
        base, _ = hs.flatness(hs.generate_hexagonal(3, 1.0))
        fl8, _ = hs.flatness(hs.generate_hexagonal(3, 8.0))
        assert 0.5 * 8.0 * base <= fl8 <= 2.0 * 8.0 * base


class TestValidation:
    def test_zero_area_cell_rejected(self):
        verts = np.array([[0, 0], [1.0, 0], [2.0, 0]])
        with pytest.raises(hs.MeshValidationError):
            hs.Mesh.from_cell_loops(verts, [[0, 1, 2]])

    def test_non_star_shaped_rejected(self):
        verts = np.array([[0, 0], [4.0, 0], [4.0, 4.0], [0.1, 0.1], [0, 4.0]])
        with pytest.raises(hs.MeshValidationError):
            hs.Mesh.from_cell_loops(verts, [[0, 1, 2, 3, 4]])

    def test_three_cells_on_one_edge_rejected(self):
        verts = np.array([[0, 0], [1.0, 0], [0.5, 1.0], [0.5, -1.0], [1.5, 1.0]])
        loops = [[0, 1, 2], [0, 1, 3], [0, 1, 4]]
        with pytest.raises(hs.MeshValidationError):
            hs.Mesh.from_cell_loops(verts, loops)

    def test_views_carry_outward_normals(self):
        mesh = hs.generate_cartesian(2)
        for ci in range(mesh.n_cells):
            view = mesh.cell(ci)
            for ev in view.edges:
                # outward: midpoint + eps*normal moves away from the centroid
                out = ev.midpoint + 1e-6 * ev.normal
                assert (np.linalg.norm(out - view.centroid)
                        > np.linalg.norm(ev.midpoint - view.centroid))

    def test_random_polygons_validate(self, rng):
        for _ in range(10):
            view = random_convex_polygon(rng)
            assert view.area > 0
            assert cell_flatness(view) >= 2.0 - 1e-9
