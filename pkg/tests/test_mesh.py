import numpy as np
import pytest

import hjbfem as h
from hjbfem.mesh import MeshError


def edge_census(mesh):
    """Brute-force edge incidence count."""
    from collections import Counter
    cnt = Counter()
    for tri in mesh.cells:
        for i in range(3):
            a, b = tri[(i + 1) % 3], tri[(i + 2) % 3]
            cnt[(min(a, b), max(a, b))] += 1
    return cnt


def assert_conforming(mesh):
    cnt = edge_census(mesh)
    assert set(cnt.values()) <= {1, 2}
    nbnd = sum(1 for v in cnt.values() if v == 1)
    assert nbnd == len(mesh.boundary_edges)


class TestUnitSquare:
    def test_minimal_split(self):
        m = h.unit_square_mesh(1)
        assert m.num_cells == 2
        assert m.num_vertices == 4
        assert len(m.boundary_edges) == 4

    def test_area(self):
        m = h.unit_square_mesh(2)
        assert m.num_cells == 8
        assert m.num_vertices == 9
        assert abs(m.total_area() - 4.0) < 1e-13

    def test_interior_edge_incidence(self):
        m = h.unit_square_mesh(8)
        assert m.num_cells == 128
        cnt = edge_census(m)
        interior = [e for e, c in cnt.items() if c == 2]
        boundary = [e for e, c in cnt.items() if c == 1]
        assert len(boundary) == 4 * 8
        assert len(interior) + len(boundary) == len(cnt)
        assert_conforming(m)

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            h.unit_square_mesh(0)

    def test_orientation(self):
        m = h.unit_square_mesh(3)
        assert np.all(m.cell_areas() > 0)


class TestUnitDisk:
    def test_hexagon(self):
        m = h.unit_disk_mesh(6)
        bnd = m.boundary_vertex_indices()
        assert len(bnd) == 6
        assert abs(m.total_area() - 3 * np.sqrt(3) / 2) < 1e-12

    def test_area_close_to_pi(self):
        m = h.unit_disk_mesh(64)
        assert abs(m.total_area() - np.pi) / np.pi < 0.005

    def test_boundary_on_circle(self):
        for mm in (6, 16, 40):
            m = h.unit_disk_mesh(mm)
            bv = m.vertices[m.boundary_vertex_indices()]
            r = np.hypot(bv[:, 0], bv[:, 1])
            assert np.all(np.abs(r - 1.0) <= 1e-12)
            assert_conforming(m)

    def test_rejects_small_m(self):
        with pytest.raises(ValueError):
            h.unit_disk_mesh(5)


class TestUniformRefine:
    def test_child_areas(self):
        m = h.TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]]),
                      np.array([[0, 1, 2]]))
        r = h.refine_uniform(m)
        assert r.num_cells == 4
        assert abs(r.cell_areas().sum() - m.total_area()) < 1e-14

    def test_two_refinements(self):
        m = h.unit_square_mesh(1)
        r = h.refine_uniform(h.refine_uniform(m))
        assert r.num_cells == 32
        assert abs(r.total_area() - 4.0) < 1e-12
        assert_conforming(r)

    def test_disk_snapping(self):
        m = h.unit_disk_mesh(16)
        r = h.refine_uniform(m)
        bv = r.vertices[r.boundary_vertex_indices()]
        assert np.all(np.abs(np.hypot(bv[:, 0], bv[:, 1]) - 1.0) <= 1e-12)

    def test_disk_area_monotone(self):
        m = h.unit_disk_mesh(12)
        areas = [m.total_area()]
        for _ in range(3):
            m = h.refine_uniform(m)
            areas.append(m.total_area())
        assert all(a1 > a0 for a0, a1 in zip(areas, areas[1:]))
        assert areas[-1] < np.pi

    def test_parent_indices(self):
        m = h.unit_square_mesh(2)
        r = h.refine_uniform(m)
        assert np.all(r.parent == np.repeat(np.arange(8), 4))


class TestMarkedRefine:
    def test_mark_all(self):
        m = h.unit_square_mesh(2)
        r = h.refine_marked(m, h.MarkedSet(range(m.num_cells)))
        assert r.num_cells >= 2 * m.num_cells
        assert_conforming(r)

    def test_mark_one_interior(self):
        m = h.unit_square_mesh(4)
        r = h.refine_marked(m, h.MarkedSet([9]))
        assert r.num_cells > m.num_cells
        assert_conforming(r)
        assert abs(r.total_area() - 4.0) < 1e-12

    def test_repeated_corner_refinement_shape_regular(self):
        m = h.unit_square_mesh(2)
        a0 = m.min_angle()
        for _ in range(10):
            # always refine a cell touching the corner (-1, -1)
            target = None
            for k, tri in enumerate(m.cells):
                if np.any(np.all(m.vertices[tri] == [-1.0, -1.0], axis=1)):
                    target = k
                    break
            m = h.refine_marked(m, h.MarkedSet([target]))
        assert_conforming(m)
        assert m.min_angle() > 0.1 * a0

    def test_empty_marked_rejected(self):
        with pytest.raises(ValueError):
            h.MarkedSet([])

    def test_invalid_index_rejected(self):
        m = h.unit_square_mesh(1)
        with pytest.raises(ValueError):
            h.refine_marked(m, h.MarkedSet([5], num_cells=2))

    def test_disk_marked_snaps(self):
        m = h.unit_disk_mesh(12)
        r = h.refine_marked(m, h.MarkedSet(range(m.num_cells)))
        bv = r.vertices[r.boundary_vertex_indices()]
        assert np.all(np.abs(np.hypot(bv[:, 0], bv[:, 1]) - 1.0) <= 1e-12)
        assert_conforming(r)


class TestBoundaryFrames:
    def test_square_normals_outward(self):
        m = h.unit_square_mesh(2)
        for (a, b), k, n, t in m.boundary_edges:
            mid = 0.5 * (m.vertices[a] + m.vertices[b])
            assert n @ mid > 0.9  # outward on the square boundary
            assert abs(n @ t) < 1e-14
            assert abs(np.hypot(*n) - 1) < 1e-14

    def test_disk_normals_outward(self):
        m = h.unit_disk_mesh(16)
        for (a, b), k, n, t in m.boundary_edges:
            mid = 0.5 * (m.vertices[a] + m.vertices[b])
            assert n @ (mid / np.hypot(*mid)) > 0.9


class TestIO:
    def test_roundtrip(self, tmp_path):
        m = h.unit_square_mesh(3)
        path = tmp_path / "mesh.txt"
        h.write_mesh(m, path)
        header = path.read_text().splitlines()[0].split()
        assert header == [str(m.num_cells), str(m.num_vertices),
                          str(len(m.boundary_edges))]
        m2 = h.read_mesh(path)
        assert np.allclose(m2.vertices, m.vertices)
        assert np.array_equal(m2.cells, m.cells)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("5 3 2\n0.0 0.0\n")
        with pytest.raises(MeshError):
            h.read_mesh(path)
