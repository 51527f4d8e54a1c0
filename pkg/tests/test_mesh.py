import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rigskin.errors import EmptyMesh, IndexOutOfRange, ShapeMismatch
from rigskin.mesh import DescriptorField, Mesh, bounds_diagonal, extract_edges, mesh_bounds


class TestEdges:
    def test_single_triangle(self):
        np.testing.assert_array_equal(extract_edges([[0, 1, 2]]), [[0, 1], [0, 2], [1, 2]])

    def test_shared_edge(self):
        assert extract_edges([[0, 1, 2], [1, 3, 2]]).shape == (5, 2)

    def test_empty(self):
        assert extract_edges(np.zeros((0, 3), int)).shape == (0, 2)

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            extract_edges([[0, 1, 5]], n_vertices=3)
        with pytest.raises(IndexOutOfRange):
            Mesh(np.zeros((3, 3)), [[0, 1, 3]])

    def test_cube_counts(self, cube):
        assert cube.n_vertices == 8
        assert cube.faces.shape == (12, 3)
        assert cube.edges.shape == (18, 2)

    @given(st.permutations(list(range(6))), st.integers(0, 2))
    def test_order_independent(self, perm, roll):
        faces = np.array([[0, 1, 2], [1, 3, 2], [2, 3, 4], [4, 5, 0], [5, 1, 0], [3, 5, 4]])
        shuffled = np.roll(faces[list(perm)], roll, axis=1)
        np.testing.assert_array_equal(extract_edges(shuffled), extract_edges(faces))

    def test_edges_are_union_of_face_edges(self):
        rng = np.random.default_rng(0)
        faces = np.array([rng.choice(20, 3, replace=False) for _ in range(30)])
        expect = set()
        for a, b, c in faces:
            for i, j in ((a, b), (b, c), (c, a)):
                expect.add((min(i, j), max(i, j)))
        got = extract_edges(faces)
        assert {tuple(e) for e in got} == expect
        assert np.all(got[:, 0] < got[:, 1])


class TestMesh:
    def test_bounds(self, cube):
        lo, hi = mesh_bounds(cube)
        np.testing.assert_array_equal(lo, [0, 0, 0])
        np.testing.assert_array_equal(hi, [1, 1, 1])
        assert bounds_diagonal(cube) == pytest.approx(np.sqrt(3))

    def test_single_vertex_bounds(self):
        lo, hi = mesh_bounds(Mesh([[2.0, 3.0, 4.0]]))
        np.testing.assert_array_equal(lo, [2, 3, 4])
        np.testing.assert_array_equal(hi, [2, 3, 4])

    def test_translated_bounds(self, cube):
        lo, hi = mesh_bounds(cube.with_vertices(cube.vertices + [1, -2, 3]))
        np.testing.assert_array_equal(lo, [1, -2, 3])
        np.testing.assert_array_equal(hi, [2, -1, 4])

    def test_empty_mesh(self):
        with pytest.raises(EmptyMesh):
            mesh_bounds(Mesh(np.zeros((0, 3))))

    def test_degenerate_faces_dropped(self):
        with pytest.warns(UserWarning, match="degenerate"):
            m = Mesh(np.eye(3), [[0, 1, 2], [0, 0, 1]])
        assert m.faces.shape == (1, 3)

    def test_descriptors(self, cube):
        m = cube.with_descriptors(np.ones((8, 5)))
        assert m.descriptors.feature_dim == 5
        with pytest.raises(ShapeMismatch):
            cube.with_descriptors(np.ones((7, 5)))
        with pytest.raises(ValueError):
            DescriptorField(np.full((2, 2), np.nan))

    def test_immutable(self, cube):
        with pytest.raises(ValueError):
            cube.vertices[0, 0] = 5.0
