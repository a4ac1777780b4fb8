import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quasipot import Mesh, PointState, StateGrid


def make_mesh(n1=5, n2=7):
    return Mesh(-1.0, 1.0, -2.0, 2.0, n1, n2)


class TestIndexing:
    def test_origin(self):
        assert make_mesh().index(0, 0) == 0

    def test_stride_is_n2(self):
        mesh = Mesh(0, 1, 0, 1, 4, 6)
        assert mesh.index(1, 0) == 6

    def test_last_point(self):
        mesh = make_mesh(5, 7)
        assert mesh.index(4, 6) == 5 * 7 - 1

    def test_out_of_range(self):
        mesh = make_mesh()
        with pytest.raises(IndexError):
            mesh.index(5, 0)
        with pytest.raises(IndexError):
            mesh.index(0, -1)

    @given(st.integers(0, 4), st.integers(0, 6))
    def test_roundtrip(self, i, j):
        mesh = make_mesh()
        assert mesh.ij(mesh.index(i, j)) == (i, j)

    def test_coordinate_exact(self):
        mesh = make_mesh()
        for i in range(mesh.n1):
            for j in range(mesh.n2):
                x1, x2 = mesh.coordinate(mesh.index(i, j))
                assert x1 == mesh.x1_min + i * mesh.h1
                assert x2 == mesh.x2_min + j * mesh.h2

    def test_coordinates_matches_scalar(self):
        mesh = make_mesh()
        pts = mesh.coordinates()
        for idx in (0, 11, mesh.n_points - 1):
            assert tuple(pts[idx]) == mesh.coordinate(idx)

    def test_invalid_mesh(self):
        with pytest.raises(ValueError):
            Mesh(0, 1, 0, 1, 1, 5)
        with pytest.raises(ValueError):
            Mesh(1, 0, 0, 1, 4, 4)


class TestNeighbors:
    def test_interior_has_eight(self):
        mesh = make_mesh()
        assert len(mesh.neighbors8(mesh.index(2, 3))) == 8

    def test_corner_has_three(self):
        mesh = make_mesh()
        assert len(mesh.neighbors8(mesh.index(0, 0))) == 3

    def test_edge_has_five(self):
        mesh = make_mesh()
        assert len(mesh.neighbors8(mesh.index(0, 3))) == 5

    def test_order_clockwise_from_north(self):
        mesh = make_mesh()
        nbrs = [mesh.ij(k) for k in mesh.neighbors8(mesh.index(2, 3))]
        assert nbrs == [(2, 4), (3, 4), (3, 3), (3, 2),
                        (2, 2), (1, 2), (1, 3), (1, 4)]

    def test_neighbors_within_diagonal_ball(self):
        mesh = make_mesh()
        idx = mesh.index(2, 3)
        r = math.hypot(mesh.h1, mesh.h2) + 1e-12
        ball = set(mesh.points_within_radius(idx, r))
        assert set(mesh.neighbors8(idx)) <= ball


class TestRadius:
    def test_tiny_radius_empty(self):
        mesh = make_mesh()
        r = 0.5 * min(mesh.h1, mesh.h2)
        assert mesh.points_within_radius(mesh.index(2, 3), r) == []

    def test_radius_h_axis_neighbors(self):
        mesh = Mesh(0, 4, 0, 4, 5, 5)  # h1 = h2 = 1
        got = mesh.points_within_radius(mesh.index(2, 2), 1.0)
        assert sorted(mesh.ij(k) for k in got) == \
            sorted([(1, 2), (3, 2), (2, 1), (2, 3)])

    def test_radius_two_gives_twelve(self):
        mesh = Mesh(0, 8, 0, 8, 9, 9)  # h1 = h2 = 1
        got = mesh.points_within_radius(mesh.index(4, 4), 2.0)
        offs = sorted((i - 4, j - 4) for i, j in map(mesh.ij, got))
        assert offs == sorted([(1, 0), (-1, 0), (0, 1), (0, -1),
                               (1, 1), (1, -1), (-1, 1), (-1, -1),
                               (2, 0), (-2, 0), (0, 2), (0, -2)])

    def test_excludes_self(self):
        mesh = make_mesh()
        idx = mesh.index(2, 3)
        assert idx not in mesh.points_within_radius(idx, 10.0)

    @given(st.integers(0, 24), st.integers(0, 24),
           st.floats(0.1, 3.0))
    def test_symmetry(self, a, b, r):
        mesh = Mesh(0, 4, 0, 4, 5, 5)
        a, b = a % mesh.n_points, b % mesh.n_points
        if a == b:
            return
        in_a = b in mesh.points_within_radius(a, r)
        in_b = a in mesh.points_within_radius(b, r)
        assert in_a == in_b

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            make_mesh().points_within_radius(0, -1.0)


class TestStateGrid:
    def test_legal_chain(self):
        grid = StateGrid(make_mesh())
        grid.set_value(3, 0.5)
        grid.set_state(3, PointState.CONSIDERED)
        grid.set_state(3, PointState.ACCEPTED_FRONT)
        grid.set_state(3, PointState.ACCEPTED)

    def test_no_skipping(self):
        grid = StateGrid(make_mesh())
        grid.set_value(3, 0.5)
        with pytest.raises(ValueError):
            grid.set_state(3, PointState.ACCEPTED_FRONT)

    def test_no_reverting(self):
        grid = StateGrid(make_mesh())
        grid.set_value(3, 0.5)
        grid.set_state(3, PointState.CONSIDERED)
        with pytest.raises(ValueError):
            grid.set_state(3, PointState.CONSIDERED)

    def test_considered_needs_value(self):
        grid = StateGrid(make_mesh())
        with pytest.raises(ValueError):
            grid.set_state(4, PointState.CONSIDERED)

    def test_final_value_frozen(self):
        grid = StateGrid(make_mesh())
        grid.set_value(3, 0.5)
        grid.set_state(3, PointState.CONSIDERED)
        grid.set_state(3, PointState.ACCEPTED_FRONT)
        with pytest.raises(ValueError):
            grid.set_value(3, 0.4)

    def test_negative_value_rejected(self):
        grid = StateGrid(make_mesh())
        with pytest.raises(ValueError):
            grid.set_value(0, -1.0)
