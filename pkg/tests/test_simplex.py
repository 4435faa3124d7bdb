import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfsim.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NegativeMass,
    SizeOverflow,
    ZeroMass,
)
from dfsim.simplex import (
    edgewise_subdivision,
    euclidean_distance,
    locate_cell,
    make_prob_vector,
    star_vertices,
    tv_distance,
)


class TestMakeProbVector:
    def test_normalizes(self):
        p = make_prob_vector([2.0, 6.0])
        assert np.allclose(p, [0.25, 0.75])
        assert not p.flags.writeable

    def test_clamps_tiny_negative(self):
        p = make_prob_vector([1.0, -1e-12, 1.0])
        assert p[1] == 0.0 and abs(p.sum() - 1.0) < 1e-15

    def test_rejects_negative_mass(self):
        with pytest.raises(NegativeMass):
            make_prob_vector([0.5, -0.1])

    def test_rejects_zero_mass(self):
        with pytest.raises(ZeroMass):
            make_prob_vector([0.0, 0.0])

    def test_rejects_scalar_and_singleton(self):
        with pytest.raises(DimensionMismatch):
            make_prob_vector([1.0])


class TestDistances:
    def test_tv_is_half_l1(self):
        assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
        assert tv_distance([0.5, 0.5], [0.25, 0.75]) == 0.25

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            tv_distance([0.5, 0.5], [0.2, 0.3, 0.5])

    @given(st.integers(2, 5), st.integers(0, 10 ** 6))
    def test_metric_properties(self, M, seed):
        rng = np.random.default_rng(seed)
        p = make_prob_vector(rng.random(M) + 1e-6)
        q = make_prob_vector(rng.random(M) + 1e-6)
        r = make_prob_vector(rng.random(M) + 1e-6)
        assert tv_distance(p, p) == 0.0
        assert abs(tv_distance(p, q) - tv_distance(q, p)) < 1e-15
        assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12
        assert tv_distance(p, q) <= 1.0 + 1e-12
        assert euclidean_distance(p, q) >= 0.0


SUBDIVISION_CASES = [(2, 1), (2, 4), (3, 2), (3, 5), (4, 3), (5, 2)]


class TestEdgewiseSubdivision:
    @pytest.mark.parametrize("M,k", SUBDIVISION_CASES)
    def test_counts(self, M, k):
        T = edgewise_subdivision(M, k)
        assert T.num_vertices == math.comb(k + M - 1, M - 1)
        assert T.num_cells == k ** (M - 1)

    def test_known_small_counts(self):
        # (M=2, k=1): 2 vertices, 1 cell; (M=2, k=4): 5 and 4; (M=3, k=2): 6 and 4
        assert edgewise_subdivision(2, 1).num_vertices == 2
        assert edgewise_subdivision(2, 4).num_cells == 4
        T = edgewise_subdivision(3, 2)
        assert (T.num_vertices, T.num_cells) == (6, 4)

    @pytest.mark.parametrize("M,k", SUBDIVISION_CASES)
    def test_vertices_on_simplex(self, M, k):
        T = edgewise_subdivision(M, k)
        assert np.allclose(T.vertices.sum(axis=1), 1.0)
        assert np.all(T.vertices >= 0.0)
        # vertex coordinates are multiples of 1/k
        assert np.allclose(np.round(T.vertices * k), T.vertices * k)

    @pytest.mark.parametrize("M,k", [(2, 8), (3, 4), (4, 3)])
    def test_cell_diameter_bound(self, M, k):
        T = edgewise_subdivision(M, k)
        for cell in T.cells:
            vs = T.vertices[cell]
            for i in range(M):
                for j in range(i + 1, M):
                    assert tv_distance(vs[i], vs[j]) <= (M - 1) / k + 1e-12

    @pytest.mark.parametrize("M,k", [(3, 3), (4, 2)])
    def test_cells_partition_volume(self, M, k):
        # cells are disjoint full-dimensional simplices covering the simplex:
        # their (M-1)-volumes must sum to the volume of the whole simplex
        T = edgewise_subdivision(M, k)
        total = 0.0
        for cell in T.cells:
            vs = T.vertices[cell]
            # volume relative to the standard simplex via the edge matrix
            E = vs[1:] - vs[0]
            total += abs(np.linalg.det(E[:, 1:]))
        assert abs(total - 1.0) < 1e-9

    def test_size_overflow(self):
        with pytest.raises(SizeOverflow):
            edgewise_subdivision(6, 400)

    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("DF_MAX_VERTICES", "10")
        with pytest.raises(SizeOverflow):
            edgewise_subdivision(3, 10)

    def test_rejects_bad_dims(self):
        with pytest.raises(DimensionMismatch):
            edgewise_subdivision(1, 4)
        with pytest.raises(DimensionMismatch):
            edgewise_subdivision(3, 0)


class TestLocateCell:
    def test_worked_example(self):
        # p = (0.75, 0.25) on the k=2 binary mesh sits halfway between
        # (1,0) and (0.5,0.5)
        T = edgewise_subdivision(2, 2)
        cell, lam = locate_cell(T, np.array([0.75, 0.25]))
        vs = T.vertices[T.cells[cell]]
        assert sorted(map(tuple, vs.tolist())) == [(0.5, 0.5), (1.0, 0.0)]
        assert np.allclose(sorted(lam), [0.5, 0.5])

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(SUBDIVISION_CASES), st.integers(0, 10 ** 6))
    def test_reconstruction(self, case, seed):
        M, k = case
        T = edgewise_subdivision(M, k)
        rng = np.random.default_rng(seed)
        p = make_prob_vector(rng.random(M) + 1e-9)
        cell, lam = locate_cell(T, p)
        assert np.all(lam >= 0) and abs(lam.sum() - 1.0) < 1e-12
        assert np.allclose(lam @ T.vertices[T.cells[cell]], p, atol=1e-12)

    @pytest.mark.parametrize("M,k", SUBDIVISION_CASES)
    def test_vertices_locate_to_themselves(self, M, k):
        T = edgewise_subdivision(M, k)
        for v in range(T.num_vertices):
            cell, lam = locate_cell(T, T.vertices[v])
            rec = lam @ T.vertices[T.cells[cell]]
            assert np.allclose(rec, T.vertices[v], atol=1e-12)
            # the weight concentrates on a single vertex
            assert lam.max() > 1.0 - 1e-9

    def test_deterministic_on_boundary(self):
        T = edgewise_subdivision(3, 4)
        p = np.array([0.25, 0.25, 0.5])  # on a cell face
        a = locate_cell(T, p)
        b = locate_cell(T, p)
        assert a[0] == b[0] and np.array_equal(a[1], b[1])

    def test_dimension_check(self):
        T = edgewise_subdivision(2, 2)
        with pytest.raises(DimensionMismatch):
            locate_cell(T, np.array([0.2, 0.3, 0.5]))


class TestStarVertices:
    def test_contains_self_and_neighbors(self):
        T = edgewise_subdivision(2, 4)
        # interior vertex of the path graph has two neighbors
        for v in range(T.num_vertices):
            star = star_vertices(T, v)
            assert v in star
            degree = len(star) - 1
            p1 = T.vertices[v][1]
            assert degree == (1 if p1 in (0.0, 1.0) else 2)

    def test_k1_star_spans_simplex(self):
        T = edgewise_subdivision(3, 1)
        assert star_vertices(T, 0) == {0, 1, 2}

    def test_out_of_range(self):
        T = edgewise_subdivision(2, 2)
        with pytest.raises(IndexOutOfRange):
            star_vertices(T, 99)
