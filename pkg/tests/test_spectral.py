import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oensc.errors import ConfigError, DegenerateAffinityError, DimensionError
from oensc.metrics import accuracy
from oensc.spectral import (CoefficientMatrix, block_diagonal_ratio, build_affinity, cluster,
                            normalized_laplacian, spectral_embedding, symmetric_affinity)


def block_coefficients(rng, sizes, atoms_per_block=5, overlap=0.0):
    """Columns of class k use only atoms of block k (plus optional leakage)."""
    m = atoms_per_block * len(sizes)
    cols, truth = [], []
    for k, n in enumerate(sizes):
        X = np.zeros((m, n))
        X[k * atoms_per_block:(k + 1) * atoms_per_block] = rng.standard_normal((atoms_per_block, n))
        if overlap:
            X += overlap * rng.standard_normal((m, n))
        cols.append(X)
        truth += [k] * n
    return np.hstack(cols), np.array(truth)


class TestAffinity:
    def test_identical_columns(self):
        W = build_affinity(np.array([[1.0, -1.0], [2.0, 2.0]]))
        assert W[0, 1] == pytest.approx(1.0)
        assert W[0, 0] == 0.0

    def test_disjoint_supports(self):
        assert build_affinity(np.array([[1.0, 0.0], [0.0, 3.0]]))[0, 1] == 0.0

    def test_zero_column_is_isolated(self):
        W = build_affinity(np.array([[1.0, 0.0, 2.0], [1.0, 0.0, 0.0]]))
        assert not np.any(W[1]) and not np.any(W[:, 1])

    def test_block_structure(self, rng):
        X, truth = block_coefficients(rng, [30, 30, 30])
        W = build_affinity(X)
        off = truth[:, None] != truth[None, :]
        assert W[off].sum() / W.sum() < 0.05

    def test_empty(self):
        with pytest.raises(ConfigError):
            build_affinity(np.zeros((3, 0)))

    def test_mixed_versions(self):
        X = CoefficientMatrix()
        X.add(0, [1.0, 0.0], version=0)
        X.add(1, [1.0, 0.0], version=1)
        assert X.stale(1) == [0]
        with pytest.raises(ConfigError):
            build_affinity(X)

    def test_coefficient_matrix_stream_order(self):
        X = CoefficientMatrix()
        X.add(5, [0.0, 2.0])
        X.add(2, [1.0, 0.0])
        np.testing.assert_array_equal(X.to_array(), [[1.0, 0.0], [0.0, 2.0]])
        assert 5 in X and len(X) == 2
        with pytest.raises(DimensionError):
            X.add(7, [1.0, 2.0, 3.0])

    @settings(max_examples=50)
    @given(arrays(np.float64, (6, 8), elements=st.floats(-10, 10)))
    def test_valid_affinity(self, X):
        W = build_affinity(X)
        assert np.array_equal(W, W.T)
        assert np.all(W >= 0) and np.all(np.diag(W) == 0)
        assert np.all(W <= 1 + 1e-12)


class TestSymmetricAffinity:
    def test_formula(self):
        C = np.array([[5.0, -2.0], [4.0, 1.0]])
        np.testing.assert_array_equal(symmetric_affinity(C), [[0.0, 3.0], [3.0, 0.0]])

    def test_non_square(self):
        with pytest.raises(DimensionError):
            symmetric_affinity(np.ones((2, 3)))


class TestCluster:
    def test_perfect_blocks(self):
        sizes = [10, 15, 5]
        W = np.zeros((30, 30))
        truth = np.repeat([0, 1, 2], sizes)
        start = 0
        for n in sizes:
            W[start:start + n, start:start + n] = 1.0
            start += n
        np.fill_diagonal(W, 0.0)
        vals, _ = spectral_embedding(W, 3)
        assert np.all(np.abs(vals) < 1e-10)
        labels = cluster(W, 3, seed=0)
        assert accuracy(labels, truth) == 1.0

    def test_two_subspace_coefficients(self, rng):
        X, truth = block_coefficients(rng, [60, 60], overlap=0.05)
        labels = cluster(build_affinity(X), 2, seed=3)
        assert accuracy(labels, truth) >= 0.99

    def test_deterministic(self, rng):
        X, _ = block_coefficients(rng, [20, 20, 20], overlap=0.3)
        W = build_affinity(X)
        np.testing.assert_array_equal(cluster(W, 3, seed=7), cluster(W, 3, seed=7))

    def test_degenerate(self):
        with pytest.raises(DegenerateAffinityError):
            cluster(np.zeros((5, 5)), 2)

    @pytest.mark.parametrize("c", [1, 9])
    def test_bad_cluster_count(self, c):
        with pytest.raises(ConfigError):
            cluster(np.ones((4, 4)), c)

    def test_labels_range(self, rng):
        X, _ = block_coefficients(rng, [10, 10, 10, 10])
        labels = cluster(build_affinity(X), 4)
        assert set(labels.tolist()) == {0, 1, 2, 3}


class TestLaplacian:
    def test_isolated_vertex(self):
        W = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        L = normalized_laplacian(W)
        np.testing.assert_allclose(L, [[1, -1, 0], [-1, 1, 0], [0, 0, 1]])

    def test_psd(self, rng):
        A = rng.random((12, 12))
        W = A + A.T
        np.fill_diagonal(W, 0)
        ev = np.linalg.eigvalsh(normalized_laplacian(W))
        assert ev[0] > -1e-12 and ev[-1] < 2 + 1e-12


class TestBlockRatio:
    def test_block_diagonal(self, rng):
        X = np.zeros((6, 6))
        X[:3, :3] = rng.standard_normal((3, 3))
        X[3:, 3:] = rng.standard_normal((3, 3))
        assert block_diagonal_ratio(X, [0, 0, 0, 1, 1, 1]) == 0.0

    def test_all_ones(self):
        assert block_diagonal_ratio(np.ones((8, 8)), [0] * 4 + [1] * 4) == pytest.approx(0.5)

    def test_non_square(self):
        with pytest.raises(DimensionError):
            block_diagonal_ratio(np.ones((3, 4)), [0, 1, 1])

    def test_label_length(self):
        with pytest.raises(DimensionError):
            block_diagonal_ratio(np.ones((3, 3)), [0, 1])
