import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oensc.data import (DatasetMatrix, NoiseSpec, SyntheticSpec, add_noise, generate_shift_stream,
                        generate_union_of_subspaces, labels_path, load_labels, load_matrix,
                        normalize_columns, save_matrix)
from oensc.errors import ConfigError, DimensionError, ParseError


class TestLoadMatrix:
    def test_small_csv(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n3,4\n5,6\n")
        ds = load_matrix(f)
        assert (ds.p, ds.n) == (3, 2)
        assert ds.Z[0, 1] == 2.0
        assert ds.truth is None and ds.name == "m"

    def test_labels_sidecar(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2,3\n4,5,6\n")
        (tmp_path / "m.csv.labels").write_text("0\n1\n1\n")
        np.testing.assert_array_equal(load_matrix(f, has_labels=True).truth, [0, 1, 1])

    def test_labels_wrong_length(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2,3\n4,5,6\n")
        (tmp_path / "m.csv.labels").write_text("0\n1\n")
        with pytest.raises(ParseError):
            load_matrix(f, has_labels=True)

    def test_bad_label(self, tmp_path):
        f = tmp_path / "l"
        f.write_text("0\nx\n")
        with pytest.raises(ParseError) as info:
            load_labels(f)
        assert info.value.line == 2

    def test_ragged(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n3\n")
        with pytest.raises(ParseError) as info:
            load_matrix(f)
        assert info.value.line == 2

    def test_non_numeric(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n3,4\n5,abc\n")
        with pytest.raises(ParseError) as info:
            load_matrix(f)
        assert info.value.line == 3 and "m.csv" in str(info.value.path)

    def test_empty(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("\n\n")
        with pytest.raises(ParseError):
            load_matrix(f)

    def test_missing(self, tmp_path):
        with pytest.raises(ParseError):
            load_matrix(tmp_path / "nope.csv")

    def test_round_trip(self, tmp_path, rng):
        Z = rng.standard_normal((4, 7)) * 10.0 ** rng.integers(-30, 30, (4, 7))
        truth = rng.integers(0, 3, 7)
        f = tmp_path / "rt.csv"
        save_matrix(f, Z, truth)
        ds = load_matrix(f, has_labels=True)
        np.testing.assert_array_equal(ds.Z, Z)
        np.testing.assert_array_equal(ds.truth, truth)
        assert labels_path("a/b.csv") == "a/b.csv.labels"


class TestDatasetMatrix:
    def test_truth_length(self):
        with pytest.raises(DimensionError):
            DatasetMatrix(np.zeros((2, 3)), [0, 1])

    def test_non_finite(self):
        with pytest.raises(ParseError):
            DatasetMatrix(np.array([[np.inf]]))


class TestNormalize:
    def test_basic(self):
        Zn, n_zero = normalize_columns(np.array([[3.0, 0.0], [4.0, 0.0]]))
        np.testing.assert_allclose(Zn, [[0.6, 0.0], [0.8, 0.0]])
        assert n_zero == 1

    @settings(max_examples=100)
    @given(arrays(np.float64, (5, 6), elements=st.one_of(st.just(0.0), st.floats(-1e6, 1e6))))
    def test_unit_or_zero(self, Z):
        Zn, _ = normalize_columns(Z)
        norms = np.linalg.norm(Zn, axis=0)
        assert np.all((norms == 0) | (np.abs(norms - 1) <= 1e-12))


class TestSynthetic:
    def test_shape(self):
        ds = generate_union_of_subspaces(SyntheticSpec(30, [(4, 100)] * 5, noise_sigma=0.01, seed=0))
        assert ds.Z.shape == (30, 500) and ds.n_classes == 5
        np.testing.assert_array_equal(np.bincount(ds.truth), [100] * 5)

    def test_noiseless_on_subspaces(self):
        ds = generate_union_of_subspaces(SyntheticSpec(20, [(3, 30), (5, 20)], seed=4))
        for k, B in enumerate(ds.bases):
            np.testing.assert_allclose(B.T @ B, np.eye(B.shape[1]), atol=1e-12)
            pts = ds.Z[:, ds.truth == k]
            assert np.max(np.linalg.norm(pts - B @ (B.T @ pts), axis=0)) < 1e-10

    def test_independent_bases(self):
        ds = generate_union_of_subspaces(SyntheticSpec(12, [(4, 5)] * 3, seed=1))
        assert np.linalg.matrix_rank(np.hstack(ds.bases)) == 12

    def test_dependent_rejected(self):
        with pytest.raises(ConfigError):
            generate_union_of_subspaces(SyntheticSpec(10, [(4, 5)] * 3))

    def test_disjoint_regime(self):
        ds = generate_union_of_subspaces(SyntheticSpec(10, [(4, 5)] * 3, independent=False))
        assert ds.Z.shape == (10, 15)

    def test_deterministic(self):
        spec = SyntheticSpec(15, [(2, 10), (3, 10)], noise_sigma=0.1, seed=8)
        a, b = generate_union_of_subspaces(spec), generate_union_of_subspaces(spec)
        np.testing.assert_array_equal(a.Z, b.Z)
        np.testing.assert_array_equal(a.truth, b.truth)

    @pytest.mark.parametrize("kw", [dict(subspaces=[]), dict(subspaces=[(10, 5)]), dict(subspaces=[(2, 0)]),
                                    dict(subspaces=[(2, 5)], noise_sigma=-1.0)])
    def test_invalid_spec(self, kw):
        with pytest.raises(ConfigError):
            SyntheticSpec(10, **kw)

    def test_shift_stream(self):
        ds, shift = generate_shift_stream(30, [4] * 5, [60] * 5, [20] * 5, [4], [100], 0.01, seed=2)
        assert shift == 300 and ds.n == 500
        assert set(ds.truth[:shift]) == set(range(5))
        assert np.sum(ds.truth[shift:] == 5) == 100
        assert 5 not in ds.truth[:shift]


class TestNoise:
    @pytest.mark.parametrize("rate", [0.05, 0.10, 0.15, 0.20])
    def test_salt_pepper_fraction(self, rate, rng):
        # a single seed lands outside 3 sigma about 0.3% of the time, so check many
        Z = rng.random((50, 80))
        band = 3 * np.sqrt(rate * (1 - rate) / Z.size)
        misses = 0
        fractions = []
        for seed in range(50):
            out = add_noise(Z, NoiseSpec("salt_pepper", rate, seed=seed))
            fractions.append(np.mean(out != Z))
            misses += abs(fractions[-1] - rate) > band
            assert set(np.unique(out[out != Z])) <= {Z.min(), Z.max()}
        assert misses <= 2
        assert abs(np.mean(fractions) - rate) <= band / np.sqrt(50)

    def test_speckle_zero_rate(self, rng):
        Z = rng.standard_normal((4, 5))
        np.testing.assert_array_equal(add_noise(Z, NoiseSpec("speckle", 0.0)), Z)

    def test_speckle_is_multiplicative(self):
        Z = np.zeros((3, 3))
        np.testing.assert_array_equal(add_noise(Z, NoiseSpec("speckle", 0.2)), Z)

    def test_salt_pepper_constant(self):
        Z = np.full((5, 5), 2.5)
        np.testing.assert_array_equal(add_noise(Z, NoiseSpec("salt_pepper", 0.5, seed=1)), Z)

    def test_deterministic_mask(self, rng):
        Z = rng.random((10, 10))
        spec = NoiseSpec("salt_pepper", 0.2, seed=11)
        np.testing.assert_array_equal(add_noise(Z, spec), add_noise(Z, spec))

    @pytest.mark.parametrize("kw", [dict(kind="gauss", rate=0.1), dict(kind="speckle", rate=1.0),
                                    dict(kind="speckle", rate=-0.1)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            NoiseSpec(**kw)
