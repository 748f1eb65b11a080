import numpy as np
import pytest

from oensc.admm import DictionaryMatrix
from oensc.data import SyntheticSpec, generate_union_of_subspaces
from oensc.dictionary import (DictionaryManager, estimate_delta, init_dictionary,
                              min_distance_to_dictionary)
from oensc.errors import ConfigError
from oensc.support_points import CCPConfig, default_count, energy_distance


class TestInitDictionary:
    def test_exact_batch(self, rng):
        batch = rng.standard_normal((4, 6))
        D = init_dictionary(batch, 6, lambda2=0.1)
        assert D.shape == (4, 6)
        assert D.support.energy <= energy_distance(batch, batch) + 1e-12
        assert D.version == 0

    def test_ten_per_class(self):
        ds = generate_union_of_subspaces(SyntheticSpec(20, [(3, 40)] * 3, noise_sigma=0.0, seed=1))
        D = init_dictionary(ds.Z, default_count(ds.n_classes), lambda2=0.1)
        assert D.m == 30

    def test_duplicates(self):
        batch = np.repeat(np.eye(3), 4, axis=1)
        with pytest.raises(ConfigError):
            init_dictionary(batch, 4)

    def test_too_small_batch(self, rng):
        with pytest.raises(ConfigError, match="smaller m"):
            init_dictionary(rng.standard_normal((3, 4)), 5)


class TestMinDistance:
    def test_on_atom(self, rng):
        A = rng.standard_normal((3, 5))
        assert min_distance_to_dictionary(A[:, 2], A) == 0.0

    def test_identity(self):
        assert min_distance_to_dictionary(np.zeros(2), np.eye(2)) == pytest.approx(1.0)

    def test_triangle_bound(self, rng):
        for _ in range(100):
            A = rng.standard_normal((4, 6))
            z = rng.standard_normal(4) * 3
            bound = np.linalg.norm(z) + np.linalg.norm(A, axis=0).max()
            assert min_distance_to_dictionary(z, A) <= bound


class TestEstimateDelta:
    def test_atoms_themselves(self, rng):
        A = rng.standard_normal((3, 5))
        assert estimate_delta(A, A) == 0.0

    def test_median_ignores_far_point(self):
        A = np.zeros((2, 1))
        batch = np.array([[0.1, 0.2, 0.15, 0.12, 10.0], [0.0] * 5])
        delta = estimate_delta(batch, A, quantile=0.5)
        assert delta == pytest.approx(0.15)
        mgr = DictionaryManager(DictionaryMatrix(A, 0.1, 1.0), "updating", delta, mm=5)
        assert mgr.is_outlier(batch[:, 4])
        assert not mgr.is_outlier(batch[:, 0])

    def test_max_quantile(self, rng):
        A = rng.standard_normal((3, 4))
        batch = rng.standard_normal((3, 20))
        d = [min_distance_to_dictionary(batch[:, i], A) for i in range(20)]
        assert estimate_delta(batch, A, quantile=1.0) == pytest.approx(max(d))

    def test_invalid(self, rng):
        with pytest.raises(ConfigError):
            estimate_delta(np.zeros((3, 0)), np.eye(3))
        with pytest.raises(ConfigError):
            estimate_delta(np.eye(3), np.eye(3), quantile=1.5)


def _manager(rng, mm=2, mode="updating"):
    batch = rng.standard_normal((3, 30)) * 0.1
    D = init_dictionary(batch, 4, CCPConfig(m=4, seed=0), lambda2=0.1)
    return DictionaryManager(D, mode, delta=1.0, mm=mm, ccp=CCPConfig(m=4, seed=0))


class TestManager:
    def test_inlier_leaves_state(self, rng):
        mgr = _manager(rng)
        before = mgr.buffer.copy()
        assert mgr.observe_sample(mgr.dictionary.atoms[:, 0] + 0.01) is None
        assert mgr.count == 0 and mgr.dict_version == 0
        np.testing.assert_array_equal(mgr.buffer, before)

    def test_two_far_samples_rebuild(self, rng):
        mgr = _manager(rng, mm=2)
        far = np.array([5.0, 5.0, 5.0])
        assert mgr.observe_sample(far, 0) is None
        assert mgr.count == 1 and mgr.buffer.shape[1] == 5
        new = mgr.observe_sample(far + 0.5, 1)
        assert new is not None and new is mgr.dictionary
        assert mgr.dict_version == 1 and mgr.count == 0
        assert mgr.buffer.shape[1] == 4
        np.testing.assert_array_equal(mgr.buffer, new.atoms)
        ev = mgr.events[-1]
        assert ev.index == 1 and ev.buffer_size == 6 and ev.error is None
        assert ev.energy_after <= ev.energy_before

    def test_static_never_rebuilds(self, rng):
        mgr = _manager(rng, mm=1, mode="static")
        for k in range(5):
            assert mgr.observe_sample(np.full(3, 10.0 + k), k) is None
        assert mgr.dict_version == 0 and mgr.count == 0

    def test_rebuild_count_bound(self, rng):
        mgr = _manager(rng, mm=3)
        for k in range(40):
            mgr.observe_sample(rng.standard_normal(3) * 4, k)
            assert 0 <= mgr.count < mgr.mm
        assert mgr.dict_version <= mgr.n_outliers // 3
        assert mgr.dict_version == len([e for e in mgr.events if e.error is None])

    def test_replay_is_deterministic(self):
        def replay():
            r = np.random.default_rng(9)
            mgr = _manager(r, mm=3)
            versions = []
            for k in range(30):
                mgr.observe_sample(r.standard_normal(3) * 4, k)
                versions.append(mgr.dict_version)
            return versions, mgr.dictionary.atoms.copy()

        (v1, a1), (v2, a2) = replay(), replay()
        assert v1 == v2
        np.testing.assert_array_equal(a1, a2)

    def test_failed_rebuild_keeps_buffer(self, rng):
        # a buffer with fewer distinct columns than m makes the CCP init infeasible
        A = np.zeros((2, 3))
        A[0, 1], A[1, 2] = 1.0, 1.0
        mgr = DictionaryManager(DictionaryMatrix(A, 0.1, 1.0), "updating", delta=0.5, mm=1)
        # all atoms equal so rebuild needs m=3 distinct columns out of {atoms, z}
        mgr.buffer = np.zeros((2, 3))
        assert mgr.observe_sample(np.zeros(2) + [5.0, 5.0], 7) is None
        assert mgr.dict_version == 0
        assert mgr.count == 1 and mgr.buffer.shape[1] == 4
        assert mgr.errors and mgr.events[-1].error

    def test_invalid(self, rng):
        D = DictionaryMatrix(np.eye(2), 0.1, 1.0)
        with pytest.raises(ConfigError):
            DictionaryManager(D, "sometimes")
        with pytest.raises(ConfigError):
            DictionaryManager(D, "updating", delta=1.0, mm=0)
        with pytest.raises(ConfigError):
            DictionaryManager(D, "updating", delta=-1.0)
