"""Lloyd iterations with plus-plus seeding: convergence and partition quality."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stylelab.errors import ConfigError
from stylelab.kmeans import kmeans


def two_clouds(rng, sep=100.0, n=20):
    a = rng.normal(size=(n, 3)) + np.array([sep, 0, 0])
    b = rng.normal(size=(n, 3)) - np.array([sep, 0, 0])
    return np.vstack([a, b])


class TestBasics:
    def test_well_separated_clouds_recovered(self, rng):
        x = two_clouds(rng)
        result = kmeans(x, 2, seed=0)
        first, second = result.labels[:20], result.labels[20:]
        assert len(set(first.tolist())) == 1
        assert len(set(second.tolist())) == 1
        assert first[0] != second[0]

    def test_k_equals_n_zero_inertia(self, rng):
        x = rng.normal(size=(7, 2))
        result = kmeans(x, 7, seed=1)
        assert result.inertia == pytest.approx(0.0, abs=1e-18)
        assert sorted(result.labels.tolist()) == list(range(7))

    def test_k_one_center_is_mean(self, rng):
        x = rng.normal(size=(30, 4))
        result = kmeans(x, 1, seed=2)
        np.testing.assert_allclose(result.centers[0], x.mean(axis=0), atol=1e-12)

    def test_k_greater_than_n_rejected(self, rng):
        with pytest.raises(ConfigError):
            kmeans(rng.normal(size=(3, 2)), 4, seed=0)

    def test_non_matrix_rejected(self):
        with pytest.raises(ConfigError):
            kmeans(np.zeros(5), 2, seed=0)

    def test_deterministic_under_seed(self, rng):
        x = rng.normal(size=(40, 3))
        r1 = kmeans(x, 4, seed=9)
        r2 = kmeans(x, 4, seed=9)
        np.testing.assert_array_equal(r1.labels, r2.labels)
        np.testing.assert_array_equal(r1.centers, r2.centers)
        assert r1.inertia == r2.inertia


class TestConvergenceProperties:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_inertia_history_non_increasing(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(30, 3))
        result = kmeans(x, 4, seed=seed)
        hist = result.inertia_history
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
        assert result.inertia == pytest.approx(hist[-1])

    def test_beats_random_assignment_over_seeds(self):
        rng = np.random.default_rng(123)
        x = rng.normal(size=(60, 4))
        k = 5
        for seed in range(50):
            fitted = kmeans(x, k, seed=seed).inertia
            labels = np.random.default_rng(seed + 1).integers(0, k, size=len(x))
            random_inertia = 0.0
            for c in range(k):
                members = x[labels == c]
                if len(members) == 0:
                    continue
                center = members.mean(axis=0)
                random_inertia += float(((members - center) ** 2).sum())
            assert fitted <= random_inertia + 1e-9

    def test_duplicate_points_handled(self):
        x = np.ones((10, 2))
        result = kmeans(x, 3, seed=0)
        assert result.inertia == pytest.approx(0.0, abs=1e-18)

    def test_labels_cover_requested_range(self, rng):
        x = rng.normal(size=(50, 2)) * 10
        result = kmeans(x, 6, seed=4)
        assert set(result.labels.tolist()) <= set(range(6))
        assert result.centers.shape == (6, 2)
