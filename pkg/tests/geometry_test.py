import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pair_upsampler import geometry
from pair_upsampler.common import exceptions
from pair_upsampler.common.enums import ShapeKinds
from pair_upsampler.types import AnalyticShape, PointCloud

LINE = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [5, 0, 0]])


def brute_force_knn(source, queries, k):
    distances = ((queries[:, None, :] - source[None, :, :]) ** 2).sum(axis=-1)
    return np.array([sorted(range(len(source)), key=lambda j: (row[j], j))[:k] for row in distances])


class TestKnn:
    def test_self_then_nearest(self):
        assert geometry.knn_indices(LINE, LINE, 2).indices[0].tolist() == [0, 1]

    def test_equidistant_neighbors_by_index(self):
        source = np.array([[1.0, 0, 0], [-1, 0, 0], [0, 0, 0]])
        assert geometry.knn_indices(source, np.zeros((1, 3)), 3).indices[0].tolist() == [2, 0, 1]

    def test_matches_exhaustive_sort(self, rng):
        points = rng.normal(size=(64, 3))
        np.testing.assert_array_equal(geometry.knn_indices(points, points, 8).indices,
                                      brute_force_knn(points, points, 8))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 256), st.integers(0, 2 ** 31 - 1))
    def test_oracle_property(self, size, seed):
        points = np.random.default_rng(seed).normal(size=(size, 3))
        k = min(5, size)
        table = geometry.knn_indices(points, points, k).indices
        np.testing.assert_array_equal(table, brute_force_knn(points, points, k))

    def test_k_too_large(self):
        with pytest.raises(exceptions.InvalidArgumentError):
            geometry.knn_indices(LINE, LINE, 5)


class TestFarthestPointSample:
    def test_colinear(self):
        assert sorted(geometry.farthest_point_sample(LINE, 2, 0).tolist()) == [0, 3]

    def test_all_points(self):
        assert sorted(geometry.farthest_point_sample(LINE, 4).tolist()) == [0, 1, 2, 3]

    def test_single(self):
        assert geometry.farthest_point_sample(LINE, 1, 2).tolist() == [2]

    def test_out_of_range(self):
        with pytest.raises(exceptions.InvalidArgumentError):
            geometry.farthest_point_sample(LINE, 0)


class TestPatches:
    def test_whole_cloud(self, rng):
        points = rng.normal(size=(16, 3))
        patch = geometry.extract_patch(points, 3, 16)
        np.testing.assert_allclose(patch.points.mean(axis=0), 0.0, atol=1e-12)
        assert np.linalg.norm(patch.points, axis=1).max() == pytest.approx(1.0)

    def test_round_trip(self, rng):
        points = rng.normal(size=(50, 3)) * 7 + 3
        patch = geometry.extract_patch(points, 10, 20)
        np.testing.assert_allclose(patch.denormalize(), points[patch.indices], atol=1e-9)

    def test_extremity_matches_distance_sort(self, rng):
        points = rng.normal(size=(100, 3))
        seed = int(np.argmax(points[:, 0]))
        patch = geometry.extract_patch(points, seed, 12)
        expected = np.argsort(np.linalg.norm(points - points[seed], axis=1), kind="stable")[:12]
        assert set(patch.indices.tolist()) == set(expected.tolist())

    def test_degenerate(self):
        with pytest.raises(exceptions.DegeneratePatchError):
            geometry.extract_patch(np.ones((5, 3)), 0, 5)


class TestNormalizePair:
    def test_identical_patches(self, rng):
        p = rng.normal(size=(10, 3))
        pair = geometry.normalize_pair(p, p)
        np.testing.assert_array_equal(pair.primary.points, pair.adjacent.points)

    def test_translation_invariant(self, rng):
        p, q = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
        shift = np.array([4.0, -2.0, 9.0])
        a, b = geometry.normalize_pair(p, q), geometry.normalize_pair(p + shift, q + shift)
        np.testing.assert_allclose(a.primary.points, b.primary.points, atol=1e-12)
        np.testing.assert_allclose(a.adjacent.points, b.adjacent.points, atol=1e-12)

    def test_shared_points_coincide(self, rng):
        cloud = rng.normal(size=(30, 3))
        p_idx, q_idx = np.arange(0, 20), np.arange(10, 30)
        pair = geometry.normalize_pair(cloud[p_idx], cloud[q_idx], primary_indices=p_idx, adjacent_indices=q_idx)
        assert pair.overlap_count == 10
        np.testing.assert_array_equal(pair.primary.points[10:], pair.adjacent.points[:10])

    def test_degenerate_primary(self):
        with pytest.raises(exceptions.DegeneratePatchError):
            geometry.normalize_pair(np.zeros((4, 3)), np.ones((4, 3)))


class TestNoise:
    def test_level_zero(self, rng):
        points = rng.normal(size=(20, 3))
        np.testing.assert_array_equal(geometry.add_gaussian_noise(points, 0.0, 1).points, points)

    def test_seeded(self, rng):
        points = rng.normal(size=(20, 3))
        a, b = geometry.add_gaussian_noise(points, 0.01, 7), geometry.add_gaussian_noise(points, 0.01, 7)
        np.testing.assert_array_equal(a.points, b.points)

    def test_standard_deviation(self, rng):
        points = rng.normal(size=(10_000, 3))
        noisy = geometry.add_gaussian_noise(points, 0.01, 3)
        assert 0.009 <= (noisy.points - points).std() <= 0.011

    def test_negative_level(self):
        with pytest.raises(exceptions.InvalidArgumentError):
            geometry.add_gaussian_noise(LINE, -0.1, 0)

    def test_relative_noise_scales_with_radius(self, rng):
        points = rng.normal(size=(10_000, 3))
        points /= np.linalg.norm(points, axis=1, keepdims=True)
        noisy = geometry.add_relative_noise(points * 10.0, 0.01, 3)
        assert 0.09 <= (noisy.points - points * 10.0).std() <= 0.11


class TestMerge:
    def test_single_patch_identity(self, rng):
        patch = rng.normal(size=(12, 3))
        merged = geometry.merge_patches([patch], 12)
        assert sorted(map(tuple, merged.points)) == sorted(map(tuple, patch))

    def test_disjoint_union(self, rng):
        a, b = rng.normal(size=(6, 3)), rng.normal(size=(6, 3)) + 10
        merged = geometry.merge_patches([a, b], 12)
        assert sorted(map(tuple, merged.points)) == sorted(map(tuple, np.concatenate([a, b])))

    def test_overlap_is_thinned(self, rng):
        base = rng.uniform(size=(40, 3))
        crowded = np.concatenate([base, base[:20] + 1e-4, base + 1e-5])
        merged = geometry.merge_patches([crowded], 40)

        def min_gap(points):
            d = np.linalg.norm(points[:, None] - points[None], axis=-1)
            np.fill_diagonal(d, np.inf)
            return d.min()

        assert min_gap(merged.points) >= min_gap(crowded)

    def test_insufficient_points(self, rng):
        with pytest.raises(exceptions.InvalidArgumentError):
            geometry.merge_patches([rng.normal(size=(4, 3))], 5)


class TestAnalyticSurfaces:
    def test_sphere_norms(self):
        cloud = geometry.sample_analytic_surface(AnalyticShape(ShapeKinds.SPHERE), 1000, 0)
        np.testing.assert_allclose(np.linalg.norm(cloud.points, axis=1), 1.0, atol=1e-12)

    def test_torus_on_surface(self):
        shape = AnalyticShape(ShapeKinds.TORUS, R=1.0, r=0.3)
        cloud = geometry.sample_analytic_surface(shape, 1000, 0)
        assert shape.distance(cloud.points).max() < 1e-12

    def test_disk_on_surface(self):
        shape = AnalyticShape(ShapeKinds.DISK)
        cloud = geometry.sample_analytic_surface(shape, 500, 0)
        assert shape.distance(cloud.points).max() < 1e-12

    def test_sphere_octants_uniform(self):
        cloud = geometry.sample_analytic_surface(AnalyticShape(ShapeKinds.SPHERE), 100_000, 1)
        octant = (cloud.points > 0) @ np.array([1, 2, 4])
        counts = np.bincount(octant, minlength=8)
        expected, sigma = 100_000 / 8, np.sqrt(100_000 * (1 / 8) * (7 / 8))
        assert np.abs(counts - expected).max() < 3 * sigma

    def test_seeded(self):
        shape = AnalyticShape(ShapeKinds.TORUS)
        a = geometry.sample_analytic_surface(shape, 100, 5)
        b = geometry.sample_analytic_surface(shape, 100, 5)
        np.testing.assert_array_equal(a.points, b.points)

    def test_point_cloud_rejects_non_finite(self):
        with pytest.raises(exceptions.InvalidArgumentError):
            PointCloud([[0.0, np.nan, 0.0]])


class TestDbscan:
    def test_two_blobs(self, rng):
        blob = rng.uniform(-0.05, 0.05, size=(10, 3))
        labels, count = geometry.dbscan(np.concatenate([blob, blob + 100 * 0.2]), 0.2, 4)
        assert count == 2
        assert len(set(labels[:10])) == 1 and len(set(labels[10:])) == 1

    def test_identical_points(self):
        assert geometry.dbscan(np.ones((6, 3)), 0.1, 4)[1] == 1

    def test_isolated_point(self):
        labels, count = geometry.dbscan(np.zeros((1, 3)), 0.1, 2)
        assert labels.tolist() == [-1] and count == 0

    def test_permutation_consistent(self, rng):
        points = np.concatenate([rng.normal(size=(15, 3)) * 0.05, rng.normal(size=(15, 3)) * 0.05 + 3])
        perm = rng.permutation(len(points))
        labels, _ = geometry.dbscan(points, 0.3, 3)
        permuted, _ = geometry.dbscan(points[perm], 0.3, 3)
        mapping = {}
        for original, relabelled in zip(labels[perm], permuted):
            assert mapping.setdefault(original, relabelled) == relabelled
