import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from pair_upsampler import geometry, pairing
from pair_upsampler.common import exceptions
from pair_upsampler.common.enums import ShapeKinds
from pair_upsampler.types import AnalyticShape, Patch, PatchSet, PointCloud

BLOB = 0.01


def _patch(points: np.ndarray, centroid, seed_index: int) -> Patch:
    centroid = np.asarray(centroid, dtype=float)
    return Patch(points - centroid, centroid, 1.0, seed_index)


def _blob(rng, center, count=5):
    return np.asarray(center) + rng.uniform(-BLOB, BLOB, size=(count, 3))


@pytest.fixture
def four_patch_scene(rng) -> PatchSet:
    """
    Patch 0 at the origin with its own points far below; candidates at distances 0.3 (one blob
    in the overlap), 0.5 (one blob) and 0.6 (three separated blobs).
    """
    own = _blob(rng, (0, 0, -5), 8)
    three = np.concatenate([_blob(rng, (0.3, 0.7, 0)), _blob(rng, (0.3, -0.7, 0)), _blob(rng, (0.3, 0, 0.7))])
    patches = [_patch(own, (0, 0, 0), 0),
               _patch(three, (0.6, 0, 0), 1),
               _patch(_blob(rng, (-0.15, 0, 0)), (-0.3, 0, 0), 2),
               _patch(_blob(rng, (0, -0.25, 0)), (0, -0.5, 0), 3)]
    source = PointCloud(np.concatenate([p.object_points for p in patches]))
    return PatchSet(patches, source, 1.0)


class TestOverlapRegion:
    def test_same_patch(self, rng):
        patch = geometry.extract_patch(rng.normal(size=(40, 3)), 0, 20)
        region = pairing.overlap_region(patch, patch, patch.scale * (1 + 1e-9))
        assert len(region) == 20
        assert sorted(region.indices.tolist()) == sorted(patch.indices.tolist())

    def test_far_apart(self, rng):
        a = _patch(rng.normal(size=(10, 3)) * 0.1, (0, 0, 0), 0)
        b = _patch(rng.normal(size=(10, 3)) * 0.1 + 10, (10, 0, 0), 1)
        assert len(pairing.overlap_region(a, b, 1.0)) == 0

    def test_lens_membership(self, rng):
        disk = geometry.sample_analytic_surface(AnalyticShape(ShapeKinds.DISK), 400, rng).points
        a = _patch(disk * 0.5, (0, 0, 0), 0)
        b = _patch(disk * 0.5 + [0.5, 0, 0], (0.5, 0, 0), 1)
        region = pairing.overlap_region(a, b, 0.5)
        union = np.concatenate([a.object_points, b.object_points])
        inside = (np.linalg.norm(union, axis=1) <= 0.5) & (np.linalg.norm(union - [0.5, 0, 0], axis=1) <= 0.5)
        assert sorted(map(tuple, region.points)) == sorted(map(tuple, union[inside]))
        assert region.counts == (int(inside[:len(a)].sum()), int(inside[len(a):].sum()))

    def test_shared_points_count_for_both(self, rng):
        patch = geometry.extract_patch(rng.normal(size=(40, 3)), 0, 20)
        region = pairing.overlap_region(patch, patch, patch.scale * (1 + 1e-9))
        assert region.counts == (20, 20)

    def test_radius_must_be_positive(self, rng):
        patch = geometry.extract_patch(rng.normal(size=(10, 3)), 0, 5)
        with pytest.raises(exceptions.InvalidArgumentError):
            pairing.overlap_region(patch, patch, 0.0)


class TestPatchSet:
    def test_covers_source(self, rng):
        cloud = PointCloud(rng.normal(size=(300, 3)))
        patch_set = pairing.build_patch_set(cloud, 32)
        covered = np.zeros(300, dtype=bool)
        for patch in patch_set:
            covered[patch.indices] = True
            assert len(patch) == 32
        assert covered.all()
        assert len(patch_set) >= pairing.seed_count(300, 32) == math.ceil(600 / 32)

    @pytest.mark.parametrize("n", [0, -4])
    def test_patch_size_must_be_positive(self, rng, n):
        with pytest.raises(exceptions.InvalidArgumentError) as info:
            pairing.seed_count(10, n)
        assert info.value.name == "n"
        with pytest.raises(exceptions.InvalidArgumentError):
            pairing.build_patch_set(rng.normal(size=(10, 3)), n)



class TestSelectAdjacentPairs:
    def test_most_clusters_wins(self, four_patch_scene):
        pair = pairing.select_partner(four_patch_scene, 0, 3, dbscan_eps=0.1)
        assert pair.partner_index == 1
        assert pair.cluster_count == 3
        assert not pair.degenerate

    def test_matches_dbscan_oracle(self, four_patch_scene):
        primary = four_patch_scene[0]
        counts = {}
        for j in (1, 2, 3):
            region = pairing.overlap_region(primary, four_patch_scene[j], four_patch_scene.radius)
            counts[j] = geometry.dbscan(region.points, 0.1, 4)[1]
        assert counts == {1: 3, 2: 1, 3: 1}
        best = max(counts, key=lambda j: counts[j])
        assert pairing.select_partner(four_patch_scene, 0, 3, dbscan_eps=0.1).partner_index == best

    def test_tie_goes_to_nearest(self, four_patch_scene):
        assert pairing.select_partner(four_patch_scene, 0, 2, dbscan_eps=0.1).partner_index == 2

    def test_deterministic_and_total(self, four_patch_scene):
        first = pairing.select_adjacent_pairs(four_patch_scene, 3, 0.1)
        second = pairing.select_adjacent_pairs(four_patch_scene, 3, 0.1)
        assert len(first) == len(four_patch_scene)
        assert [p.partner_index for p in first] == [p.partner_index for p in second]
        for a, b in zip(first, second):
            assert a.adjacent.points.tobytes() == b.adjacent.points.tobytes()

    def test_two_patches_pair_mutually(self, rng):
        cloud = rng.normal(size=(40, 3))
        patch_set = PatchSet([geometry.extract_patch(cloud, 0, 30), geometry.extract_patch(cloud, 1, 30)],
                             PointCloud(cloud), 1.5)
        pairs = pairing.select_adjacent_pairs(patch_set)
        assert [p.partner_index for p in pairs] == [1, 0]

    def test_degenerate_flag(self, rng):
        a = _patch(rng.normal(size=(6, 3)) * 0.1, (0, 0, 0), 0)
        b = _patch(rng.normal(size=(6, 3)) * 0.1 + 9, (9, 0, 0), 1)
        pairs = pairing.select_adjacent_pairs(PatchSet([a, b], PointCloud(np.concatenate([a.object_points,
                                                                                           b.object_points])), 1.0))
        assert all(p.degenerate for p in pairs)
        assert [p.partner_index for p in pairs] == [1, 0]

    def test_needs_two_patches(self, rng):
        patch = geometry.extract_patch(rng.normal(size=(10, 3)), 0, 5)
        with pytest.raises(exceptions.InvalidArgumentError):
            pairing.select_adjacent_pairs(PatchSet([patch], PointCloud(patch.object_points), 1.0))

    def test_non_degenerate_pairs_overlap(self, rng):
        cloud = geometry.sample_analytic_surface(AnalyticShape(ShapeKinds.SPHERE), 400, rng)
        patch_set = pairing.build_patch_set(cloud, 48)
        for pair in pairing.select_adjacent_pairs(patch_set):
            if not pair.degenerate:
                region = pairing.overlap_region(patch_set[pair.primary_index], patch_set[pair.partner_index],
                                                patch_set.radius)
                assert len(region) == pair.overlap_count >= 1

    def test_rigid_motion_invariant(self, rng):
        cloud = geometry.sample_analytic_surface(AnalyticShape(ShapeKinds.TORUS), 300, rng).points
        moved = cloud @ Rotation.from_euler("xyz", [0.3, -1.1, 2.0]).as_matrix().T + [3.0, -1.0, 0.5]
        original = pairing.select_adjacent_pairs(pairing.build_patch_set(cloud, 40))
        transformed = pairing.select_adjacent_pairs(pairing.build_patch_set(moved, 40))
        assert [p.partner_index for p in original] == [p.partner_index for p in transformed]
        assert [p.cluster_count for p in original] == [p.cluster_count for p in transformed]


class TestTrainingPairs:
    @pytest.fixture
    def dense(self):
        return geometry.sample_analytic_surface(AnalyticShape(ShapeKinds.SPHERE), 1024, 0)

    def test_zero_pairs(self, dense):
        assert pairing.sample_training_pairs(dense, 0, 32, 4, 0) == []

    def test_seeded(self, dense):
        a = pairing.sample_training_pairs(dense, 5, 32, 4, 3)
        b = pairing.sample_training_pairs(dense, 5, 32, 4, 3)
        for (pa, ta), (pb, tb) in zip(a, b):
            assert pa.primary.points.tobytes() == pb.primary.points.tobytes()
            assert pa.adjacent.points.tobytes() == pb.adjacent.points.tobytes()
            assert ta.tobytes() == tb.tobytes()

    def test_overlap_threshold_and_sizes(self, dense):
        n, r = 32, 4
        for pair, truth in pairing.sample_training_pairs(dense, 10, n, r, 1):
            shared = len(np.intersect1d(pair.primary.indices, pair.adjacent.indices))
            assert shared == pair.overlap_count >= pairing.min_training_overlap(n) == 4
            assert len(pair.primary) == len(pair.adjacent) == n
            assert truth.shape == (r * n, 3)

    def test_unsatisfiable_overlap(self):
        sparse = np.concatenate([np.eye(3) * s for s in (1.0, 10.0, 100.0)])
        dense = np.repeat(sparse, 4, axis=0) + np.random.default_rng(0).normal(0, 1e-3, (36, 3))
        with pytest.raises(exceptions.PairSamplingError) as info:
            pairing.sample_training_pairs(dense, 1, 1, 4, 0, sparse=sparse, seed_indices=np.array([0]))
        assert info.value.seed_index == 0
