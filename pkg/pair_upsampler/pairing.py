"""
Adjacent patch-pair construction: covering a cloud with patches, picking a partner
for every patch by the cluster structure of their overlap, and drawing random
overlapping pairs for training.
"""
from __future__ import annotations

import math

import numpy as np
from loguru import logger

from . import geometry
from .common import exceptions
from .common.utils import as_points, make_rng, pairwise_sq_distances
from .types import OverlapRegion, Patch, PatchPair, PatchSet, PointCloud

DEFAULT_CANDIDATES = 3
DEFAULT_MIN_PTS = 4
MIN_EPS = 1e-12


def seed_count(point_count: int, n: int) -> int:
    """
    Number of farthest-point seeds used to cover a cloud: ⌈2N/n⌉, capped at N.

    :raises InvalidArgumentError: when n is below 1.
    """
    if n < 1:
        raise exceptions.InvalidArgumentError("n", n, "patch size must be at least 1")
    return min(point_count, math.ceil(2 * point_count / n))


def build_patch_set(cloud: PointCloud | np.ndarray, n: int, seeds: int | None = None, radius: float | None = None,
                    start_index: int = 0) -> PatchSet:
    """
    Cuts patches of n points around farthest-point seeds. Extra patches are seeded at the
    lowest uncovered index until every source point belongs to some patch.

    :param cloud: source cloud in object units.
    :param n: points per patch.
    :param seeds: initial seed count (default :func:`seed_count`).
    :param radius: adjacency radius in object units (default: mean patch scale).
    """
    if n < 1:
        raise exceptions.InvalidArgumentError("n", n, "patch size must be at least 1")
    source = cloud if isinstance(cloud, PointCloud) else PointCloud(cloud)
    seeds = seed_count(len(source), n) if seeds is None else seeds
    seed_indices = list(geometry.farthest_point_sample(source, seeds, start_index))
    patches = [geometry.extract_patch(source, int(i), n) for i in seed_indices]
    covered = np.zeros(len(source), dtype=bool)
    for patch in patches:
        covered[patch.indices] = True
    while not covered.all():
        patch = geometry.extract_patch(source, int(np.flatnonzero(~covered)[0]), n)
        covered[patch.indices] = True
        patches.append(patch)
    if radius is None:
        radius = float(np.mean([patch.scale for patch in patches]))
    logger.debug(f"Covered {len(source)} points with {len(patches)} patches (radius {radius:.4g}).")
    return PatchSet(patches, source, radius)


def overlap_region(a: Patch, b: Patch, radius: float) -> OverlapRegion:
    """
    Object-frame points of A ∪ B lying within ``radius`` of both patch centroids.
    Points shared by the two patches (same source index, or same coordinates when the
    patches carry no indices) appear once.

    :param a: first patch.
    :param b: second patch.
    :param radius: adjacency radius, positive.
    """
    if not radius > 0:
        raise exceptions.InvalidArgumentError("radius", radius, "must be positive")
    points_a, points_b = a.object_points, b.object_points
    indexed = a.indices is not None and b.indices is not None
    if indexed:
        keys_a, keys_b = [int(i) for i in a.indices], [int(i) for i in b.indices]
    else:
        keys_a, keys_b = [tuple(p) for p in points_a], [tuple(p) for p in points_b]
    set_a, set_b = set(keys_a), set(keys_b)
    keys, rows, seen = [], [], set()
    for key, point in zip(keys_a + keys_b, np.concatenate([points_a, points_b])):
        if key not in seen:
            seen.add(key)
            keys.append(key)
            rows.append(point)
    union = np.array(rows)
    from_a = np.array([key in set_a for key in keys])
    from_b = np.array([key in set_b for key in keys])
    r2 = radius * radius
    inside = (((union - a.centroid) ** 2).sum(axis=1) <= r2) & (((union - b.centroid) ** 2).sum(axis=1) <= r2)
    ids = np.array(keys, dtype=np.int64)[inside] if indexed else None
    return OverlapRegion(union[inside], (int((inside & from_a).sum()), int((inside & from_b).sum())), ids)


def cluster_count(region: OverlapRegion, eps: float | None = None, min_pts: int = DEFAULT_MIN_PTS) -> int:
    """
    Density-cluster count of an overlap region. ``eps`` defaults to twice the mean
    nearest-neighbour spacing of the region.
    """
    if not len(region):
        return 0
    if eps is None:
        eps = max(2.0 * geometry.mean_spacing(region.points), MIN_EPS)
    return geometry.dbscan(region.points, eps, min_pts)[1]


def pair_from_patches(a: Patch, b: Patch, overlap_count: int, clusters: int = 0, degenerate: bool = False,
                      primary_index: int | None = None, partner_index: int | None = None) -> PatchPair:
    """
    Expresses two object-frame patches as a pair in the frame of ``a``.
    """
    pair = geometry.normalize_pair(a.object_points, b.object_points, primary_seed=a.seed_index,
                                   adjacent_seed=b.seed_index, primary_indices=a.indices,
                                   adjacent_indices=b.indices, overlap_count=overlap_count)
    pair.cluster_count = clusters
    pair.degenerate = degenerate
    pair.primary_index, pair.partner_index = primary_index, partner_index
    return pair


def select_partner(patch_set: PatchSet, index: int, k_candidates: int = DEFAULT_CANDIDATES,
                   dbscan_eps: float | None = None, dbscan_min_pts: int = DEFAULT_MIN_PTS) -> PatchPair:
    """
    Picks the partner of one patch among its ``k_candidates`` nearest patches (by centroid):
    the candidate whose overlap region has the most density clusters, ties going to the
    nearer centroid, then to the lower index. Without any overlapping candidate the nearest
    patch is used and the pair is flagged degenerate.
    """
    centroids = patch_set.centroids
    distances = pairwise_sq_distances(centroids[index:index + 1], centroids)[0]
    order = [int(j) for j in np.argsort(distances, kind="stable") if j != index][:k_candidates]
    primary = patch_set[index]
    best: tuple[int, int, int] | None = None
    best_region: OverlapRegion | None = None
    for rank, j in enumerate(order):
        region = overlap_region(primary, patch_set[j], patch_set.radius)
        if not len(region):
            continue
        clusters = cluster_count(region, dbscan_eps, dbscan_min_pts)
        logger.debug(f"Patch {index}: candidate {j} overlaps in {len(region)} points "
                     f"({region.counts[0]} own, {region.counts[1]} theirs), {clusters} clusters.")
        # ``order`` is sorted by distance then index, so rank encodes both tie-breaks
        key = (-clusters, rank, j)
        if best is None or key < best:
            best, best_region = key, region
    if best is None:
        nearest = order[0]
        logger.warning(f"Patch {index} has no overlapping candidate; pairing with nearest patch {nearest}.")
        return pair_from_patches(primary, patch_set[nearest], 0, 0, True, index, nearest)
    partner = best[2]
    return pair_from_patches(primary, patch_set[partner], len(best_region), -best[0], False, index, partner)


def select_adjacent_pairs(patch_set: PatchSet, k_candidates: int = DEFAULT_CANDIDATES,
                          dbscan_eps: float | None = None, dbscan_min_pts: int = DEFAULT_MIN_PTS) -> list[PatchPair]:
    """
    Assigns exactly one partner to every patch of the set (see :func:`select_partner`).

    :param patch_set: at least two patches.
    :param k_candidates: candidates examined per patch, at least 1.
    :param dbscan_eps: clustering radius; scale-adaptive when :obj:`None`.
    :param dbscan_min_pts: clustering density threshold.
    """
    if len(patch_set) < 2:
        raise exceptions.InvalidArgumentError("patch_set", len(patch_set), "needs at least two patches")
    if k_candidates < 1:
        raise exceptions.InvalidArgumentError("k_candidates", k_candidates, "must be at least 1")
    pairs = [select_partner(patch_set, i, k_candidates, dbscan_eps, dbscan_min_pts) for i in range(len(patch_set))]
    degenerate = sum(pair.degenerate for pair in pairs)
    logger.debug(f"Selected {len(pairs)} pairs ({degenerate} degenerate).")
    return pairs


def min_training_overlap(n: int) -> int:
    """
    Smallest shared-point count accepted for a training pair: ⌈n/8⌉.
    """
    return math.ceil(n / 8)


def sample_training_pairs(cloud: PointCloud | np.ndarray, pair_count: int, n: int, r: int,
                          seed: int | np.random.Generator | None,
                          sparse: np.ndarray | None = None,
                          seed_indices: np.ndarray | None = None) -> list[tuple[PatchPair, np.ndarray]]:
    """
    Draws random overlapping patch pairs with their dense ground truth.

    :param cloud: dense ground-truth cloud in object units.
    :param pair_count: number of pairs.
    :param n: points per input patch.
    :param r: upsampling rate; the ground truth holds r·n points.
    :param seed: generator seed.
    :param sparse: sparse input cloud; by default a seeded subset of len(cloud)/r dense points.
    :param seed_indices: fixed primary seeds (indices into the sparse cloud) instead of random ones;
        ``pair_count`` must then equal their number.

    :return: list of (normalized pair, (r·n, 3) ground truth in the same frame).
    :raises PairSamplingError: when a seed has no partner sharing at least ⌈n/8⌉ points.
    """
    dense = cloud.points if isinstance(cloud, PointCloud) else as_points(cloud)
    if pair_count < 0:
        raise exceptions.InvalidArgumentError("pair_count", pair_count, "must be non-negative")
    if pair_count == 0:
        return []
    rng = make_rng(seed)
    if sparse is None:
        sparse = dense[np.sort(rng.choice(len(dense), size=len(dense) // r, replace=False))]
    sparse = as_points(sparse)
    if len(sparse) < n:
        raise exceptions.InvalidArgumentError("n", n, f"sparse cloud has only {len(sparse)} points")
    if len(dense) < r * n:
        raise exceptions.InvalidArgumentError("cloud", len(dense), f"needs at least {r * n} dense points")
    table = geometry.knn_indices(sparse, sparse, n).indices
    required = min_training_overlap(n)
    samples = []
    if seed_indices is not None and len(seed_indices) != pair_count:
        raise exceptions.InvalidArgumentError("seed_indices", len(seed_indices), f"expected {pair_count} seeds")
    for i in range(pair_count):
        seed_index = int(seed_indices[i]) if seed_indices is not None else int(rng.integers(len(sparse)))
        members = np.zeros(len(sparse), dtype=bool)
        members[table[seed_index]] = True
        shared = members[table].sum(axis=1)
        shared[seed_index] = 0
        qualifying = np.flatnonzero(shared >= required)
        if not len(qualifying):
            raise exceptions.PairSamplingError(seed_index, required)
        partner = int(rng.choice(qualifying))
        pair = geometry.normalize_pair(sparse[table[seed_index]], sparse[table[partner]],
                                       primary_seed=seed_index, adjacent_seed=partner,
                                       primary_indices=table[seed_index], adjacent_indices=table[partner],
                                       overlap_count=int(shared[partner]))
        pair.primary_index, pair.partner_index = seed_index, partner
        truth = geometry.knn_indices(dense, sparse[seed_index:seed_index + 1], r * n).indices[0]
        samples.append((pair, pair.primary.normalize(dense[truth])))
    return samples
