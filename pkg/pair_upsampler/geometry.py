"""
Point-set kernels: KNN grouping, farthest-point sampling, patch extraction and
normalization, merging, analytic surface sampling, noise and density clustering.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np
from loguru import logger
from sklearn.cluster import DBSCAN

from .common import exceptions
from .common.enums import ShapeKinds
from .common.utils import as_points, make_rng, pairwise_sq_distances, unit_frame
from .types import AnalyticShape, NeighborhoodIndex, Patch, PatchPair, PointCloud

_KNN_CHUNK = 512


def _coords(cloud: PointCloud | np.ndarray) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else as_points(cloud)


def knn_indices(source: PointCloud | np.ndarray, queries: PointCloud | np.ndarray, k: int) -> NeighborhoodIndex:
    """
    Exact K-nearest neighbours of every query among the source points.
    Rows are ascending by distance; equal distances are listed by ascending source index.

    :param source: points searched.
    :param queries: query points.
    :param k: neighbour count, 1 ≤ k ≤ len(source).

    :return: neighbour table of shape (len(queries), k).
    :rtype: :class:`pair_upsampler.types.NeighborhoodIndex`
    """
    source, queries = _coords(source), _coords(queries)
    if not 1 <= k <= len(source):
        raise exceptions.InvalidArgumentError("k", k, f"must be in [1, {len(source)}]")
    rows = []
    for start in range(0, len(queries), _KNN_CHUNK):
        distances = pairwise_sq_distances(queries[start:start + _KNN_CHUNK], source)
        rows.append(np.argsort(distances, axis=1, kind="stable")[:, :k])
    indices = np.concatenate(rows, axis=0) if rows else np.zeros((0, k), dtype=np.int64)
    return NeighborhoodIndex(indices)


def farthest_point_sample(cloud: PointCloud | np.ndarray, m: int, start_index: int = 0) -> np.ndarray:
    """
    Greedy max-min subset selection. Each step takes the point farthest from the
    selected set; ties go to the lowest index.

    :param cloud: points to sample.
    :param m: number of indices, 1 ≤ m ≤ len(cloud).
    :param start_index: first selected index.

    :return: selected indices in selection order.
    :rtype: :class:`numpy.ndarray`
    """
    points = _coords(cloud)
    if not 1 <= m <= len(points):
        raise exceptions.InvalidArgumentError("m", m, f"must be in [1, {len(points)}]")
    if not 0 <= start_index < len(points):
        raise exceptions.InvalidArgumentError("start_index", start_index, "out of range")
    selected = np.empty(m, dtype=np.int64)
    selected[0] = start_index
    nearest = ((points - points[start_index]) ** 2).sum(axis=1)
    for i in range(1, m):
        selected[i] = int(np.argmax(nearest))
        nearest = np.minimum(nearest, ((points - points[selected[i]]) ** 2).sum(axis=1))
    return selected


def extract_patch(cloud: PointCloud | np.ndarray, seed_index: int, n: int) -> Patch:
    """
    Cuts the n nearest points to ``seed_index`` and maps them to zero centroid and unit max-radius.

    :raises DegeneratePatchError: when every selected point coincides.
    """
    points = _coords(cloud)
    if not 0 <= seed_index < len(points):
        raise exceptions.InvalidArgumentError("seed_index", seed_index, "out of range")
    if not 1 <= n <= len(points):
        raise exceptions.InvalidArgumentError("n", n, f"must be in [1, {len(points)}]")
    indices = knn_indices(points, points[seed_index:seed_index + 1], n).indices[0]
    subset = points[indices]
    centroid, scale = unit_frame(subset)
    if scale <= 0:
        raise exceptions.DegeneratePatchError(n)
    return Patch((subset - centroid) / scale, centroid, scale, seed_index, indices)


def _shared_rows(a: np.ndarray, b: np.ndarray) -> int:
    rows = {tuple(row) for row in a}
    return sum(tuple(row) in rows for row in b)


def normalize_pair(primary: np.ndarray, adjacent: np.ndarray, *, primary_seed: int = 0, adjacent_seed: int = 0,
                   primary_indices: np.ndarray | None = None, adjacent_indices: np.ndarray | None = None,
                   overlap_count: int | None = None) -> PatchPair:
    """
    Normalizes a raw pair with the frame of the primary subset alone, so that the
    relative geometry of the two subsets is preserved.

    :param primary: raw P in object units.
    :param adjacent: raw P′ in object units.
    :param overlap_count: shared point count; when omitted it is counted from the indices
        (or from exactly coincident rows if no indices are given).

    :raises DegeneratePatchError: when P has zero spread.
    """
    primary, adjacent = as_points(primary), as_points(adjacent)
    if not len(primary) or not len(adjacent):
        raise exceptions.InvalidArgumentError("pair", (len(primary), len(adjacent)), "both subsets must be non-empty")
    centroid, scale = unit_frame(primary)
    if scale <= 0:
        raise exceptions.DegeneratePatchError(len(primary))
    if overlap_count is None:
        if primary_indices is not None and adjacent_indices is not None:
            overlap_count = len(np.intersect1d(primary_indices, adjacent_indices))
        else:
            overlap_count = _shared_rows(primary, adjacent)
    p = Patch((primary - centroid) / scale, centroid, scale, primary_seed, primary_indices)
    q = Patch((adjacent - centroid) / scale, centroid, scale, adjacent_seed, adjacent_indices)
    return PatchPair(p, q, overlap_count)


def add_gaussian_noise(cloud: PointCloud | np.ndarray, level: float, seed: int | np.random.Generator | None) -> PointCloud:
    """
    Adds zero-mean Gaussian noise with standard deviation ``level`` to every coordinate.
    The cloud is expected in a unit-radius frame, so ``level`` is a fraction of the radius.
    """
    if level < 0:
        raise exceptions.InvalidArgumentError("level", level, "must be non-negative")
    points = _coords(cloud)
    label = cloud.label if isinstance(cloud, PointCloud) else None
    if level == 0:
        return PointCloud(points.copy(), label)
    noise = make_rng(seed).normal(0.0, level, size=points.shape)
    return PointCloud(points + noise, label)


def add_relative_noise(cloud: PointCloud | np.ndarray, level: float,
                       seed: int | np.random.Generator | None) -> PointCloud:
    """
    :func:`add_gaussian_noise` in the cloud's own unit frame (centroid at the origin, bounding
    radius 1), mapped back to object units. ``level`` is thus a fraction of the bounding radius.
    """
    points = _coords(cloud)
    label = cloud.label if isinstance(cloud, PointCloud) else None
    centroid, scale = unit_frame(points)
    if level == 0 or scale == 0:
        return add_gaussian_noise(PointCloud(points, label), level, seed)
    noisy = add_gaussian_noise((points - centroid) / scale, level, seed)
    return PointCloud(noisy.points * scale + centroid, label)


def merge_patches(patches: Iterable[np.ndarray], target_count: int, start_index: int = 0) -> PointCloud:
    """
    Concatenates object-frame patches and decimates them to ``target_count`` points
    with farthest-point sampling.
    """
    parts = [as_points(patch) for patch in patches]
    if not parts:
        raise exceptions.InvalidArgumentError("patches", 0, "nothing to merge")
    merged = np.concatenate(parts, axis=0)
    if len(merged) < target_count:
        raise exceptions.InvalidArgumentError("target_count", target_count,
                                              f"only {len(merged)} points available")
    logger.debug(f"Merging {len(parts)} patches ({len(merged)} points) down to {target_count}.")
    return PointCloud(merged[farthest_point_sample(merged, target_count, start_index)])


def sample_analytic_surface(shape: AnalyticShape, count: int, seed: int | np.random.Generator | None) -> PointCloud:
    """
    Draws area-uniform samples on an analytic surface.

    :param shape: surface.
    :param count: number of samples, at least 1.
    :param seed: generator seed.
    """
    if count < 1:
        raise exceptions.InvalidArgumentError("count", count, "must be at least 1")
    rng = make_rng(seed)
    if shape.kind == ShapeKinds.SPHERE:
        directions = rng.normal(size=(count, 3))
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
        while (norms == 0).any():
            bad = norms[:, 0] == 0
            directions[bad] = rng.normal(size=(int(bad.sum()), 3))
            norms = np.linalg.norm(directions, axis=1, keepdims=True)
        points = shape.params["radius"] * directions / norms
    elif shape.kind == ShapeKinds.TORUS:
        major, minor = shape.params["R"], shape.params["r"]
        accepted: list[np.ndarray] = []
        total = 0
        # area element is proportional to R + r cos(v)
        while total < count:
            u = rng.uniform(0.0, 2 * np.pi, size=count)
            v = rng.uniform(0.0, 2 * np.pi, size=count)
            keep = rng.uniform(0.0, major + minor, size=count) < major + minor * np.cos(v)
            ring = major + minor * np.cos(v[keep])
            batch = np.stack([ring * np.cos(u[keep]), ring * np.sin(u[keep]), minor * np.sin(v[keep])], axis=1)
            accepted.append(batch)
            total += len(batch)
        points = np.concatenate(accepted, axis=0)[:count]
    else:
        radius = shape.params["radius"] * np.sqrt(rng.uniform(0.0, 1.0, size=count))
        angle = rng.uniform(0.0, 2 * np.pi, size=count)
        points = np.stack([radius * np.cos(angle), radius * np.sin(angle), np.zeros(count)], axis=1)
    return PointCloud(points, shape.spec)


def mean_spacing(points: np.ndarray) -> float:
    """
    Mean distance from each point to its nearest other point (0 for fewer than two points).
    """
    points = as_points(points)
    if len(points) < 2:
        return 0.0
    distances = pairwise_sq_distances(points, points)
    np.fill_diagonal(distances, np.inf)
    return float(np.sqrt(distances.min(axis=1)).mean())


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> tuple[np.ndarray, int]:
    """
    Density clustering. A point is core when at least ``min_pts`` points (itself included)
    lie within ``eps``; noise is labelled -1.

    :return: (labels, number of clusters).
    """
    if not eps > 0:
        raise exceptions.InvalidArgumentError("eps", eps, "must be positive")
    if min_pts < 1:
        raise exceptions.InvalidArgumentError("min_pts", min_pts, "must be at least 1")
    points = as_points(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    if not len(points):
        return np.zeros(0, dtype=np.int64), 0
    labels = DBSCAN(eps=eps, min_samples=min_pts, algorithm="brute").fit(points).labels_.astype(np.int64)
    return labels, int(labels.max() + 1) if (labels >= 0).any() else 0
