"""
Toy datasets cut from analytic shapes, and joint augmentation of training samples.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from loguru import logger
from scipy.spatial.transform import Rotation

from .. import geometry, pairing
from ..common import exceptions
from ..common.utils import derive_seed, make_rng, parse_shape_spec
from ..types import AnalyticShape, Dataset, Patch, PatchPair, PointCloud, Sample


def as_shape(shape: AnalyticShape | str) -> AnalyticShape:
    if isinstance(shape, AnalyticShape):
        return shape
    kind, params = parse_shape_spec(shape)
    return AnalyticShape(kind, **params)


def validation_count(total: int, fraction: float) -> int:
    """
    Validation samples out of ``total``: the rounded fraction, at least one when the fraction is
    positive and at least two samples exist.
    """
    if fraction <= 0 or total < 2:
        return 0
    return min(total - 1, max(1, round(total * fraction)))


def build_toy_dataset(shapes: Sequence[AnalyticShape | str], pairs_per_shape: int, n: int, r: int, seed: int,
                      sparse_points: int = 2048, val_fraction: float = 0.1) -> Dataset:
    """
    Samples a dense and a sparse cloud per shape and cuts overlapping training pairs from them.
    Primary seeds are drawn without replacement and split per shape, so validation pairs never
    share a seed with training pairs of the same shape.

    :param shapes: shapes or shape specs such as ``torus:R=0.7,r=0.3``.
    :param pairs_per_shape: pairs cut from every shape.
    :param n: points per input patch.
    :param r: upsampling rate.
    :param seed: dataset seed.
    :param sparse_points: sparse points per shape; the dense cloud holds r times as many.
    :param val_fraction: share of every shape's pairs held out for validation.
    """
    if not shapes:
        raise exceptions.InvalidArgumentError("shapes", 0, "at least one shape is required")
    resolved = [as_shape(shape) for shape in shapes]
    dense_clouds = []
    for index, shape in enumerate(resolved):
        rng = make_rng(derive_seed(seed, index))
        dense_clouds.append((geometry.sample_analytic_surface(shape, r * sparse_points, rng), rng))
    return _assemble(resolved, dense_clouds, pairs_per_shape, n, r, val_fraction)


def dataset_from_clouds(entries: Sequence[tuple[AnalyticShape | str, PointCloud]], pairs_per_shape: int, n: int,
                        r: int, seed: int, val_fraction: float = 0.1) -> Dataset:
    """
    Like :func:`build_toy_dataset`, but cuts the pairs from given dense clouds
    (for example the ones written by the ``gen-data`` command). Every sparse cloud holds
    ``len(dense) // r`` points.

    :param entries: (shape, dense cloud) per source.
    """
    if not entries:
        raise exceptions.InvalidArgumentError("entries", 0, "at least one cloud is required")
    resolved = [as_shape(shape) for shape, _ in entries]
    dense_clouds = [(dense, make_rng(derive_seed(seed, index))) for index, (_, dense) in enumerate(entries)]
    return _assemble(resolved, dense_clouds, pairs_per_shape, n, r, val_fraction)


def _assemble(shapes: list[AnalyticShape], dense_clouds: list[tuple[PointCloud, np.random.Generator]],
              pairs_per_shape: int, n: int, r: int, val_fraction: float) -> Dataset:
    train: list[Sample] = []
    val: list[Sample] = []
    clouds: list[tuple[PointCloud, PointCloud]] = []
    for index, (shape, (dense, rng)) in enumerate(zip(shapes, dense_clouds)):
        sparse_points = len(dense) // r
        if not 1 <= pairs_per_shape <= sparse_points:
            raise exceptions.InvalidArgumentError("pairs_per_shape", pairs_per_shape,
                                                  f"must be in [1, {sparse_points}]")
        sparse = PointCloud(dense.points[np.sort(rng.choice(len(dense), size=sparse_points, replace=False))],
                            shape.spec)
        seeds = rng.choice(sparse_points, size=pairs_per_shape, replace=False)
        held_out = validation_count(pairs_per_shape, val_fraction)
        samples = [Sample(pair, truth, shape, index) for pair, truth in
                   pairing.sample_training_pairs(dense, pairs_per_shape, n, r, rng, sparse.points, seeds)]
        train.extend(samples[held_out:])
        val.extend(samples[:held_out])
        clouds.append((sparse, dense))
        logger.debug(f"Shape {shape.spec}: {len(samples) - held_out} training / {held_out} validation pairs.")
    return Dataset(train, val, shapes, clouds, n, r)


def _jitter_by_index(pair: PatchPair, sigma: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    primary, adjacent = pair.primary, pair.adjacent
    if primary.indices is None or adjacent.indices is None:
        return rng.normal(0.0, sigma, primary.points.shape), rng.normal(0.0, sigma, adjacent.points.shape)
    ids = np.union1d(primary.indices, adjacent.indices)
    noise = rng.normal(0.0, sigma, (len(ids), 3))
    return noise[np.searchsorted(ids, primary.indices)], noise[np.searchsorted(ids, adjacent.indices)]


def augment_pair(sample: Sample, seed: int | np.random.Generator | None, rotate: bool = True,
                 scale_range: tuple[float, float] = (0.8, 1.2), jitter: float = 0.005,
                 noise_level: float = 0.0) -> Sample:
    """
    Applies one random rotation and one random scale to P, P′ and the ground truth together,
    then perturbs the input points only. Perturbations are drawn per source point, so points
    shared by P and P′ stay coincident.

    :param sample: normalized sample.
    :param seed: augmentation seed.
    :param rotate: draw a uniform random rotation.
    :param scale_range: bounds of the uniform scale factor.
    :param jitter: standard deviation of the input perturbation.
    :param noise_level: standard deviation of extra input noise (noise-robust training).
    """
    rng = make_rng(seed)
    matrix = Rotation.random(None, rng).as_matrix() if rotate else np.eye(3)
    low, high = scale_range
    scale = rng.uniform(low, high) if high > low else low
    transform = scale * matrix.T

    def moved(points: np.ndarray) -> np.ndarray:
        return points @ transform

    pair = sample.pair
    primary, adjacent = moved(pair.primary.points), moved(pair.adjacent.points)
    sigma = float(np.hypot(jitter, noise_level))
    if sigma > 0:
        shift_p, shift_q = _jitter_by_index(pair, sigma, rng)
        primary, adjacent = primary + shift_p, adjacent + shift_q
    p, q = pair.primary, pair.adjacent
    augmented = PatchPair(Patch(primary, p.centroid, p.scale, p.seed_index, p.indices),
                          Patch(adjacent, q.centroid, q.scale, q.seed_index, q.indices),
                          pair.overlap_count, pair.cluster_count, pair.degenerate,
                          pair.primary_index, pair.partner_index)
    return Sample(augmented, moved(sample.ground_truth), sample.shape, sample.shape_index)
