"""
Helper functions shared by the geometry, training and CLI layers.
"""
from __future__ import annotations

import numpy as np

from .enums import ShapeKinds
from . import exceptions


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    """
    Returns a numpy generator for the given seed (or the generator itself).

    :param seed: integer seed, an existing generator or :obj:`None`.

    :return: generator.
    :rtype: :class:`numpy.random.Generator`
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(seed: int, *salt: int) -> int:
    """
    Deterministically derives a child seed, so that sub-tasks get independent streams.
    """
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(s) & 0xFFFFFFFF for s in salt]])
    return int(sequence.generate_state(1)[0])


def as_points(values) -> np.ndarray:
    """
    Converts an array-like to a float64 (m, 3) array.
    """
    points = np.asarray(values, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise exceptions.InvalidArgumentError("points", points.shape, "expected an (m, 3) array")
    return points


def unit_frame(points: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Computes the centroid and max-radius of a point set.

    :return: (centroid, scale).
    """
    centroid = points.mean(axis=0)
    scale = float(np.sqrt(((points - centroid) ** 2).sum(axis=1)).max()) if len(points) else 0.0
    return centroid, scale


def pairwise_sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Exact squared Euclidean distances, computed from coordinate differences so that
    equal geometric distances compare equal.
    """
    diff = a[:, None, :] - b[None, :, :]
    return (diff * diff).sum(axis=-1)


def parse_shape_spec(spec: str) -> tuple[ShapeKinds, dict[str, float]]:
    """
    Parses a shape description such as ``torus:R=0.7,r=0.3`` or ``sphere:radius=1``.

    :param spec: shape description.

    :return: shape kind and its parameters.
    """
    name, _, rest = spec.partition(":")
    kind = ShapeKinds.from_code(name)
    params: dict[str, float] = {}
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"Malformed shape parameter '{item}' (expected key=value).")
        params[key.strip()] = float(value)
    return kind, params
