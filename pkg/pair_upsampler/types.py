"""
Domain types of the pair_upsampler package.
"""
from __future__ import annotations

from typing import Iterator

import numpy as np

from .common import exceptions
from .common.enums import ShapeKinds, Stages


class PointCloud:
    """
    A finite, non-empty set of 3D points in object units.

    :param points: (m, 3) coordinates.
    :type points: array-like

    :param label: provenance label (file name, shape spec...), optional.
    :type label: :obj:`str` or :obj:`None`
    """

    def __init__(self, points, label: str | None = None):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise exceptions.InvalidArgumentError("points", points.shape, "expected an (m, 3) array")
        if len(points) < 1:
            raise exceptions.InvalidArgumentError("points", 0, "a point cloud needs at least one point")
        if not np.isfinite(points).all():
            raise exceptions.InvalidArgumentError("points", "non-finite", "coordinates must be finite")
        self.points: np.ndarray = points
        """Coordinates, shape (m, 3)."""
        self.label: str | None = label
        """Provenance label."""

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self):
        return f"PointCloud({len(self)} points{', ' + self.label if self.label else ''})"


class Patch:
    """
    A local subset of a cloud in a normalized frame together with the inverse transform.

    :param points: (n, 3) coordinates in the normalized frame.
    :param centroid: frame origin in object units.
    :param scale: frame scale (object units per normalized unit), positive.
    :param seed_index: index of the patch seed in the parent cloud.
    :param indices: indices of the patch points in the parent cloud, optional.
    """

    def __init__(self, points: np.ndarray, centroid: np.ndarray, scale: float, seed_index: int,
                 indices: np.ndarray | None = None):
        if not scale > 0:
            raise exceptions.DegeneratePatchError(len(points))
        self.points: np.ndarray = np.asarray(points, dtype=np.float64)
        """Normalized coordinates."""
        self.centroid: np.ndarray = np.asarray(centroid, dtype=np.float64)
        """Frame origin in object units."""
        self.scale: float = float(scale)
        """Object units per normalized unit."""
        self.seed_index: int = int(seed_index)
        """Seed index in the parent cloud."""
        self.indices: np.ndarray | None = None if indices is None else np.asarray(indices, dtype=np.int64)
        """Parent-cloud indices of :attr:`points` (row aligned)."""

    def __len__(self) -> int:
        return len(self.points)

    def denormalize(self, points: np.ndarray | None = None) -> np.ndarray:
        """
        Maps normalized coordinates (by default the patch's own) back to object units.
        """
        points = self.points if points is None else np.asarray(points, dtype=np.float64)
        return points * self.scale + self.centroid

    def normalize(self, points: np.ndarray) -> np.ndarray:
        """
        Maps object-unit coordinates into this patch's frame.
        """
        return (np.asarray(points, dtype=np.float64) - self.centroid) / self.scale

    @property
    def object_points(self) -> np.ndarray:
        return self.denormalize()

    def __repr__(self):
        return f"Patch(seed={self.seed_index}, n={len(self)}, scale={self.scale:.4g})"


class PatchPair:
    """
    A primary patch P and its adjacent patch P′ expressed in P's normalized frame.

    :param primary: patch P.
    :param adjacent: patch P′; its points are already in P's frame and it carries P's transform.
    :param overlap_count: number of points in the overlap of the two patches.
    :param cluster_count: density-cluster count of the overlap region (0 when unknown).
    :param degenerate: :obj:`True` if the pair was forced without any overlap.
    """

    def __init__(self, primary: Patch, adjacent: Patch, overlap_count: int, cluster_count: int = 0,
                 degenerate: bool = False, primary_index: int | None = None, partner_index: int | None = None):
        self.primary: Patch = primary
        """Patch P."""
        self.adjacent: Patch = adjacent
        """Patch P′ in P's frame."""
        self.overlap_count: int = int(overlap_count)
        """Points shared by both patches."""
        self.cluster_count: int = int(cluster_count)
        """Density clusters in the overlap region."""
        self.degenerate: bool = degenerate
        """Pair was formed without any overlap."""
        self.primary_index: int | None = primary_index
        """Index of P in its patch set, if selected from one."""
        self.partner_index: int | None = partner_index
        """Index of P′ in its patch set, if selected from one."""

    @property
    def n(self) -> int:
        return len(self.primary)

    def __repr__(self):
        return (f"PatchPair(seed={self.primary.seed_index}, partner={self.adjacent.seed_index}, "
                f"overlap={self.overlap_count}{', degenerate' if self.degenerate else ''})")


class PatchSet:
    """
    Patches covering a source cloud.

    :param patches: patches in object-frame transforms.
    :param source: the cloud they were cut from.
    :param radius: adjacency radius in object units.
    """

    def __init__(self, patches: list[Patch], source: PointCloud, radius: float):
        if not radius > 0:
            raise exceptions.InvalidArgumentError("radius", radius, "must be positive")
        self.patches: list[Patch] = patches
        self.source: PointCloud = source
        self.radius: float = float(radius)

    def __len__(self) -> int:
        return len(self.patches)

    def __iter__(self) -> Iterator[Patch]:
        return iter(self.patches)

    def __getitem__(self, item: int) -> Patch:
        return self.patches[item]

    @property
    def centroids(self) -> np.ndarray:
        return np.array([patch.centroid for patch in self.patches])


class OverlapRegion:
    """
    Points of A ∪ B lying within the adjacency radius of both patch centroids.

    :param points: (m, 3) object-frame coordinates.
    :param counts: how many of the region points came from A and from B (shared points count for both).
    :param indices: source indices of the points, when both patches carry them.
    """

    def __init__(self, points: np.ndarray, counts: tuple[int, int], indices: np.ndarray | None = None):
        self.points: np.ndarray = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.counts: tuple[int, int] = (int(counts[0]), int(counts[1]))
        self.indices: np.ndarray | None = indices

    def __len__(self) -> int:
        return len(self.points)


class NeighborhoodIndex:
    """
    Per-query K-nearest-neighbour table, ascending by distance with ties by ascending index.

    :param indices: (queries, k) integer array.
    """

    def __init__(self, indices: np.ndarray):
        self.indices: np.ndarray = np.asarray(indices, dtype=np.int64)

    @property
    def k(self) -> int:
        return int(self.indices.shape[1])

    @property
    def query_count(self) -> int:
        return int(self.indices.shape[0])

    def __repr__(self):
        return f"NeighborhoodIndex(queries={self.query_count}, k={self.k})"


class AnalyticShape:
    """
    A surface with a closed-form unsigned distance function.

    :param kind: sphere, torus or plane-disk.
    :param params: shape parameters; missing ones take the defaults below.
        sphere: ``radius`` (1.0); torus: ``R`` (0.7), ``r`` (0.3); plane-disk: ``radius`` (1.0).
    """
    DEFAULTS = {
        ShapeKinds.SPHERE: {"radius": 1.0},
        ShapeKinds.TORUS: {"R": 0.7, "r": 0.3},
        ShapeKinds.DISK: {"radius": 1.0},
    }

    def __init__(self, kind: ShapeKinds, **params: float):
        unknown = set(params) - set(self.DEFAULTS[kind])
        if unknown:
            raise exceptions.InvalidArgumentError("params", sorted(unknown), f"unknown {kind.code} parameters")
        merged = {**self.DEFAULTS[kind], **{k: float(v) for k, v in params.items()}}
        if any(v <= 0 for v in merged.values()):
            raise exceptions.InvalidArgumentError("params", merged, "shape parameters must be positive")
        if kind == ShapeKinds.TORUS and merged["r"] >= merged["R"]:
            raise exceptions.InvalidArgumentError("params", merged, "torus needs r < R")
        self.kind: ShapeKinds = kind
        self.params: dict[str, float] = merged

    def distance(self, points: np.ndarray) -> np.ndarray:
        """
        Unsigned distance from every point to the surface.
        """
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if self.kind == ShapeKinds.SPHERE:
            return np.abs(np.linalg.norm(p, axis=1) - self.params["radius"])
        rho = np.hypot(p[:, 0], p[:, 1])
        if self.kind == ShapeKinds.TORUS:
            return np.abs(np.hypot(rho - self.params["R"], p[:, 2]) - self.params["r"])
        outside = np.maximum(rho - self.params["radius"], 0.0)
        return np.hypot(outside, p[:, 2])

    @property
    def spec(self) -> str:
        return self.kind.code + ":" + ",".join(f"{k}={v!r}" for k, v in self.params.items())

    def __eq__(self, other):
        return isinstance(other, AnalyticShape) and self.kind == other.kind and self.params == other.params

    def __hash__(self):
        return hash(self.spec)

    def __repr__(self):
        return f"AnalyticShape({self.spec})"


class MetricReport:
    """
    CD / HD / EMD / P2F of one evaluation, stored raw; :meth:`scaled` gives the ×10³ table values.
    Metrics that were not computed are :obj:`None`.
    """
    SCALE = 1e3
    FIELDS = ("cd", "hd", "emd", "p2f_mean", "p2f_std")

    def __init__(self, cd: float, hd: float, emd: float | None = None, p2f_mean: float | None = None,
                 p2f_std: float | None = None):
        self.cd = float(cd)
        self.hd = float(hd)
        self.emd = None if emd is None else float(emd)
        self.p2f_mean = None if p2f_mean is None else float(p2f_mean)
        self.p2f_std = None if p2f_std is None else float(p2f_std)
        for name, value in self.items(scaled=False):
            if not (np.isfinite(value) and value >= 0):
                raise exceptions.InvalidArgumentError(name, value, "metrics must be finite and non-negative")

    def items(self, scaled: bool = True) -> list[tuple[str, float]]:
        factor = self.SCALE if scaled else 1.0
        return [(name, getattr(self, name) * factor) for name in self.FIELDS if getattr(self, name) is not None]

    def scaled(self) -> dict[str, float]:
        return dict(self.items(scaled=True))

    @classmethod
    def average(cls, reports: list[MetricReport]) -> MetricReport:
        def avg(name):
            values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
            return float(np.mean(values)) if values else None
        return cls(*(avg(name) for name in cls.FIELDS))

    def __repr__(self):
        return "MetricReport(" + ", ".join(f"{k}={v:.4f}" for k, v in self.items()) + " ×1e-3)"


class MetricRow:
    """
    One row of an evaluation table: a noise level, a pipeline stage and its metrics.
    """

    def __init__(self, noise_level: float, stage: Stages, report: MetricReport):
        self.noise_level: float = float(noise_level)
        self.stage: Stages = stage
        self.report: MetricReport = report

    def __repr__(self):
        return f"MetricRow(noise={self.noise_level}, stage={self.stage.code}, {self.report})"


class Sample:
    """
    A training / validation sample: a normalized patch pair and its dense ground truth.

    :param pair: input pair in P's frame.
    :param ground_truth: (r·n, 3) dense points in the same frame.
    :param shape: analytic surface the sample was cut from (for P2F).
    :param shape_index: index of the shape in the dataset.
    """

    def __init__(self, pair: PatchPair, ground_truth: np.ndarray, shape: AnalyticShape | None = None,
                 shape_index: int = 0):
        self.pair: PatchPair = pair
        self.ground_truth: np.ndarray = np.asarray(ground_truth, dtype=np.float64)
        self.shape: AnalyticShape | None = shape
        self.shape_index: int = shape_index

    @property
    def seed_index(self) -> int:
        return self.pair.primary.seed_index

    def __repr__(self):
        return f"Sample(shape={self.shape_index}, seed={self.seed_index}, gt={len(self.ground_truth)})"


class Dataset:
    """
    Train / validation split plus the clouds the samples were cut from.

    :param clouds: per shape, the (sparse, dense) clouds in object units.
    """

    def __init__(self, train: list[Sample], val: list[Sample], shapes: list[AnalyticShape],
                 clouds: list[tuple[PointCloud, PointCloud]], n: int, r: int):
        self.train: list[Sample] = train
        self.val: list[Sample] = val
        self.shapes: list[AnalyticShape] = shapes
        self.clouds: list[tuple[PointCloud, PointCloud]] = clouds
        self.n: int = n
        self.r: int = r

    def __repr__(self):
        return f"Dataset(train={len(self.train)}, val={len(self.val)}, shapes={len(self.shapes)})"
