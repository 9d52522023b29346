"""
Metric tables of a trained upsampler over a dataset, with optional input noise.

Every noise level yields one row per stage: the coarse output Q′, the refined output Q and the
replicate-input baseline. Metrics are computed in object units so P2F can use the analytic shapes.
"""
from __future__ import annotations

import numpy as np
from loguru import logger

from .. import geometry
from ..common import exceptions
from ..common.enums import Stages
from ..common.utils import derive_seed
from ..losses import BRUTE_FORCE_LIMIT, chamfer, emd_approx, emd_exact, hausdorff, p2f_analytic
from ..params import ModelParams
from ..pool import PooledUpsampler
from ..types import AnalyticShape, Dataset, MetricReport, MetricRow, Patch, PatchPair, Sample
from ..upsampler import Upsampler
from .checkpoint import Checkpoint

EMD_LIMIT = 4096
"""Largest cloud for which EMD is reported at all."""


def replicate_baseline(points: np.ndarray, r: int) -> np.ndarray:
    """
    Each input point repeated r times in place.
    """
    return np.repeat(np.asarray(points, dtype=np.float64), r, axis=0)


def metric_report(prediction: np.ndarray, truth: np.ndarray, shape: AnalyticShape | None = None) -> MetricReport:
    """
    CD and HD always; EMD when both clouds have the same size (exact up to 2048 points,
    auction-approximated up to 4096); P2F when a shape is given.
    """
    emd = None
    if len(prediction) == len(truth) <= EMD_LIMIT:
        emd = emd_exact(prediction, truth) if len(truth) <= BRUTE_FORCE_LIMIT else emd_approx(prediction, truth)
    p2f_mean, p2f_std = p2f_analytic(prediction, shape) if shape is not None else (None, None)
    return MetricReport(chamfer(prediction, truth), hausdorff(prediction, truth), emd, p2f_mean, p2f_std)


def _noise_seed(seed: int, level: float, shape_index: int) -> int:
    return derive_seed(seed, round(level * 1e6), shape_index)


def _rebuilt(patch: Patch, noisy: np.ndarray) -> Patch:
    return Patch(patch.normalize(noisy[patch.indices]), patch.centroid, patch.scale, patch.seed_index, patch.indices)


def noisy_sample(sample: Sample, noisy: np.ndarray) -> Sample:
    """
    The sample with its input points re-read from a perturbed copy of the sparse cloud.
    Both patches keep their frames, so the ground truth stays aligned.
    """
    pair = sample.pair
    if pair.primary.indices is None or pair.adjacent.indices is None:
        raise exceptions.InvalidArgumentError("sample", sample, "patches carry no source indices")
    rebuilt = PatchPair(_rebuilt(pair.primary, noisy), _rebuilt(pair.adjacent, noisy), pair.overlap_count,
                        pair.cluster_count, pair.degenerate, pair.primary_index, pair.partner_index)
    return Sample(rebuilt, sample.ground_truth, sample.shape, sample.shape_index)


def _as_params(model: Checkpoint | Upsampler | ModelParams) -> ModelParams:
    return model.params if isinstance(model, (Checkpoint, Upsampler)) else model


class Evaluator:
    """
    Evaluates one set of weights on a dataset.

    :param model: checkpoint, upsampler or bare weights.
    :param dataset: dataset whose n and r must match the weights.
    :param workers: threads for per-sample inference.
    :param seed: noise seed.
    """

    def __init__(self, model: Checkpoint | Upsampler | ModelParams, dataset: Dataset, workers: int = 1,
                 seed: int = 0):
        params = _as_params(model)
        for field in ("n", "r"):
            expected, found = getattr(params.config, field), getattr(dataset, field)
            if expected != found:
                raise exceptions.ConfigMismatchError(field, expected, found)
        self.upsampler = PooledUpsampler(params, workers)
        self.dataset: Dataset = dataset
        self.seed: int = seed

    @property
    def samples(self) -> list[Sample]:
        return self.dataset.val or self.dataset.train

    def noisy_clouds(self, level: float) -> list[np.ndarray]:
        return [geometry.add_relative_noise(sparse, level, _noise_seed(self.seed, level, index)).points
                for index, (sparse, _) in enumerate(self.dataset.clouds)]

    def patch_rows(self, level: float) -> list[MetricRow]:
        clouds = self.noisy_clouds(level)
        samples = [noisy_sample(s, clouds[s.shape_index]) for s in self.samples]
        outputs = self.upsampler.upsample_pairs([s.pair for s in samples])
        r = self.dataset.r
        reports: dict[Stages, list[MetricReport]] = {stage: [] for stage in Stages}
        for sample, (coarse, refined) in zip(samples, outputs):
            frame = sample.pair.primary
            truth = frame.denormalize(sample.ground_truth)
            predictions = {Stages.COARSE: coarse, Stages.REFINED: refined,
                           Stages.BASELINE: replicate_baseline(frame.points, r)}
            for stage, points in predictions.items():
                reports[stage].append(metric_report(frame.denormalize(points), truth, sample.shape))
        return [MetricRow(level, stage, MetricReport.average(reports[stage])) for stage in Stages]

    def shape_rows(self, level: float) -> list[MetricRow]:
        clouds = self.noisy_clouds(level)
        r = self.dataset.r
        reports: dict[Stages, list[MetricReport]] = {stage: [] for stage in Stages}
        for index, (shape, (_, dense)) in enumerate(zip(self.dataset.shapes, self.dataset.clouds)):
            coarse, refined = self.upsampler.upsample_cloud(clouds[index])
            predictions = {Stages.COARSE: coarse.points, Stages.REFINED: refined.points,
                           Stages.BASELINE: replicate_baseline(clouds[index], r)}
            for stage, points in predictions.items():
                reports[stage].append(metric_report(points, dense.points, shape))
        return [MetricRow(level, stage, MetricReport.average(reports[stage])) for stage in Stages]

    def rows(self, noise_levels: list[float], whole_shapes: bool = False) -> list[MetricRow]:
        result = []
        for level in noise_levels:
            if level < 0:
                raise exceptions.InvalidArgumentError("noise_level", level, "must be non-negative")
            rows = self.shape_rows(level) if whole_shapes else self.patch_rows(level)
            refined = next(row for row in rows if row.stage == Stages.REFINED)
            logger.info(f"Noise {level:g}: refined CD {refined.report.cd * MetricReport.SCALE:.4f}e-3.")
            result.extend(rows)
        return result


def evaluate(model: Checkpoint | Upsampler | ModelParams, dataset: Dataset, noise_levels: list[float] = (0.0,),
             whole_shapes: bool = False, workers: int = 1, seed: int = 0) -> list[MetricRow]:
    """
    Evaluates coarse, refined and baseline outputs at every noise level.

    :param model: checkpoint, upsampler or weights.
    :param dataset: evaluation data; validation samples are used when present.
    :param noise_levels: Gaussian noise levels as fractions of each sparse cloud's bounding radius.
    :param whole_shapes: upsample every sparse cloud end to end (patching, pairing, merging) and
        compare against its dense cloud instead of evaluating the individual samples.
    :param workers: threads for per-pair inference.
    :param seed: noise seed; equal seeds and levels give identical rows.

    :return: one row per (noise level × stage), ordered by level then coarse, refined, baseline.
    :raises ConfigMismatchError: when the weights' n or r differ from the dataset's.
    """
    return Evaluator(model, dataset, workers, seed).rows(list(noise_levels), whole_shapes)


def format_rows(rows: list[MetricRow]) -> str:
    """
    CSV with header ``noise,stage,metric,value``; values ×10³.
    """
    lines = ["noise,stage,metric,value"]
    for row in rows:
        for name, value in row.report.items():
            lines.append(f"{row.noise_level!r},{row.stage.code},{name},{value!r}")
    return "\n".join(lines) + "\n"
