from __future__ import annotations

from typing import Callable, Iterable, Iterator

import numpy as np
from loguru import logger

from . import geometry, pairing
from .autodiff import GradientMap, Tape, Tensor
from .common import exceptions
from .config import UpsamplerConfig
from .losses import reconstruction_loss
from .model_mixins.features import FeatureExtractionMixin
from .model_mixins.patch_correlation import PatchCorrelationMixin
from .model_mixins.point_correlation import PointCorrelationMixin
from .params import ModelParams
from .types import PatchPair, PointCloud


class Upsampler(FeatureExtractionMixin, PatchCorrelationMixin, PointCorrelationMixin):
    """
    Upsamples normalized patch pairs r-fold: feature extraction, the patch stage (coarse points)
    and the point stage (refined points).

    :param params: network weights.
    :type params: :class:`pair_upsampler.params.ModelParams`
    """

    def __init__(self, params: ModelParams):
        self.params: ModelParams = params
        """Network weights; read-only during inference."""
        self.config: UpsamplerConfig = params.config
        """Sizes and ablation switches."""

    @classmethod
    def initialize(cls, config: UpsamplerConfig, seed: int | np.random.Generator | None = 0) -> Upsampler:
        return cls(ModelParams.initialize(config, seed))

    def _check_pair(self, pair: PatchPair):
        if len(pair.primary) != self.config.n:
            raise exceptions.ConfigMismatchError("n", self.config.n, len(pair.primary))
        if len(pair.adjacent) != self.config.n:
            raise exceptions.ConfigMismatchError("n", self.config.n, len(pair.adjacent))

    def forward(self, points: np.ndarray, adjacent: np.ndarray, weights) -> tuple[Tensor, Tensor]:
        """
        Runs the three stages on raw normalized arrays.

        :return: coarse points Q′ and refined points Q, both (r·n, 3).
        """
        if self.config.no_pacm_pairs:
            adjacent = points
        features = self.extract_features(points, weights)
        coarse, expanded = self.pacm_forward(points, adjacent, features, weights)
        return coarse, self.pocm_forward(coarse, expanded, weights)

    def upsample_patch_pair(self, pair: PatchPair, tape: Tape | None = None) -> tuple[Tensor, Tensor]:
        """
        Upsamples one pair in its normalized frame. When a tape is given, the weights are
        watched on it and the outputs are recorded for :meth:`gradients`.
        """
        self._check_pair(pair)
        weights = self.params.watch(tape) if tape is not None else self.params.constants()
        return self.forward(pair.primary.points, pair.adjacent.points, weights)

    def upsample(self, pair: PatchPair) -> tuple[np.ndarray, np.ndarray]:
        """
        Inference on one pair.

        :return: coarse and refined points in the pair's normalized frame.
        """
        coarse, refined = self.upsample_patch_pair(pair)
        return coarse.values, refined.values

    def upsample_object(self, pair: PatchPair) -> tuple[np.ndarray, np.ndarray]:
        """
        Inference on one pair, mapped back to object units.
        """
        coarse, refined = self.upsample(pair)
        return pair.primary.denormalize(coarse), pair.primary.denormalize(refined)

    def loss(self, pair: PatchPair, truth: np.ndarray, lam: float, tape: Tape | None = None,
             normalized: bool = True) -> Tensor:
        coarse, refined = self.upsample_patch_pair(pair, tape)
        return reconstruction_loss(coarse, refined, truth, lam, normalized)

    def gradients(self, pair: PatchPair, truth: np.ndarray, lam: float,
                  normalized: bool = True) -> tuple[float, GradientMap]:
        """
        Loss value and weight gradients for one sample, on a fresh tape.
        """
        tape = Tape()
        value = self.loss(pair, truth, lam, tape, normalized)
        loss = float(value.values)
        return loss, tape.backward(value)

    def upsample_cloud(self, cloud: PointCloud | np.ndarray, k_candidates: int = pairing.DEFAULT_CANDIDATES,
                       map_fn: Callable[[Callable, Iterable], Iterator] = map) -> tuple[PointCloud, PointCloud]:
        """
        Upsamples a whole cloud: farthest-point patches covering it, adjacent-pair selection,
        per-pair upsampling, and a farthest-point merge to r times the input count.

        :param cloud: sparse cloud in object units, at least n points.
        :param k_candidates: partner candidates per patch.
        :param map_fn: mapping used for the per-pair inference (see :class:`pair_upsampler.pool.PooledUpsampler`).

        :return: coarse and refined clouds of r·N points.
        """
        source = cloud if isinstance(cloud, PointCloud) else PointCloud(cloud)
        n, r = self.config.n, self.config.r
        if len(source) < n:
            raise exceptions.InvalidArgumentError("cloud", len(source), f"needs at least n={n} points")
        if len(source) == n:
            patch_set = pairing.build_patch_set(source, n, seeds=1)
            if len(patch_set) < 2:
                patch_set.patches.append(patch_set.patches[0])
        else:
            patch_set = pairing.build_patch_set(source, n)
        pairs = pairing.select_adjacent_pairs(patch_set, k_candidates)
        logger.debug(f"Upsampling {len(source)} points through {len(pairs)} patch pairs.")
        outputs = list(map_fn(self.upsample_object, pairs))
        target = r * len(source)
        coarse = geometry.merge_patches([c for c, _ in outputs], target)
        refined = geometry.merge_patches([q for _, q in outputs], target)
        return coarse, refined


def upsample_patch_pair(pair: PatchPair, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """
    Coarse and refined points of one normalized pair.
    """
    return Upsampler(params).upsample(pair)
