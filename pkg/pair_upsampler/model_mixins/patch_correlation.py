from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ..autodiff import Tensor, ops
from .. import geometry
from ..common import exceptions
from ..common.enums import Activations
from .layers import Weights, attention_block, expand_features, position_code, reconstruct_coarse

if TYPE_CHECKING:
    from ..upsampler import Upsampler


class PatchCorrelationMixin:
    def enhance_features(self: Upsampler, points: np.ndarray, adjacent: np.ndarray, features: Tensor,
                         weights: Weights) -> Tensor:
        """
        Feature enhancement: attention over the KNN neighbourhood of every point of P, with a
        position code that also sees the neighbourhood in P ∪ P′.
        """
        k = self.config.k
        local = geometry.knn_indices(points, points, k)
        union = np.concatenate([points, adjacent], axis=0)
        cross = geometry.knn_indices(union, points, k)
        code = position_code(self.config.patch_encoding, points, local, union, cross)
        neighbors = ops.gather(features, local.indices)
        return attention_block(features, neighbors, code, weights, "pacm", Activations.TANH)

    def pacm_forward(self: Upsampler, points: np.ndarray, adjacent: np.ndarray, features: Tensor,
                     weights: Weights) -> tuple[Tensor, Tensor]:
        """
        Patch stage: enhance, expand r-fold, regress coarse coordinates.

        :param points: (n, 3) patch P.
        :param adjacent: (n, 3) adjacent patch P′ in P's frame.
        :param features: (n, C) features of P.

        :return: coarse points Q′ (r·n, 3) and expanded features (r·n, C′).
        """
        if points.shape != adjacent.shape:
            raise exceptions.ShapeMismatchError("pacm_forward", points.shape, adjacent.shape)
        if features.shape[0] != len(points):
            raise exceptions.ShapeMismatchError("pacm_forward", points.shape, features.shape)
        enhanced = features if self.config.no_pacm else self.enhance_features(points, adjacent, features, weights)
        local = geometry.knn_indices(points, points, self.config.k)
        expanded = expand_features(enhanced, local, weights, self.config.r)
        coarse = reconstruct_coarse(expanded, weights)
        if self.config.coarse_anchor:
            coarse = ops.add(coarse, np.repeat(points, self.config.r, axis=0))
        return coarse, expanded
