from __future__ import annotations

from typing import TYPE_CHECKING

from ..autodiff import Tensor, ops
from .. import geometry
from ..common import exceptions
from ..common.enums import Activations
from .layers import Weights, attention_block, perceptron, position_code

if TYPE_CHECKING:
    from ..upsampler import Upsampler


class PointCorrelationMixin:
    def pocm_forward(self: Upsampler, coarse: Tensor, expanded: Tensor, weights: Weights) -> Tensor:
        """
        Point stage: attention over the KNN neighbourhood of every coarse point, then a per-point
        offset added to the coarse coordinates.

        :param coarse: (r·n, 3) coarse points Q′.
        :param expanded: (r·n, C′) expanded features.

        :return: refined points Q.
        """
        if coarse.shape[0] != expanded.shape[0]:
            raise exceptions.ShapeMismatchError("pocm_forward", coarse.shape, expanded.shape)
        if self.config.no_pocm:
            return coarse
        index = geometry.knn_indices(coarse.values, coarse.values, self.config.k)
        code = position_code(self.config.point_encoding, coarse, index)
        neighbors = ops.gather(expanded, index.indices)
        corrected = attention_block(expanded, neighbors, code, weights, "pocm", Activations.RELU)
        offsets = perceptron(corrected, weights, "pocm.offset")
        return ops.add(coarse, offsets)
