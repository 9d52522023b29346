from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ..autodiff import Tensor, ops
from .. import geometry
from ..common import exceptions
from ..params import extractor_input_width
from .layers import Weights, edge_conv

if TYPE_CHECKING:
    from ..upsampler import Upsampler


class FeatureExtractionMixin:
    def extract_features(self: Upsampler, points: np.ndarray, weights: Weights) -> Tensor:
        """
        Per-point features of a normalized patch from densely connected edge-convolution blocks.
        Every block groups over the coordinate KNN graph; block b reads the concatenated
        outputs of blocks 0..b-1 (the first block reads the coordinates).

        :param points: (n, 3) patch.
        :param weights: parameter tensors.

        :return: (n, C) features.
        :rtype: :class:`pair_upsampler.autodiff.Tensor`
        """
        k = self.config.k
        if k > len(points):
            raise exceptions.InvalidArgumentError("k", k, f"exceeds the patch size {len(points)}")
        index = geometry.knn_indices(points, points, k)
        outputs: list[Tensor] = []
        for block in range(self.config.extractor_depth):
            inputs = ops.as_tensor(points) if block == 0 else ops.concat(outputs, axis=-1)
            if inputs.shape[-1] != extractor_input_width(block, self.config):
                raise exceptions.ShapeMismatchError("extract_features", inputs.shape,
                                                    (extractor_input_width(block, self.config),))
            outputs.append(edge_conv(inputs, index, weights, f"extractor.block{block}"))
        return outputs[-1]
