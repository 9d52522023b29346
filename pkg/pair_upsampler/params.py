"""
Named weight arrays of the upsampling network.
"""
from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from .autodiff import Tape, Tensor
from .common import exceptions
from .common.utils import make_rng
from .config import UpsamplerConfig

ZERO_INIT = ("pacm.reconstruct.out", "pocm.offset.out")
"""Output layers that start at zero, so coarse points start at their anchors and Q = Q′."""


def _layer(shapes: dict, name: str, fan_in: int, fan_out: int):
    shapes[f"{name}.weight"] = (fan_in, fan_out)
    shapes[f"{name}.bias"] = (fan_out,)


def _attention(shapes: dict, prefix: str, code_width: int, width: int):
    _layer(shapes, f"{prefix}.encoder.hidden", code_width, width)
    _layer(shapes, f"{prefix}.encoder.out", width, width)
    _layer(shapes, f"{prefix}.gamma.hidden", width, width)
    _layer(shapes, f"{prefix}.gamma.out", width, width)
    for name in ("phi", "psi", "alpha"):
        _layer(shapes, f"{prefix}.{name}", width, width)


def extractor_input_width(block: int, config: UpsamplerConfig) -> int:
    """
    Input width of a dense extractor block: raw coordinates for the first block,
    the concatenated outputs of all earlier blocks afterwards.
    """
    return 3 if block == 0 else block * config.c


def parameter_shapes(config: UpsamplerConfig) -> dict[str, tuple[int, ...]]:
    """
    Name -> shape of every trainable array, in a fixed order.
    """
    shapes: dict[str, tuple[int, ...]] = {}
    for block in range(config.extractor_depth):
        _layer(shapes, f"extractor.block{block}", 2 * extractor_input_width(block, config), config.c)
    _attention(shapes, "pacm", config.patch_encoding.width, config.c)
    _layer(shapes, "pacm.expand", 2 * config.c, config.r * config.c_expanded)
    _layer(shapes, "pacm.reconstruct.hidden", config.c_expanded, config.hidden)
    _layer(shapes, "pacm.reconstruct.out", config.hidden, 3)
    _attention(shapes, "pocm", config.point_encoding.width, config.c_expanded)
    _layer(shapes, "pocm.offset.hidden", config.c_expanded, config.hidden)
    _layer(shapes, "pocm.offset.out", config.hidden, 3)
    return shapes


class ModelParams:
    """
    All weights of one network, keyed by dotted layer names.

    :param arrays: name -> array.
    :param config: sizes the arrays must match.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray], config: UpsamplerConfig):
        self.config: UpsamplerConfig = config
        """Sizes the arrays were built for."""
        self.arrays: dict[str, np.ndarray] = {name: np.asarray(values, dtype=np.float64)
                                              for name, values in arrays.items()}
        """Weight arrays."""
        self.validate()

    @classmethod
    def initialize(cls, config: UpsamplerConfig, seed: int | np.random.Generator | None = 0) -> ModelParams:
        """
        Glorot-uniform weights, zero biases and zero output layers for the two coordinate heads.
        """
        rng = make_rng(seed)
        arrays = {}
        for name, shape in parameter_shapes(config).items():
            if len(shape) == 1 or name.rsplit(".", 1)[0] in ZERO_INIT:
                arrays[name] = np.zeros(shape)
            else:
                limit = np.sqrt(6.0 / (shape[0] + shape[1]))
                arrays[name] = rng.uniform(-limit, limit, size=shape)
        return cls(arrays, config)

    def validate(self):
        """
        :raises CheckpointShapeError: when an array is missing, extra or of the wrong shape.
        :raises InvalidArgumentError: when an array holds non-finite values.
        """
        expected = parameter_shapes(self.config)
        for name, shape in expected.items():
            if name not in self.arrays:
                raise exceptions.CheckpointShapeError(name, shape, None)
            if self.arrays[name].shape != shape:
                raise exceptions.CheckpointShapeError(name, shape, self.arrays[name].shape)
        for name in self.arrays:
            if name not in expected:
                raise exceptions.CheckpointShapeError(name, None, self.arrays[name].shape)
            if not np.isfinite(self.arrays[name]).all():
                raise exceptions.InvalidArgumentError(name, "non-finite", "weights must be finite")

    def watch(self, tape: Tape) -> dict[str, Tensor]:
        """
        Registers every array on ``tape`` as a trainable leaf.
        """
        return tape.watch_all(self.arrays)

    def constants(self) -> dict[str, Tensor]:
        """
        Unrecorded tensors for inference.
        """
        return {name: Tensor(values) for name, values in self.arrays.items()}

    def replace(self, arrays: Mapping[str, np.ndarray]) -> ModelParams:
        return ModelParams(arrays, self.config)

    def copy(self) -> ModelParams:
        return ModelParams({name: values.copy() for name, values in self.arrays.items()}, self.config)

    @property
    def size(self) -> int:
        return int(sum(values.size for values in self.arrays.values()))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def __len__(self) -> int:
        return len(self.arrays)

    def __repr__(self):
        return f"ModelParams({len(self)} arrays, {self.size} values)"
