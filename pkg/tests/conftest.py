from __future__ import annotations

import numpy as np
import pytest

from pair_upsampler import geometry
from pair_upsampler.config import TrainConfig, UpsamplerConfig
from pair_upsampler.params import ModelParams
from pair_upsampler.training.dataset import build_toy_dataset
from pair_upsampler.training.runner import train
from pair_upsampler.types import PatchPair


def toy_config(**overrides) -> UpsamplerConfig:
    """
    Tiny network used by gradient and structure tests.
    """
    values = dict(n=8, r=2, k=4, c=8, c_expanded=8, extractor_depth=2, hidden=8)
    values.update(overrides)
    return UpsamplerConfig(**values)


def randomized(params: ModelParams, seed: int = 0, scale: float = 0.4) -> ModelParams:
    """
    The same arrays filled with random values, output layers included.
    """
    rng = np.random.default_rng(seed)
    return params.replace({name: rng.normal(0.0, scale, values.shape) for name, values in params.arrays.items()})


def random_pair(n: int, seed: int = 0, shift: float = 0.5) -> PatchPair:
    rng = np.random.default_rng(seed)
    primary = rng.normal(size=(n, 3))
    adjacent = np.concatenate([primary[: n // 2], rng.normal(size=(n - n // 2, 3)) + shift])
    indices = np.arange(n)
    return geometry.normalize_pair(primary, adjacent, primary_seed=0, adjacent_seed=1, primary_indices=indices,
                                   adjacent_indices=np.concatenate([indices[: n // 2], indices[n // 2:] + n]))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_config() -> TrainConfig:
    return TrainConfig.desk()


@pytest.fixture(scope="session")
def desk_dataset(desk_config):
    model = desk_config.model
    return build_toy_dataset(desk_config.shapes, desk_config.pairs_per_shape, model.n, model.r, desk_config.seed,
                             desk_config.sparse_points, desk_config.val_fraction)


@pytest.fixture(scope="session")
def trained(desk_config, desk_dataset):
    """
    Desk-scale training run shared by the slow acceptance tests.
    """
    return train(desk_config, desk_dataset)
