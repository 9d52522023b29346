from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .params import ModelParams
from .types import PatchPair, PointCloud
from .upsampler import Upsampler


class PooledUpsampler:
    """
    Runs per-pair inference of an :class:`Upsampler` on a thread pool.
    Weights are shared read-only; every pair is evaluated without a tape.
    Attribute access not defined here is delegated to the wrapped upsampler.

    :param params: network weights.
    :param workers: pool size.
    """

    def __init__(self, params: ModelParams, workers: int = 4):
        self._upsampler = Upsampler(params)
        self.workers: int = max(1, int(workers))

    def __getattr__(self, name):
        return getattr(self._upsampler, name)

    def upsample_pairs(self, pairs: list[PatchPair]) -> list[tuple[np.ndarray, np.ndarray]]:
        """
        Coarse and refined points of every pair in its normalized frame, in input order.
        """
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(self._upsampler.upsample, pairs))

    def upsample_cloud(self, cloud: PointCloud | np.ndarray, *args, **kwargs) -> tuple[PointCloud, PointCloud]:
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return self._upsampler.upsample_cloud(cloud, *args, map_fn=pool.map, **kwargs)
