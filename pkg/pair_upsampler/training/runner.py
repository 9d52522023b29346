from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Generator

import numpy as np
from loguru import logger

from ..autodiff import AdamState, GradientMap, adam_update
from ..common import exceptions
from ..common.utils import derive_seed, make_rng
from ..config import TrainConfig, lr_schedule
from ..losses import chamfer
from ..params import ModelParams
from ..types import Dataset, Sample
from ..upsampler import Upsampler
from .checkpoint import Checkpoint
from .dataset import augment_pair
from .events import BestCheckpointEvent, EpochFinishedEvent, StepFinishedEvent, TrainingFinishedEvent

LOG_COLUMNS = ("epoch", "loss", "lambda", "lr", "val_cd")

TrainingEvent = StepFinishedEvent | EpochFinishedEvent | BestCheckpointEvent | TrainingFinishedEvent


class Trainer:
    """
    Optimizes an :class:`pair_upsampler.upsampler.Upsampler` on a dataset with Adam.

    :param config: training configuration.
    :type config: :class:`pair_upsampler.config.TrainConfig`

    :param dataset: training and validation samples; its n and r must match the config.
    :type dataset: :class:`pair_upsampler.types.Dataset`

    :param params: starting weights, freshly initialized from the config seed when omitted.
    :type params: :class:`pair_upsampler.params.ModelParams` or :obj:`None`

    :param workers: threads computing per-sample gradients of a batch; gradients are summed in
        sample order, so results do not depend on this value.
    :type workers: :obj:`int`
    """

    def __init__(self, config: TrainConfig, dataset: Dataset, params: ModelParams | None = None,
                 workers: int = 1, tag: str | None = None):
        for field, value in (("n", dataset.n), ("r", dataset.r)):
            if getattr(config.model, field) != value:
                raise exceptions.ConfigMismatchError(field, getattr(config.model, field), value)
        if not dataset.train:
            raise exceptions.InvalidArgumentError("dataset", 0, "no training samples")
        self.config: TrainConfig = config
        self.dataset: Dataset = dataset
        self.params: ModelParams = params or ModelParams.initialize(config.model, derive_seed(config.seed, 1))
        """Current weights."""
        self.state: AdamState = AdamState.for_params(self.params.arrays)
        """Optimizer moments."""
        self.rng: np.random.Generator = make_rng(derive_seed(config.seed, 2))
        """Shuffling and augmentation stream."""
        self.workers: int = max(1, workers)
        self.tag: str = tag or f"run-{config.seed}"
        self.step: int = 0
        """Optimizer steps taken."""
        self.best: Checkpoint | None = None
        """Checkpoint with the lowest validation CD so far."""
        self.log: list[dict[str, float]] = []
        """One row per finished epoch."""

    def _prepare(self, sample: Sample, epoch: int, position: int) -> Sample:
        config = self.config
        if not config.augment:
            return sample
        seed = derive_seed(config.seed, 3, epoch, position)
        noise = make_rng(seed).uniform(0.0, config.noise_augmentation_max) if config.noise_augmentation_max else 0.0
        return augment_pair(sample, derive_seed(seed, 1), config.rotate, (config.scale_min, config.scale_max),
                            config.jitter, noise)

    def _sample_gradients(self, upsampler: Upsampler, sample: Sample, lam: float) -> tuple[float, GradientMap]:
        return upsampler.gradients(sample.pair, sample.ground_truth, lam, self.config.emd_normalized)

    def _batch_gradients(self, batch: list[Sample], lam: float) -> tuple[float, GradientMap]:
        upsampler = Upsampler(self.params)
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(lambda s: self._sample_gradients(upsampler, s, lam), batch))
        else:
            results = [self._sample_gradients(upsampler, sample, lam) for sample in batch]
        total = {name: np.zeros_like(values) for name, values in self.params.arrays.items()}
        loss = 0.0
        for value, grads in results:
            loss += value
            for name in total:
                total[name] = total[name] + grads[name]
        scale = 1.0 / len(batch)
        return loss * scale, {name: values * scale for name, values in total.items()}

    def validate(self, params: ModelParams | None = None) -> float:
        """
        Mean Chamfer distance between refined outputs and ground truth over the validation samples
        (the training samples when nothing is held out).
        """
        upsampler = Upsampler(params or self.params)
        samples = self.dataset.val or self.dataset.train
        return float(np.mean([chamfer(upsampler.upsample(s.pair)[1], s.ground_truth) for s in samples]))

    def listen(self) -> Generator[TrainingEvent, None, None]:
        """
        Runs the whole schedule, yielding an event after every optimizer step and epoch.

        :raises DivergenceError: when a batch loss or gradient is not finite.
        """
        config = self.config
        train = self.dataset.train
        best_cd = math.inf
        best_epoch = -1
        for epoch in range(config.epochs):
            lam = config.loss.weight(epoch)
            lr = lr_schedule(epoch, config)
            order = self.rng.permutation(len(train))
            losses = []
            for start in range(0, len(order), config.batch_size):
                positions = order[start:start + config.batch_size]
                batch = [self._prepare(train[i], epoch, int(i)) for i in positions]
                loss, grads = self._batch_gradients(batch, lam)
                self.step += 1
                if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                    logger.error(f"Training diverged at step {self.step} (loss {loss}).")
                    raise exceptions.DivergenceError(self.step, loss)
                arrays, self.state = adam_update(self.params.arrays, grads, self.state, lr)
                self.params = self.params.replace(arrays)
                losses.append(loss)
                yield StepFinishedEvent(self.tag, epoch, self.step, loss)
            val_cd = self.validate()
            event = EpochFinishedEvent(self.tag, epoch, float(np.mean(losses)), lam, lr, val_cd)
            self.log.append(event.row())
            logger.info(f"Epoch {epoch}: loss {event.loss:.6f}, lambda {lam:.4f}, lr {lr:.2e}, val CD {val_cd:.6f}.")
            yield event
            if val_cd < best_cd:
                best_cd, best_epoch = val_cd, epoch
                self.best = self.checkpoint({"best_epoch": epoch, "best_val_cd": val_cd})
                yield BestCheckpointEvent(self.tag, epoch, val_cd)
        yield TrainingFinishedEvent(self.tag, self.step, best_epoch, best_cd)

    def checkpoint(self, meta: dict | None = None) -> Checkpoint:
        return Checkpoint(self.params.copy(), self.config, self.step, self.rng.bit_generator.state, meta)

    def run(self) -> tuple[Checkpoint, list[dict[str, float]]]:
        for _ in self.listen():
            pass
        return self.best or self.checkpoint(), self.log


def train(config: TrainConfig, dataset: Dataset, workers: int = 1) -> tuple[Checkpoint, list[dict[str, float]]]:
    """
    Trains from scratch and returns the best-validation checkpoint with the per-epoch log.
    """
    return Trainer(config, dataset, workers=workers).run()


def format_log(rows: list[dict[str, float]]) -> str:
    """
    Renders log rows as CSV with the header ``epoch,loss,lambda,lr,val_cd``.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(LOG_COLUMNS)
    for row in rows:
        writer.writerow([row["epoch"]] + [repr(float(row[column])) for column in LOG_COLUMNS[1:]])
    return buffer.getvalue()
