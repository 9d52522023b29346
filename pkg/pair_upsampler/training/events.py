from __future__ import annotations

import time

from ..common.enums import EventTypes


class BaseEvent:
    """
    Base class of training events.

    :param run_tag: tag of the :class:`pair_upsampler.training.runner.Trainer` that produced the event.
    :type run_tag: :obj:`str`

    :param event_type: event type.
    :type event_type: :class:`pair_upsampler.common.enums.EventTypes`

    :param event_time: wall-clock time, generated when omitted.
    :type event_time: :obj:`float` or :obj:`None`
    """
    def __init__(self, run_tag: str, event_type: EventTypes, event_time: float | None = None):
        self.run_tag = run_tag
        self.type = event_type
        self.time = event_time if event_time is not None else time.time()


class StepFinishedEvent(BaseEvent):
    """
    One optimizer step was applied.
    """
    def __init__(self, run_tag: str, epoch: int, step: int, loss: float):
        super(StepFinishedEvent, self).__init__(run_tag, EventTypes.STEP_FINISHED)
        self.epoch: int = epoch
        self.step: int = step
        """Global step counter (1-based)."""
        self.loss: float = loss
        """Mean batch loss."""


class EpochFinishedEvent(BaseEvent):
    """
    An epoch finished; carries its training-log row.
    """
    def __init__(self, run_tag: str, epoch: int, loss: float, lam: float, lr: float, val_cd: float):
        super(EpochFinishedEvent, self).__init__(run_tag, EventTypes.EPOCH_FINISHED)
        self.epoch: int = epoch
        self.loss: float = loss
        """Mean training loss of the epoch."""
        self.lam: float = lam
        """Weight of the refined term used during the epoch."""
        self.lr: float = lr
        """Learning rate used during the epoch."""
        self.val_cd: float = val_cd
        """Mean validation Chamfer distance of the refined output after the epoch."""

    def row(self) -> dict[str, float]:
        return {"epoch": self.epoch, "loss": self.loss, "lambda": self.lam, "lr": self.lr, "val_cd": self.val_cd}


class BestCheckpointEvent(BaseEvent):
    """
    Validation CD improved and the current weights were retained.
    """
    def __init__(self, run_tag: str, epoch: int, val_cd: float):
        super(BestCheckpointEvent, self).__init__(run_tag, EventTypes.BEST_CHECKPOINT)
        self.epoch: int = epoch
        self.val_cd: float = val_cd


class TrainingFinishedEvent(BaseEvent):
    """
    All epochs are done.
    """
    def __init__(self, run_tag: str, steps: int, best_epoch: int, best_val_cd: float):
        super(TrainingFinishedEvent, self).__init__(run_tag, EventTypes.TRAINING_FINISHED)
        self.steps: int = steps
        self.best_epoch: int = best_epoch
        self.best_val_cd: float = best_val_cd
