from .config import LossConfig, TrainConfig, UpsamplerConfig
from .params import ModelParams
from .pool import PooledUpsampler
from .upsampler import Upsampler
from .training.runner import Trainer, train
from .training.evaluation import evaluate
from .training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint

__all__ = ["UpsamplerConfig", "LossConfig", "TrainConfig", "ModelParams", "Upsampler", "PooledUpsampler",
           "Trainer", "train", "evaluate", "Checkpoint", "load_checkpoint", "save_checkpoint"]
