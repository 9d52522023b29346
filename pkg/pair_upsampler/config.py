"""
Model, loss and training settings, their presets and the flat key=value schema used by run configs.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from loguru import logger

from .common.enums import PositionEncoders
from .common.exceptions import ConfigError
from .common.parser import parse_key_values
from .common.utils import parse_shape_spec
from .losses import LAMBDA_END, LAMBDA_START, lambda_schedule


def _positive(key: str, value: float):
    if not value > 0:
        raise ConfigError(key, f"must be positive, got {value!r}")


@dataclass
class UpsamplerConfig:
    """
    Network sizes and ablation switches.
    """
    n: int = 256
    """Points per input patch."""
    r: int = 4
    """Upsampling rate."""
    k: int = 16
    """Neighbour count of every KNN grouping."""
    c: int = 32
    """Feature width after extraction."""
    c_expanded: int = 32
    """Feature width after expansion."""
    extractor_depth: int = 3
    """Densely connected edge-convolution blocks in the extractor."""
    hidden: int = 64
    """Hidden width of the coordinate regression heads."""
    patch_encoder: PositionEncoders = PositionEncoders.SPNE
    """Position code of the patch stage."""
    raw_coordinate_codes: bool = False
    """Replace both position codes by the plain relative coordinate."""
    no_pacm: bool = False
    """Skip feature enhancement in the patch stage (expansion and reconstruction stay)."""
    no_pacm_pairs: bool = False
    """Feed every patch as its own adjacent patch."""
    no_pocm: bool = False
    """Skip the point stage, so the refined output equals the coarse one."""
    coarse_anchor: bool = False
    """Add the r-fold replicated input points to the reconstructed coarse coordinates."""

    def __post_init__(self):
        if isinstance(self.patch_encoder, str):
            try:
                self.patch_encoder = PositionEncoders.from_code(self.patch_encoder)
            except KeyError:
                raise ConfigError("patch_encoder", f"unknown encoder {self.patch_encoder!r} "
                                                   f"(valid: {', '.join(e.code for e in PositionEncoders)})") from None
        for key in ("n", "k", "c", "c_expanded", "extractor_depth", "hidden"):
            _positive(key, getattr(self, key))
        if self.r < 2:
            raise ConfigError("r", f"upsampling rate must be at least 2, got {self.r}")
        if self.k > self.n:
            raise ConfigError("k", f"{self.k} neighbours exceed the patch size {self.n}")

    @property
    def patch_encoding(self) -> PositionEncoders:
        return PositionEncoders.RAW if self.raw_coordinate_codes else self.patch_encoder

    @property
    def point_encoding(self) -> PositionEncoders:
        return PositionEncoders.RAW if self.raw_coordinate_codes else PositionEncoders.LSE

    @property
    def output_count(self) -> int:
        return self.r * self.n


@dataclass
class LossConfig:
    """
    Weighting of the refined reconstruction term.
    """
    lambda_start: float = LAMBDA_START
    lambda_end: float = LAMBDA_END
    total_epochs: int = 400
    normalized: bool = True
    """Average matched distances over the points instead of summing them."""

    def __post_init__(self):
        _positive("epochs", self.total_epochs)
        if not 0 <= self.lambda_start <= self.lambda_end:
            raise ConfigError("lambda_start", "schedule endpoints must satisfy 0 ≤ start ≤ end")

    def weight(self, epoch: float) -> float:
        return lambda_schedule(epoch, self.total_epochs, self.lambda_start, self.lambda_end)


@dataclass
class TrainConfig:
    """
    Dataset, optimizer and schedule settings. Defaults are the full-scale ones; see :meth:`desk`.
    """
    model: UpsamplerConfig = field(default_factory=UpsamplerConfig)
    epochs: int = 400
    batch_size: int = 32
    learning_rate: float = 1e-3
    lr_decay: float = 0.1
    lr_decay_every: int = 20
    lr_floor: float = 1e-6
    shapes: tuple[str, ...] = ("sphere:radius=1.0", "torus:R=0.7,r=0.3", "plane-disk:radius=1.0")
    """Analytic shapes the dataset is sampled from."""
    sparse_points: int = 2048
    """Sparse input points per shape; the ground truth holds r times as many."""
    pairs_per_shape: int = 100
    val_fraction: float = 0.1
    augment: bool = True
    rotate: bool = True
    scale_min: float = 0.8
    scale_max: float = 1.2
    jitter: float = 0.005
    noise_augmentation_max: float = 0.0
    """Upper bound of the uniform random input-noise level (0 disables it)."""
    emd_normalized: bool = True
    seed: int = 0

    def __post_init__(self):
        for key in ("epochs", "batch_size", "learning_rate", "lr_decay_every", "lr_floor", "sparse_points",
                    "scale_min"):
            _positive(key, getattr(self, key))
        if not 0 < self.lr_decay <= 1:
            raise ConfigError("lr_decay", f"must be in (0, 1], got {self.lr_decay}")
        if self.lr_floor > self.learning_rate:
            raise ConfigError("lr_floor", "must not exceed the base learning rate")
        if self.pairs_per_shape < 1:
            raise ConfigError("pairs_per_shape", "must be at least 1")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("val_fraction", "must be in [0, 1)")
        if self.scale_max < self.scale_min:
            raise ConfigError("scale_max", "must not be below scale_min")
        if self.jitter < 0 or self.noise_augmentation_max < 0:
            raise ConfigError("jitter", "noise levels must be non-negative")
        if not self.shapes:
            raise ConfigError("shapes", "at least one shape is required")
        for spec in self.shapes:
            try:
                parse_shape_spec(spec)
            except ValueError as e:
                raise ConfigError("shapes", str(e)) from None
        if self.sparse_points < self.model.n:
            raise ConfigError("sparse_points", f"needs at least n={self.model.n} points per shape")

    @classmethod
    def full(cls) -> TrainConfig:
        return cls()

    @classmethod
    def desk(cls, **overrides: Any) -> TrainConfig:
        """
        Small setting that trains in minutes on one CPU: 2 shapes, n=64, r=4, C=32, 200 optimizer steps.
        """
        values = dict(model=UpsamplerConfig(n=64, r=4, k=16, c=32, c_expanded=32), epochs=100, batch_size=8,
                      lr_decay_every=50, shapes=("sphere:radius=1.0", "torus:R=0.7,r=0.3"), sparse_points=256,
                      pairs_per_shape=9)
        values.update(overrides)
        return cls(**values)

    @classmethod
    def denoise(cls, **overrides: Any) -> TrainConfig:
        """
        Desk setting with random 0–2 % Gaussian input noise per training sample.
        """
        return cls.desk(**{"noise_augmentation_max": 0.02, **overrides})

    @property
    def loss(self) -> LossConfig:
        return LossConfig(total_epochs=self.epochs, normalized=self.emd_normalized)

    def steps_per_epoch(self, train_size: int) -> int:
        return max(1, math.ceil(train_size / self.batch_size))

    def to_mapping(self) -> dict[str, Any]:
        """
        Flat key -> value view (model keys and training keys side by side).
        """
        result = {}
        for f in dataclasses.fields(self.model):
            value = getattr(self.model, f.name)
            result[f.name] = value.code if isinstance(value, PositionEncoders) else value
        for f in dataclasses.fields(self):
            if f.name != "model":
                value = getattr(self, f.name)
                result[f.name] = list(value) if isinstance(value, tuple) else value
        return result

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: TrainConfig | None = None) -> TrainConfig:
        """
        Builds a config from flat key -> value pairs. Strings are converted by the type of the
        default; missing keys keep the values of ``base`` (the desk preset by default).

        :raises ConfigError: on unknown keys or unparsable values.
        """
        base = base or cls.desk()
        defaults = base.to_mapping()
        model_keys = {f.name for f in dataclasses.fields(UpsamplerConfig)}
        model_values, train_values = {}, {}
        for key, raw in values.items():
            if key not in defaults:
                raise ConfigError(key, "unknown key")
            value = _convert(key, raw, defaults[key])
            (model_values if key in model_keys else train_values)[key] = value
        model = dataclasses.replace(base.model, **model_values)
        return dataclasses.replace(base, model=model, **train_values)

    @classmethod
    def from_file(cls, path: str | Path, base: TrainConfig | None = None) -> TrainConfig:
        """
        Reads a key=value run config. Keys it does not set take their defaults, which are echoed to the log.
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(str(path), e.strerror or "cannot read config file") from None
        values = parse_key_values(text, str(path))
        config = cls.from_mapping(values, base)
        for key, value in config.to_mapping().items():
            if key not in values:
                logger.info(f"Config key '{key}' not set, using default {value!r}.")
        return config

    @classmethod
    def schema(cls) -> dict[str, Any]:
        """
        Keys accepted by run configs with their desk defaults.
        """
        return cls.desk().to_mapping()


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, raw: Any, default: Any) -> Any:
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(default, list) else raw
    text = raw.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            return tuple(part.strip() for part in text.split(";") if part.strip())
        return text
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {type(default).__name__}") from None


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """
    Step decay: ``max(floor, lr · decay^⌊epoch / every⌋)``.
    """
    if epoch < 0:
        raise ConfigError("epoch", "must be non-negative")
    return max(config.lr_floor, config.learning_rate * config.lr_decay ** (epoch // config.lr_decay_every))
