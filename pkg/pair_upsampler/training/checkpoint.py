"""
Versioned binary checkpoints.

Layout (little endian)::

    b"PUCK"  uint16 version
    uint32 length + UTF-8 JSON header (config mapping and run metadata)
    uint64 training step
    uint32 length + UTF-8 JSON random-generator state
    uint32 parameter count, then per parameter:
        uint16 length + UTF-8 name, uint8 ndim, ndim × uint32 dims, float32 values
"""
from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from ..common import exceptions
from ..config import TrainConfig, UpsamplerConfig
from ..params import ModelParams, parameter_shapes

MAGIC = b"PUCK"
VERSION = 1


class Checkpoint:
    """
    Weights plus everything needed to resume or reproduce a run.

    :param params: network weights.
    :param config: training configuration (its model part sizes the weights).
    :param step: optimizer steps taken.
    :param rng_state: state of the run's random generator, if any.
    :param meta: free-form run metadata (best epoch, validation CD...).
    """

    def __init__(self, params: ModelParams, config: TrainConfig, step: int = 0, rng_state: dict | None = None,
                 meta: dict[str, Any] | None = None, version: int = VERSION):
        self.params: ModelParams = params
        self.config: TrainConfig = config
        self.step: int = int(step)
        self.rng_state: dict = rng_state or {}
        self.meta: dict[str, Any] = meta or {}
        self.version: int = version

    def __repr__(self):
        return f"Checkpoint(v{self.version}, step={self.step}, {self.params})"


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise exceptions.CheckpointTruncatedError(self.path)
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def raw(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise exceptions.CheckpointTruncatedError(self.path)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk


def _blob(data: bytes, width: str) -> bytes:
    return struct.pack("<" + width, len(data)) + data


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    header = json.dumps({"config": checkpoint.config.to_mapping(), "meta": checkpoint.meta}, sort_keys=True)
    parts = [MAGIC, struct.pack("<H", checkpoint.version), _blob(header.encode("utf-8"), "I"),
             struct.pack("<Q", checkpoint.step), _blob(json.dumps(checkpoint.rng_state).encode("utf-8"), "I"),
             struct.pack("<I", len(checkpoint.params))]
    for name in checkpoint.params:
        values = checkpoint.params[name]
        parts.append(_blob(name.encode("utf-8"), "H"))
        parts.append(struct.pack(f"<B{values.ndim}I", values.ndim, *values.shape))
        parts.append(np.ascontiguousarray(values, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(params: ModelParams | Checkpoint, config: TrainConfig | None, path: str | Path,
                    step: int = 0, rng_state: dict | None = None, meta: dict[str, Any] | None = None):
    """
    Writes weights and configuration to ``path``.
    """
    checkpoint = params if isinstance(params, Checkpoint) else Checkpoint(params, config, step, rng_state, meta)
    Path(path).write_bytes(encode_checkpoint(checkpoint))
    logger.debug(f"Saved checkpoint {path} (step {checkpoint.step}).")


def decode_checkpoint(data: bytes, path: str = "<bytes>", expected: UpsamplerConfig | None = None) -> Checkpoint:
    """
    Parses checkpoint bytes.

    :param expected: network sizes the weights must fit; defaults to the stored configuration.

    :raises CheckpointVersionError: unknown magic, version or unreadable header.
    :raises CheckpointTruncatedError: the data ends early.
    :raises CheckpointShapeError: a parameter does not fit ``expected``.
    """
    reader = _Reader(data, path)
    magic = reader.raw(len(MAGIC)) if len(data) >= len(MAGIC) else data
    if magic != MAGIC:
        raise exceptions.CheckpointVersionError(magic, MAGIC)
    version, = reader.take("<H")
    if version != VERSION:
        raise exceptions.CheckpointVersionError(version, VERSION)
    header_size, = reader.take("<I")
    try:
        header = json.loads(reader.raw(header_size).decode("utf-8"))
        config = TrainConfig.from_mapping(header["config"], TrainConfig.full())
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, exceptions.ConfigError):
        logger.debug("TRACEBACK", exc_info=True)
        raise exceptions.CheckpointVersionError("unreadable header", VERSION) from None
    step, = reader.take("<Q")
    rng_size, = reader.take("<I")
    try:
        rng_state = json.loads(reader.raw(rng_size).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise exceptions.CheckpointVersionError("unreadable generator state", VERSION) from None
    count, = reader.take("<I")
    arrays = {}
    for _ in range(count):
        name_size, = reader.take("<H")
        name = reader.raw(name_size).decode("utf-8", errors="replace")
        ndim, = reader.take("<B")
        shape = reader.take(f"<{ndim}I")
        size = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(reader.raw(4 * size), dtype="<f4").reshape(shape)
        arrays[name] = values.astype(np.float64)
    model = expected or config.model
    shapes = parameter_shapes(model)
    for name, values in arrays.items():
        if name not in shapes or shapes[name] != values.shape:
            raise exceptions.CheckpointShapeError(name, shapes.get(name), values.shape)
    if expected is not None:
        config = dataclasses.replace(config, model=expected)
    return Checkpoint(ModelParams(arrays, model), config, step, rng_state, header.get("meta") or {}, version)


def load_checkpoint(path: str | Path, expected: UpsamplerConfig | None = None) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes(), str(path), expected)
