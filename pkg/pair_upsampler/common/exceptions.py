from __future__ import annotations

from typing import Any, Sequence


class UpsamplerError(Exception):
    """Base class for all pair_upsampler exceptions."""
    pass


class InvalidArgumentError(UpsamplerError):
    """Raised when an argument is outside of its valid range."""
    def __init__(self, name: str, value: Any, reason: str):
        self.name = name
        self.value = value
        self.reason = reason
        super().__init__(f"Invalid value {value!r} for {name}: {reason}")


class ShapeMismatchError(UpsamplerError):
    """Raised when the inputs of a tensor operation have incompatible shapes."""
    def __init__(self, op_kind: str, left: Sequence[int], right: Sequence[int]):
        self.op_kind = op_kind
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"Shape mismatch in {op_kind}: {self.left} vs {self.right}")


class GatherIndexError(UpsamplerError):
    """Raised when a gather index table points outside of the source rows."""
    def __init__(self, index: int, size: int):
        self.index = index
        self.size = size
        super().__init__(f"Gather index {index} is out of range for {size} rows.")


class NonScalarLossError(UpsamplerError):
    """Raised when backward() is called on a tensor that is not a scalar."""
    def __init__(self, shape: Sequence[int]):
        self.shape = tuple(shape)
        super().__init__(f"Loss must be a scalar, got a tensor of shape {self.shape}.")


class GraphDisconnectedError(UpsamplerError):
    """Raised when the loss was not produced by ops recorded on a live tape."""
    def __init__(self):
        super().__init__("The loss is not connected to a recorded computation graph.")


class DegeneratePatchError(UpsamplerError):
    """Raised when a patch has zero spatial extent and cannot be normalized."""
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"Cannot normalize a patch of {count} coincident points (zero scale).")


class PairSamplingError(UpsamplerError):
    """Raised when no adjacent patch with enough overlap exists for a training seed."""
    def __init__(self, seed_index: int, required: int):
        self.seed_index = seed_index
        self.required = required
        super().__init__(f"No adjacent patch overlapping seed {seed_index} by at least {required} points.")


class ConfigError(UpsamplerError):
    """Raised when a configuration key is unknown or holds an invalid value."""
    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"Config key '{key}': {reason}")


class ConfigMismatchError(UpsamplerError):
    """Raised when a checkpoint was trained with settings incompatible with the request."""
    def __init__(self, field: str, checkpoint_value: Any, requested_value: Any):
        self.field = field
        self.checkpoint_value = checkpoint_value
        self.requested_value = requested_value
        super().__init__(f"Checkpoint was built with {field}={checkpoint_value}, "
                         f"but {field}={requested_value} was requested.")


class CloudFormatError(UpsamplerError):
    """Raised when a point cloud file cannot be parsed."""
    def __init__(self, path: str, line: int | None, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"Malformed point cloud file {where}: {reason}")


class CheckpointVersionError(UpsamplerError):
    """Raised when a checkpoint header is not recognized."""
    def __init__(self, found: Any, expected: Any):
        self.found = found
        self.expected = expected
        super().__init__(f"Unsupported checkpoint version {found!r} (expected {expected!r}).")


class CheckpointTruncatedError(UpsamplerError):
    """Raised when a checkpoint file ends before all declared data was read."""
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"Checkpoint {path} is truncated.")


class CheckpointShapeError(UpsamplerError):
    """Raised when a stored parameter does not match the shape the model expects."""
    def __init__(self, name: str, expected: Sequence[int] | None, found: Sequence[int] | None):
        self.name = name
        self.expected = None if expected is None else tuple(expected)
        self.found = None if found is None else tuple(found)
        super().__init__(f"Parameter '{name}' has dims {self.found}, expected {self.expected}.")


class DivergenceError(UpsamplerError):
    """Raised when training produces a non-finite loss."""
    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"Training diverged at step {step} (loss={loss}).")
