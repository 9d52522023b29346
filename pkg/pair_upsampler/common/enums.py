from __future__ import annotations
from enum import Enum


class OpKinds(Enum):
    """
    All differentiable operations the tensor tape can record.
    """
    ADD = 0
    """Elementwise sum with broadcasting."""
    SUB = 1
    """Elementwise difference with broadcasting."""
    MUL = 2
    """Elementwise product with broadcasting."""
    LINEAR = 3
    """x @ W + b over the last axis."""
    TANH = 4
    """Hyperbolic tangent."""
    RELU = 5
    """Rectifier, subgradient 0 at 0."""
    SOFTMAX = 6
    """Softmax over one axis."""
    SUM = 7
    """Sum reduction over an axis (or all axes)."""
    MEAN = 8
    """Mean reduction over an axis (or all axes)."""
    MAX = 9
    """Max reduction over one axis."""
    CONCAT = 10
    """Concatenation along an axis."""
    GATHER = 11
    """Row gather by an integer index table."""
    NORM = 12
    """Euclidean norm over the last axis (kept as a length-1 axis)."""
    RESHAPE = 13
    """Row-major reshape."""
    BROADCAST = 14
    """Broadcast to a larger shape."""

    @property
    def code(self) -> str:
        return self.name.lower()


class ShapeKinds(Enum):
    """
    Analytic surfaces used as ground truth.
    """
    SPHERE = 0
    """Sphere centered at the origin; parameter: radius."""
    TORUS = 1
    """Torus around the z axis; parameters: major radius R, minor radius r."""
    DISK = 2
    """Flat disk in the z=0 plane; parameter: radius."""

    @property
    def code(self) -> str:
        return {ShapeKinds.SPHERE: "sphere",
                ShapeKinds.TORUS: "torus",
                ShapeKinds.DISK: "plane-disk"}[self]

    @classmethod
    def from_code(cls, code: str) -> ShapeKinds:
        aliases = {"sphere": cls.SPHERE, "torus": cls.TORUS, "plane-disk": cls.DISK, "disk": cls.DISK}
        try:
            return aliases[code.strip().lower()]
        except KeyError:
            raise ValueError(f"Unknown shape '{code}'. Valid shapes: {', '.join(cls.codes())}") from None

    @classmethod
    def codes(cls) -> list[str]:
        return [kind.code for kind in cls]


class Activations(Enum):
    """
    Activations applied to the position encoder output.
    """
    TANH = 0
    """Used by the patch stage, keeps the sign of cross-patch differences."""
    RELU = 1
    """Used by the point stage."""


class PositionEncoders(Enum):
    """
    Per-neighbour position codes.
    """
    SPNE = 0
    """20 channels: geometry of a query point against its neighbours in P and in P ∪ P′."""
    LSE = 1
    """10 channels: geometry of a query point against its neighbours in one cloud."""
    RAW = 2
    """3 channels: relative coordinate p_i - L_k only."""

    @property
    def width(self) -> int:
        return {PositionEncoders.SPNE: 20, PositionEncoders.LSE: 10, PositionEncoders.RAW: 3}[self]

    @property
    def code(self) -> str:
        return self.name.lower()

    @classmethod
    def from_code(cls, code: str) -> PositionEncoders:
        return cls[code.strip().upper()]


class Stages(Enum):
    """
    Pipeline stages reported by the evaluation harness.
    """
    COARSE = 0
    """Output of the patch stage (Q′)."""
    REFINED = 1
    """Output of the point stage (Q)."""
    BASELINE = 2
    """Every sparse input point replicated r times."""

    @property
    def code(self) -> str:
        return self.name.lower()


class CloudFormats(Enum):
    """
    Supported point cloud file formats.
    """
    XYZ = 0
    """One `x y z` triple per line."""
    PLY = 1
    """ASCII PLY with a minimal vertex-only header."""

    @property
    def suffix(self) -> str:
        return ".xyz" if self == CloudFormats.XYZ else ".ply"

    @classmethod
    def from_path(cls, path: str) -> CloudFormats:
        return cls.PLY if str(path).lower().endswith(".ply") else cls.XYZ


class EventTypes(Enum):
    """
    Events yielded by the training runner.
    """
    STEP_FINISHED = 0
    """One optimizer step was applied."""
    EPOCH_FINISHED = 1
    """An epoch finished and validation was run."""
    BEST_CHECKPOINT = 2
    """Validation CD improved; the checkpoint was retained."""
    TRAINING_FINISHED = 3
    """All epochs are done."""
