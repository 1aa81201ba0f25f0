"""
Error types for inpaint_core.

Every error subclasses both ``InpaintError`` and the builtin it refines, so
callers can catch either. ``code`` is the short machine-readable name printed
by the CLI on failure.
"""
from typing import Optional


class InpaintError(Exception):
    """Base class for all inpaint_core failures."""

    code = "inpaint_error"


class ShapeError(InpaintError, ValueError):
    """Operand shapes are incompatible for the requested operation."""

    code = "shape_mismatch"


class NonFiniteError(InpaintError, FloatingPointError):
    """A NaN or Inf was produced or consumed.

    Attributes:
        op: Name of the operation that produced the value, if known
        iteration: Training iteration index, if raised by a trainer
        parameter: Parameter name, if raised by the optimizer
    """

    code = "non_finite"

    def __init__(self, message: str, op: Optional[str] = None,
                 iteration: Optional[int] = None, parameter: Optional[str] = None):
        super().__init__(message)
        self.op = op
        self.iteration = iteration
        self.parameter = parameter


class FloFormatError(InpaintError, ValueError):
    """A .flo payload is malformed (bad magic, bad header, truncated data)."""

    code = "bad_flo"


class ConfigError(InpaintError, ValueError):
    """Configuration is missing, malformed or violates an invariant."""

    code = "bad_config"


class DatasetError(InpaintError, FileNotFoundError):
    """Dataset directory, manifest or counterpart file is missing or inconsistent."""

    code = "bad_dataset"


class CheckpointError(InpaintError, IOError):
    """Checkpoint container cannot be read, written or matched to a model."""

    code = "bad_checkpoint"


class PathCollisionError(InpaintError, FileExistsError):
    """Output path already holds artifacts and --force was not given."""

    code = "path_collision"


class EmptyRegionError(InpaintError, ValueError):
    """A metric was requested over a region with no pixels."""

    code = "empty_region"
