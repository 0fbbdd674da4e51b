"""
Exception hierarchy for the lab.

Every error carries the process exit code that ``src.pipeline.cli`` maps it to,
so lower layers only raise and the command surface decides how to exit.
"""

from __future__ import annotations


class LabError(Exception):
    """Base class for all lab errors."""

    exit_code: int = 1


class ShapeError(LabError, ValueError):
    """Tensor shape, index or argument rejected by an operation."""

    exit_code = 2


class ConfigError(LabError, ValueError):
    """Invalid, missing or non-strict configuration."""

    exit_code = 2


class DatasetFormatError(LabError, ValueError):
    """Dataset file failed magic/version/length validation."""

    exit_code = 3


class CheckpointFormatError(LabError, ValueError):
    """Checkpoint file failed magic/version/CRC validation."""

    exit_code = 3


class NumericalError(LabError, ArithmeticError):
    """A value went non-finite or an iterative solver failed to converge."""

    exit_code = 4


class CheckFailure(LabError):
    """A verification command found failing cases."""

    exit_code = 1
