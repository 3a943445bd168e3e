"""
Exception hierarchy shared by the library and the CLI.

Each error carries the process exit code the CLI uses when it escapes a run.
"""

from typing import Optional, Sequence


class UrnnError(Exception):
    """Base class for all errors raised by this package"""

    exit_code = 2


class DimensionError(UrnnError, ValueError):
    """Operand shapes are incompatible"""

    def __init__(self, message: str, *shapes: Sequence[int]):
        super().__init__(message)
        self.shapes = tuple(tuple(s) for s in shapes)


class SingularMatrixError(UrnnError, ArithmeticError):
    """A pivot fell below the working-precision threshold"""

    def __init__(self, pivot_index: int, pivot_magnitude: float, threshold: float):
        super().__init__(
            f"Singular system: |pivot {pivot_index}| = {pivot_magnitude:.3e} "
            f"< {threshold:.3e}"
        )
        self.pivot_index = pivot_index
        self.pivot_magnitude = pivot_magnitude
        self.threshold = threshold


class ValidationError(UrnnError, ValueError):
    """An argument violates a documented precondition"""


class TraceMismatchError(UrnnError, ValueError):
    """A hidden trace does not belong to the model/batch it is used with"""


class NumericFailure(UrnnError, ArithmeticError):
    """A non-finite value appeared in a loss, output or gradient"""

    def __init__(self, message: str, index: Optional[Sequence[int]] = None):
        if index is not None:
            message = f"{message} (first offending index {tuple(int(i) for i in index)})"
        super().__init__(message)
        self.index = None if index is None else tuple(int(i) for i in index)


class ConfigError(UrnnError, ValueError):
    """Experiment configuration is invalid"""

    exit_code = 1


class CheckpointFormatError(UrnnError, ValueError):
    """A checkpoint or dataset container is corrupt, truncated or mismatched"""

    exit_code = 3


class ArtifactIOError(UrnnError, OSError):
    """Reading or writing an output artifact failed"""

    exit_code = 3
