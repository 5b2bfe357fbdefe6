"""
Exception hierarchy shared by every stage.
The CLI maps these onto exit codes (see src/cli/commands.py).
"""


class VLoraError(Exception):
    """Base class for all project errors."""


class ConfigurationError(VLoraError):
    """Invalid experiment / scene / model configuration."""


class ShapeError(VLoraError, ValueError):
    """Tensor or image dimensions do not satisfy an operation's contract."""


class DatasetIOError(VLoraError, OSError):
    """Reading or writing dataset files failed."""


class CheckpointError(VLoraError):
    """Checkpoint is corrupted or was built from a different config."""


class NumericalError(VLoraError):
    """Non-finite loss or parameters during optimization."""


class EvaluationError(VLoraError, ValueError):
    """Metric inputs cannot be evaluated (empty valid set, mismatched lengths)."""
