import os
from typing import Sequence

import torch

from src.utils.errors import ConfigurationError, DatasetIOError, ShapeError


def validate_file_exists(file_path: str) -> bool:
    """
    Validates that a file exists and is not empty.
    Raises DatasetIOError with the offending path otherwise.
    """
    if not os.path.exists(file_path):
        raise DatasetIOError(f"File not found: {file_path}")
    if os.path.isdir(file_path):
        raise DatasetIOError(f"Expected a file, found a directory: {file_path}")
    if os.path.getsize(file_path) == 0:
        raise DatasetIOError(f"File is empty: {file_path}")
    return True


def validate_positive(name: str, value: float) -> float:
    if not value > 0:
        raise ConfigurationError(f"'{name}' must be > 0, got {value}")
    return value


def validate_same_shape(name_a: str, a: torch.Tensor, name_b: str, b: torch.Tensor):
    if a.shape != b.shape:
        raise ShapeError(f"Shape mismatch: {name_a} {tuple(a.shape)} vs {name_b} {tuple(b.shape)}")


def validate_divisible(name: str, sizes: Sequence[int], divisor: int):
    bad = [s for s in sizes if s % divisor != 0]
    if bad:
        raise ShapeError(f"{name} {tuple(sizes)} must be divisible by {divisor}")
