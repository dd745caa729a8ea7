"""Validation utilities for the ldpfeat toolkit."""

import logging
from typing import Any

import numpy as np

from .exceptions import DimensionMismatch, FileSizeError, GeometryError

logger = logging.getLogger(__name__)

# practical operating range for the privacy budget
EPSILON_RANGE = (0.01, 10.0)


def validate_file_size(file_content: bytes, max_size_mb: int = 512) -> bool:
    """
    Validate file size before decoding.
    
    Args:
        file_content: The file content to validate
        max_size_mb: Maximum allowed size in MB
        
    Returns:
        True if file size is valid
        
    Raises:
        FileSizeError: If file size exceeds limit
    """
    max_size_bytes = max_size_mb * 1024 * 1024
    
    if len(file_content) > max_size_bytes:
        logger.warning(f"File size exceeded limit: {len(file_content)} bytes")
        raise FileSizeError(f"File too large. Maximum size allowed: {max_size_mb}MB")
    
    return True


def as_vector(value: Any) -> np.ndarray:
    """
    Promote a descriptor-like value to a finite float64 vector.

    Descriptor objects are unwrapped through their ``as_array`` method, so
    uint8-normalized descriptors arrive here already scaled to [0, 1].

    Raises:
        GeometryError: If the value is not a nonempty finite 1-D vector
    """
    if hasattr(value, "as_array"):
        value = value.as_array()
    vec = np.asarray(value, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise GeometryError(f"Expected a nonempty 1-D vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise GeometryError("Descriptor contains non-finite entries")
    return vec


def as_matrix(values: Any) -> np.ndarray:
    """Stack descriptor-like rows into a finite float64 matrix."""
    if isinstance(values, np.ndarray) and values.ndim == 2:
        mat = values.astype(np.float64, copy=False)
    else:
        rows = [as_vector(v) for v in values]
        if not rows:
            raise GeometryError("Expected at least one vector")
        mat = np.vstack(rows)
    if not np.all(np.isfinite(mat)):
        raise GeometryError("Descriptor matrix contains non-finite entries")
    return mat


def validate_dimension(expected: int, actual: int, what: str = "vector") -> None:
    """
    Check that a vector lives in the expected ambient dimension.

    Raises:
        DimensionMismatch: If the dimensions differ
    """
    if expected != actual:
        raise DimensionMismatch(f"{what} has dimension {actual}, expected {expected}")


def validate_epsilon(epsilon: float) -> bool:
    """
    Validate a privacy budget.

    Infinity is accepted as the unbounded (no privacy) flag. Values outside
    the usual operating range are allowed but logged.

    Returns:
        True if the budget lies inside the usual operating range

    Raises:
        ValueError: If epsilon is negative or NaN
    """
    if np.isnan(epsilon) or epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    if np.isinf(epsilon):
        return False
    low, high = EPSILON_RANGE
    if not low <= epsilon <= high:
        logger.warning(f"epsilon={epsilon} is outside the usual range [{low}, {high}]")
        return False
    return True
