"""Small input-validation helpers used by the public entry points."""

from __future__ import annotations

import numpy as np

from .errors import GridValidationError

# Tolerance for "positive semi-definite up to rounding" checks on the
# per-cell velocity covariance det(Sigma) = var_x*var_y - cov_xy^2.
PSD_TOL = 1e-9

# Tolerance for slightly negative variances produced by float rounding.
VAR_TOL = 1e-9


def as_plane(values, name: str, dtype=np.float32) -> np.ndarray:
    """Coerce ``values`` to a 2-D array of ``dtype``, validating rank."""
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 2:
        raise GridValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def check_same_shape(shapes: dict[str, tuple]) -> tuple:
    """Ensure all named arrays share one shape; return it."""
    items = list(shapes.items())
    first_name, first = items[0]
    for name, shape in items[1:]:
        if shape != first:
            raise GridValidationError(
                f"{name} has shape {shape}, expected {first} (shape of {first_name})"
            )
    return first


def check_even_dims(height: int, width: int) -> None:
    if height <= 0 or width <= 0 or height % 2 or width % 2:
        raise GridValidationError(
            f"grid dims must be positive and even, got {height}x{width}"
        )


def check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr).reshape(-1))[0])
        raise GridValidationError(f"{name} contains a non-finite value at flat index {bad}")


def first_violation(mask: np.ndarray) -> int:
    """Row-major index of the first True entry of a violation mask."""
    return int(np.flatnonzero(mask.reshape(-1))[0])
