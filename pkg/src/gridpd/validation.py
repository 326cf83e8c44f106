"""Input validation helpers shared across estimators and functions."""

from __future__ import annotations

import numpy as np

from .errors import LengthMismatchError, NotFittedError


def as_float_vector(x, name="x"):
    """Coerce to a 1-D float64 array, rejecting anything else."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def as_float_matrix(x, name="X"):
    """Coerce to a 2-D float64 array, rejecting anything else."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_label_vector(y, name="y"):
    """Coerce to a 1-D int array of 0/1 labels."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    arr = arr.astype(np.int64)
    bad = ~np.isin(arr, (0, 1))
    if bad.any():
        raise ValueError(f"{name} must contain only 0/1, found {arr[bad][:5]}")
    return arr


def check_same_length(a, b, what="sequences"):
    if len(a) != len(b):
        raise LengthMismatchError(
            f"{what} have different lengths: {len(a)} vs {len(b)}"
        )


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")


def check_fitted(estimator, attribute):
    """Raise NotFittedError unless ``estimator`` has ``attribute`` set."""
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} must be fitted before use"
        )
