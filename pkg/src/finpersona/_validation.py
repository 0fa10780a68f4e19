"""Input validation helpers shared by the estimators."""

import numpy as np

from .exceptions import DataError, DimensionError


def as_float_matrix(X, name="X", min_rows=0):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] < min_rows:
        raise DataError(f"{name} needs at least {min_rows} rows, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} contains non-finite values")
    return X


def check_width(X, expected, name="X"):
    if X.shape[-1] != expected:
        raise DimensionError(f"{name} has width {X.shape[-1]}, expected {expected}")


def check_labels(y, n_classes, name="labels"):
    y = np.asarray(y)
    if y.size and (not np.issubdtype(y.dtype, np.integer)):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise DataError(f"{name} must be integer class indices")
        y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise DataError(f"{name} outside 0..{n_classes - 1}")
    return y.astype(np.int64)


def stochastic_rows(P, atol=1e-10):
    P = np.asarray(P, dtype=np.float64)
    return bool(np.all(P >= -atol) and np.allclose(P.sum(axis=-1), 1.0, atol=atol, rtol=0))
