"""Small input-validation helpers shared by the estimator classes."""

from __future__ import annotations

import numpy as np

from .errors import SchemaError


def as_float_2d(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise SchemaError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if not np.isfinite(X).all():
        bad = np.argwhere(~np.isfinite(X))[0]
        raise SchemaError(
            f"{name} contains a non-finite value at row {bad[0]}, column {bad[1]}"
        )
    return X


def as_float_1d(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.isfinite(x).all():
        raise SchemaError(f"{name} contains non-finite values")
    return x


def as_binary(y, name: str) -> np.ndarray:
    y = np.asarray(y)
    if y.dtype == bool:
        return y.astype(float)
    y = as_float_1d(y, name)
    bad = ~np.isin(y, (0.0, 1.0))
    if bad.any():
        raise SchemaError(
            f"{name} must be binary 0/1; saw value {y[bad][0]!r} "
            f"at position {int(np.flatnonzero(bad)[0])}"
        )
    return y


def as_probabilities(p, name: str) -> np.ndarray:
    p = as_float_1d(p, name)
    if (p <= 0).any() or (p >= 1).any():
        bad = int(np.flatnonzero((p <= 0) | (p >= 1))[0])
        raise SchemaError(
            f"{name} must lie strictly inside (0, 1); "
            f"position {bad} is {p[bad]!r}"
        )
    return p
