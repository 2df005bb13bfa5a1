"""Input validation helpers shared by the estimator classes and functions."""

import numpy as np
from sklearn.utils import check_array

from .errors import Unsupported

SUPPORTED_DIMS = (2, 3)


def check_dim(dim):
    dim = int(dim)
    if dim not in SUPPORTED_DIMS:
        raise Unsupported(f"dimension d={dim} is not supported (d must be 2 or 3)")
    return dim


def check_point(x, dim=None):
    """Return ``x`` as a finite 1-D float array, optionally of length ``dim``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"expected a {dim}-vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    return x


def check_points(X, dim=None):
    """Validate an (n, d) array of points; a single d-vector is promoted."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    X = check_array(X, ensure_2d=True, dtype=np.float64, ensure_min_samples=0)
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected points in R^{dim}, got shape {X.shape}")
    return X


def check_positions(positions, dim=None):
    """Validate a configuration array of shape (N, d); N may be zero."""
    P = np.asarray(positions, dtype=float)
    if P.size == 0:
        return np.zeros((0, dim if dim is not None else 2))
    if P.ndim == 1:
        P = P[None, :]
    if P.ndim != 2:
        raise ValueError(f"positions must have shape (N, d), got {P.shape}")
    if dim is not None and P.shape[1] != dim:
        raise ValueError(f"positions must be {dim}-dimensional, got {P.shape[1]}")
    if not np.all(np.isfinite(P)):
        raise ValueError("configuration has non-finite coordinates")
    return P


def check_sample_array(samples, dim=None):
    """Validate an (M, N, d) stack of configurations."""
    S = np.asarray(samples, dtype=float)
    if S.ndim != 3:
        raise ValueError(f"samples must have shape (M, N, d), got {S.shape}")
    if dim is not None and S.shape[2] != dim:
        raise ValueError(f"samples are {S.shape[2]}-dimensional, expected {dim}")
    return S
