"""Small argument checks shared by the estimator, config objects and the CLI."""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp


def check_positive(name: str, value, integer: bool = False):
    if integer:
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            raise ValueError(f"{name} must be an integer, got {value!r}")
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")
        return int(value)
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite number > 0, got {value!r}")
    return float(value)


def check_open_unit(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not 0 < value < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)


def check_features(X, n_nodes: int, normalize: bool = False) -> sp.csr_matrix:
    """Node features as float64 CSR with one row per node."""
    X = sp.csr_matrix(X, dtype=np.float64)
    if X.shape[0] != n_nodes:
        raise ValueError(f"features have {X.shape[0]} rows, graph has {n_nodes} nodes")
    if X.shape[1] < 1:
        raise ValueError("features must have at least one column")
    if not np.all(np.isfinite(X.data)):
        raise ValueError("features contain non-finite values")
    if normalize:
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        norms[norms == 0] = 1.0
        X = sp.csr_matrix(sp.diags(1.0 / norms) @ X)
    X.sort_indices()
    return X


def check_embedding(E, name: str = "X") -> np.ndarray:
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {E.shape}")
    if not np.all(np.isfinite(E)):
        raise ValueError(f"{name} contains non-finite values")
    return E
