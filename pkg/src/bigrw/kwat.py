"""Dense k-step weighted-average transition (k-WAT) matrix and full-softmax objective.

Everything here is O(N^2) or worse and meant for small graphs: it is the
ground truth that the walk sampler and the trainer are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .graph import Graph

MAX_DENSE_NODES = 10_000


@dataclass(frozen=True)
class KwatMatrix:
    values: np.ndarray
    k: int
    alpha: float


def hop_weights(k: int, alpha: float) -> np.ndarray:
    """Normalized geometric weights ``alpha**l / sum_i alpha**i`` for l = 1..k."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k}")
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    # log-space keeps large k / extreme alpha finite
    logw = np.arange(1, k + 1) * np.log(alpha)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def transition_matrix(g: Graph, max_nodes: int = MAX_DENSE_NODES) -> np.ndarray:
    """Row-stochastic one-step matrix; rows of dangling nodes are zero."""
    n = g.node_count
    if n > max_nodes:
        raise MemoryError(f"{n} nodes exceeds the dense limit of {max_nodes}")
    a = np.zeros((n, n))
    deg = g.out_degree()
    rows = np.repeat(np.arange(n), deg)
    row_tot = np.bincount(rows, weights=g.weights, minlength=n)
    a[rows, g.indices] = g.weights / row_tot[rows]
    return a


def kwat_matrix(g: Graph, k: int, alpha: float, max_nodes: int = MAX_DENSE_NODES) -> KwatMatrix:
    weights = hop_weights(k, alpha)
    a = transition_matrix(g, max_nodes)
    power = a.copy()
    w = weights[0] * power
    for lw in weights[1:]:
        power = power @ a
        w += lw * power
    return KwatMatrix(w, int(k), float(alpha))


def forward_distribution(w: KwatMatrix, i: int) -> np.ndarray:
    """Normalized row ``i``: where walks from ``i`` end up."""
    row = w.values[i]
    total = row.sum()
    if total <= 0:
        raise ValueError(f"node {i} reaches nothing within {w.k} steps")
    return row / total


def backward_distribution(w: KwatMatrix, i: int) -> np.ndarray:
    """Normalized column ``i``: where walks that end at ``i`` came from."""
    col = w.values[:, i]
    total = col.sum()
    if total <= 0:
        raise ValueError(f"node {i} is unreachable within {w.k} steps")
    return col / total


def kwat_proximity(p: np.ndarray, q: np.ndarray) -> float:
    """Cosine similarity of two neighbour distributions."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    denom = np.linalg.norm(p) * np.linalg.norm(q)
    if denom == 0:
        return 0.0
    return float(np.clip(p @ q / denom, -1.0, 1.0))


def exact_objective(g: Graph, k: int, alpha: float, params, direction: str = "forward") -> float:
    """Cross-entropy between k-WAT neighbour distributions and the full-softmax model.

    Forward: sum_i sum_j rownorm(W)[i, j] * -log softmax_j(S_i . T^f_j).
    Backward uses normalized columns and ``T^b``. Nodes with no mass in the
    relevant direction contribute nothing.
    """
    from .model import target_matrix

    w = kwat_matrix(g, k, alpha).values
    if direction == "forward":
        p = w
    elif direction == "backward":
        p = w.T
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    s = params.S
    t = target_matrix(params, direction)
    if s.shape[0] != g.node_count or t.shape[0] != g.node_count:
        raise ValueError("parameter rows do not match graph size")
    mass = p.sum(axis=1)
    keep = mass > 0
    p = p[keep] / mass[keep, None]
    logits = s[keep] @ t.T
    logq = logits - logsumexp(logits, axis=1, keepdims=True)
    return float(-(p * logq).sum())
