"""Weighted (optionally directed) graph in CSR form with per-node alias tables."""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numba import njit


class GraphError(ValueError):
    """Raised for malformed graph input."""


def _build_alias(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table for one discrete distribution.

    Returns ``(accept, alias)``; slot ``j`` yields ``j`` with probability
    ``accept[j]`` and ``alias[j]`` otherwise.
    """
    n = len(probs)
    scaled = probs * n
    accept = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        accept[s] = scaled[s]
        alias[s] = g
        scaled[g] -= 1.0 - scaled[s]
        if scaled[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # leftovers are 1 up to rounding
    return accept, alias


@njit(cache=True)
def _step(indptr, indices, accept, alias, u, r1, r2):
    start = indptr[u]
    deg = indptr[u + 1] - start
    if deg == 0:
        return -1
    slot = int(r1 * deg)
    if slot >= deg:
        slot = deg - 1
    if r2 < accept[start + slot]:
        return indices[start + slot]
    return indices[start + alias[start + slot]]


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable weighted adjacency.

    Out-neighbours of node ``u`` live in ``indices[indptr[u]:indptr[u+1]]``
    with matching ``weights``. For undirected graphs both arcs are stored.
    ``accept``/``alias`` hold the per-node alias tables used for O(1)
    neighbour draws.
    """

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    directed: bool
    node_ids: tuple
    accept: np.ndarray = field(repr=False)
    alias: np.ndarray = field(repr=False)
    _index: dict = field(repr=False, default_factory=dict)

    @property
    def node_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def arc_count(self) -> int:
        return len(self.indices)

    def out_degree(self, u: int | None = None):
        deg = np.diff(self.indptr)
        return deg if u is None else int(deg[u])

    def index_of(self, node_id) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise KeyError(f"unknown node id {node_id!r}") from None

    def neighbors(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        self._check(u)
        s, e = self.indptr[u], self.indptr[u + 1]
        return self.indices[s:e], self.weights[s:e]

    def arcs(self):
        """Yield ``(u, v, w)`` for every stored arc."""
        for u in range(self.node_count):
            nbrs, ws = self.neighbors(u)
            for v, w in zip(nbrs, ws):
                yield u, int(v), float(w)

    def _check(self, u: int) -> None:
        if not 0 <= u < self.node_count:
            raise IndexError(f"node index {u} out of range [0, {self.node_count})")


def from_arrays(
    n: int,
    src: np.ndarray,
    dst: np.ndarray,
    weight: np.ndarray | None = None,
    directed: bool = False,
    node_ids: Sequence[Hashable] | None = None,
) -> Graph:
    """Build a graph from index arrays; duplicate arcs are merged by summing weights."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weight = np.ones(len(src)) if weight is None else np.asarray(weight, dtype=float)
    if n < 1 or len(src) == 0:
        raise GraphError("empty edge set")
    if len(src) != len(dst) or len(src) != len(weight):
        raise GraphError("src, dst and weight lengths differ")
    if np.any(weight <= 0) or not np.all(np.isfinite(weight)):
        raise GraphError("edge weights must be finite and > 0")
    if src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n:
        raise GraphError("edge endpoint out of range")
    if not directed:
        loops = src == dst
        src, dst, weight = (
            np.concatenate([src, dst[~loops]]),
            np.concatenate([dst, src[~loops]]),
            np.concatenate([weight, weight[~loops]]),
        )
    key = src * n + dst
    uniq, inv = np.unique(key, return_inverse=True)
    merged = np.bincount(inv, weights=weight)
    src_u, dst_u = uniq // n, uniq % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src_u, minlength=n), out=indptr[1:])

    accept = np.empty(len(uniq))
    alias = np.empty(len(uniq), dtype=np.int64)
    for u in range(n):
        s, e = indptr[u], indptr[u + 1]
        if e > s:
            w = merged[s:e]
            accept[s:e], alias[s:e] = _build_alias(w / w.sum())

    ids = tuple(range(n)) if node_ids is None else tuple(node_ids)
    if len(ids) != n:
        raise GraphError("node_ids length does not match node count")
    index = {nid: i for i, nid in enumerate(ids)}
    if len(index) != n:
        raise GraphError("node ids are not distinct")
    return Graph(indptr, dst_u.astype(np.int64), merged, bool(directed), ids, accept, alias, index)


def from_edge_list(
    edges: Iterable[Sequence],
    directed: bool = False,
    nodes: Iterable[Hashable] = (),
) -> Graph:
    """Graph from ``(src, dst[, weight])`` records.

    Indices are assigned in first-appearance order; ``nodes`` may pre-register
    ids (e.g. isolated nodes) ahead of the edges.
    """
    index: dict = {}
    for nid in nodes:
        index.setdefault(nid, len(index))
    src, dst, wts = [], [], []
    for lineno, rec in enumerate(edges, 1):
        if len(rec) not in (2, 3):
            raise GraphError(f"edge {lineno}: expected (src, dst[, weight]), got {rec!r}")
        w = float(rec[2]) if len(rec) == 3 else 1.0
        if not w > 0:
            raise GraphError(f"edge {lineno}: non-positive weight {w} in {rec!r}")
        src.append(index.setdefault(rec[0], len(index)))
        dst.append(index.setdefault(rec[1], len(index)))
        wts.append(w)
    if not src:
        raise GraphError("empty edge set")
    return from_arrays(len(index), np.array(src), np.array(dst), np.array(wts), directed, list(index))


def transition_distribution(g: Graph, u: int) -> dict[int, float]:
    """Out-neighbour -> one-step transition probability (empty if dangling)."""
    nbrs, ws = g.neighbors(u)
    total = ws.sum()
    return {int(v): float(w / total) for v, w in zip(nbrs, ws)}


def sample_step(g: Graph, u: int, rng: np.random.Generator) -> int | None:
    """Draw one out-neighbour of ``u`` proportional to arc weight; None if dangling."""
    g._check(u)
    r1, r2 = rng.random(2)
    v = _step(g.indptr, g.indices, g.accept, g.alias, u, r1, r2)
    return None if v < 0 else int(v)
