"""Group random walks: draw a length l with P(l) ~ alpha**l, walk l steps, emit (start, end)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from .graph import Graph, _step
from .kwat import hop_weights


@dataclass(frozen=True)
class WalkConfig:
    alpha: float = 1.0
    k: int = 5
    length_cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cdf = np.cumsum(hop_weights(self.k, self.alpha))
        cdf[-1] = 1.0
        object.__setattr__(self, "length_cdf", cdf)


class PositivePair(NamedTuple):
    source: int
    target: int


@njit(cache=True)
def _walk_length(length_cdf, r):
    k = len(length_cdf)
    for l in range(k):
        if r < length_cdf[l]:
            return l + 1
    return k


@njit(cache=True)
def _walk_end(indptr, indices, accept, alias, u, length, steps):
    """Endpoint of a ``length``-step walk from ``u``; ``steps[s]`` holds two uniforms per step.

    Stops early at a dangling node and returns the node reached so far.
    """
    cur = u
    for s in range(length):
        nxt = _step(indptr, indices, accept, alias, cur, steps[s, 0], steps[s, 1])
        if nxt < 0:
            break
        cur = nxt
    return cur


@njit(cache=True)
def _endpoint_counts(indptr, indices, accept, alias, length_cdf, u, len_r, step_r, counts):
    for i in range(len(len_r)):
        l = _walk_length(length_cdf, len_r[i])
        counts[_walk_end(indptr, indices, accept, alias, u, l, step_r[i])] += 1


def sample_walk_length(cfg: WalkConfig, rng: np.random.Generator) -> int:
    return int(_walk_length(cfg.length_cdf, rng.random()))


def sample_pair(
    g: Graph, u: int, cfg: WalkConfig, rng: np.random.Generator, length: int | None = None
) -> PositivePair | None:
    """One positive pair starting at ``u``; None when ``u`` has no out-arcs.

    ``length`` forces the walk length instead of drawing it.
    """
    g._check(u)
    if g.out_degree(u) == 0:
        return None
    l = sample_walk_length(cfg, rng) if length is None else int(length)
    steps = rng.random((l, 2))
    v = _walk_end(g.indptr, g.indices, g.accept, g.alias, u, l, steps)
    return PositivePair(u, int(v))


def sample_negative(rng: np.random.Generator, node_count: int) -> int:
    return int(rng.integers(node_count))


def endpoint_histogram(
    g: Graph, u: int, cfg: WalkConfig, n_pairs: int, rng: np.random.Generator, chunk: int = 1 << 18
) -> np.ndarray:
    """Counts of walk endpoints over ``n_pairs`` group walks from ``u``."""
    counts = np.zeros(g.node_count, dtype=np.int64)
    if g.out_degree(u) == 0:
        return counts
    done = 0
    while done < n_pairs:
        m = min(chunk, n_pairs - done)
        _endpoint_counts(
            g.indptr, g.indices, g.accept, g.alias, cfg.length_cdf, u,
            rng.random(m), rng.random((m, cfg.k, 2)), counts,
        )
        done += m
    return counts
