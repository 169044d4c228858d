"""Bidirectional SkipGram with negative sampling over group-random-walk pairs.

Every sampled pair ``(u, v)`` trains two logistic discriminators that share
the source vectors ``S``:

* forward:  ``S_u`` against target ``T^f_v`` (negatives ``T^f_neg``)
* backward: ``S_v`` against target ``T^b_u`` (negatives ``T^b_neg``)

In attributed mode the target tables are not free parameters but
projections of node features, ``T^f = X H_f`` and ``T^b = X H_b``.

The per-pair math is written twice: plain NumPy functions
(:func:`pair_gradients`, :func:`adam_step`) that are easy to check, and a
compiled epoch kernel used for actual training. Tests pin them to each other.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from numba import njit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_open_unit, check_positive
from .graph import Graph
from .walks import WalkConfig, _walk_end, _walk_length

logger = logging.getLogger(__name__)

CLAMP = 35.0
_FM = {"reassoc", "contract", "arcp", "nsz"}
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    dim: int = 128
    epochs: int = 2000
    negatives: int = 5
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_scale: float | None = None  # None -> 0.5 / dim
    seed: int = 0
    alpha: float = 1.0
    k: int = 5
    noise: str = "uniform"
    normalize_features: bool = False
    shared_targets: bool = False
    workers: int = 1

    def __post_init__(self):
        check_positive("dim", self.dim, integer=True)
        check_positive("epochs", self.epochs, integer=True)
        check_positive("negatives", self.negatives, integer=True)
        check_positive("learning_rate", self.learning_rate)
        check_open_unit("beta1", self.beta1)
        check_open_unit("beta2", self.beta2)
        check_positive("epsilon", self.epsilon)
        if self.init_scale is not None:
            check_positive("init_scale", self.init_scale)
        check_positive("alpha", self.alpha)
        check_positive("k", self.k, integer=True)
        check_positive("workers", self.workers, integer=True)
        if self.noise not in ("uniform", "unigram"):
            raise ValueError(f"noise must be 'uniform' or 'unigram', got {self.noise!r}")

    @property
    def walk(self) -> WalkConfig:
        return WalkConfig(self.alpha, self.k)

    @property
    def scale(self) -> float:
        return 0.5 / self.dim if self.init_scale is None else self.init_scale


@dataclass
class ModelParams:
    """Trainable matrices. Plain mode uses ``T_f``/``T_b``; attributed mode ``X``, ``H_f``, ``H_b``.

    With ``shared`` set (ablation only) the backward table is the forward one.
    """

    S: np.ndarray
    T_f: np.ndarray | None = None
    T_b: np.ndarray | None = None
    X: sp.csr_matrix | None = None
    H_f: np.ndarray | None = None
    H_b: np.ndarray | None = None
    shared: bool = False

    @property
    def mode(self) -> str:
        return "attributed" if self.X is not None else "plain"

    def matrices(self) -> dict[str, np.ndarray]:
        names = ("S", "H_f", "H_b") if self.mode == "attributed" else ("S", "T_f", "T_b")
        return {n: getattr(self, n) for n in names}


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> AdamState:
        mats = params.matrices()
        m = {n: np.zeros_like(a) for n, a in mats.items()}
        v = {n: np.zeros_like(a) for n, a in mats.items()}
        if params.shared:
            tf, tb = ("H_f", "H_b") if params.mode == "attributed" else ("T_f", "T_b")
            m[tb], v[tb] = m[tf], v[tf]
        return cls(m, v, 0)


def init_params(n_nodes: int, cfg: TrainConfig, rng: np.random.Generator, X=None) -> ModelParams:
    """Uniform(-scale, scale) initialization of every trainable matrix."""
    d, a = cfg.dim, cfg.scale
    S = rng.uniform(-a, a, (n_nodes, d))
    rows = n_nodes if X is None else X.shape[1]
    tf = rng.uniform(-a, a, (rows, d))
    tb = tf if cfg.shared_targets else rng.uniform(-a, a, (rows, d))
    if X is None:
        return ModelParams(S, T_f=tf, T_b=tb, shared=cfg.shared_targets)
    return ModelParams(S, X=X, H_f=tf, H_b=tb, shared=cfg.shared_targets)


def _table_name(params: ModelParams, direction: str) -> str:
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    fwd = direction == "forward" or params.shared
    if params.mode == "attributed":
        return "H_f" if fwd else "H_b"
    return "T_f" if fwd else "T_b"


def target_vector(params: ModelParams, i: int, direction: str) -> np.ndarray:
    table = getattr(params, _table_name(params, direction))
    if params.mode == "plain":
        return table[i]
    if params.X.shape[1] != table.shape[0]:
        raise ValueError(f"X has {params.X.shape[1]} columns but H has {table.shape[0]} rows")
    row = params.X[i]
    return row.data @ table[row.indices]


def target_matrix(params: ModelParams, direction: str) -> np.ndarray:
    table = getattr(params, _table_name(params, direction))
    return table if params.mode == "plain" else np.asarray(params.X @ table)


def log_sigmoid(x):
    """Stable log(sigmoid(x)) after clamping to +-CLAMP."""
    x = np.clip(x, -CLAMP, CLAMP)
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    x = np.clip(x, -CLAMP, CLAMP)
    return 1.0 / (1.0 + np.exp(-x))


def positive_loss(params: ModelParams, pair) -> tuple[float, float]:
    u, v = pair
    lf = -log_sigmoid(params.S[u] @ target_vector(params, v, "forward"))
    lb = -log_sigmoid(params.S[v] @ target_vector(params, u, "backward"))
    return float(lf), float(lb)


def negative_loss(params: ModelParams, pair, neg: int) -> tuple[float, float]:
    u, v = pair
    lf = -log_sigmoid(-(params.S[u] @ target_vector(params, neg, "forward")))
    lb = -log_sigmoid(-(params.S[v] @ target_vector(params, neg, "backward")))
    return float(lf), float(lb)


def pair_loss(params: ModelParams, pair, negatives) -> float:
    total = sum(positive_loss(params, pair))
    for n in negatives:
        total += sum(negative_loss(params, pair, n))
    return total


def _terms(pair, negatives):
    """(direction, source node, target node, is_positive) for every logistic term."""
    u, v = pair
    yield "forward", u, v, True
    yield "backward", v, u, True
    for n in negatives:
        yield "forward", u, n, False
        yield "backward", v, n, False


def pair_gradients(params: ModelParams, pair, negatives) -> dict[tuple[str, int], np.ndarray]:
    """Gradient of :func:`pair_loss` restricted to the rows it touches.

    Keys are ``(matrix name, row)``; repeated rows are summed.
    """
    grads: dict[tuple[str, int], np.ndarray] = {}

    def add(key, g):
        if key in grads:
            grads[key] = grads[key] + g
        else:
            grads[key] = g

    for direction, src, tgt, positive in _terms(pair, negatives):
        s = params.S[src]
        t = target_vector(params, tgt, direction)
        x = s @ t
        # d(-log sig(x))/dx = sig(x) - 1 ; d(-log sig(-x))/dx = sig(x)
        c = _sigmoid(x) - 1.0 if positive else _sigmoid(x)
        add(("S", src), c * t)
        name = _table_name(params, direction)
        if params.mode == "plain":
            add((name, tgt), c * s)
        else:
            row = params.X[tgt]
            for f, xv in zip(row.indices, row.data):
                add((name, int(f)), c * xv * s)
    return grads


def adam_step(state: AdamState, params: ModelParams, grads, cfg: TrainConfig) -> None:
    """Lazy Adam: moments and parameters change only on the rows present in ``grads``."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1, bc2 = 1.0 - b1**state.t, 1.0 - b2**state.t
    mats = params.matrices()
    for (name, row), g in grads.items():
        if params.shared and name in ("T_b", "H_b"):
            name = name.replace("_b", "_f")
        m, v = state.m[name], state.v[name]
        m[row] = b1 * m[row] + (1 - b1) * g
        v[row] = b2 * v[row] + (1 - b2) * g * g
        mats[name][row] -= cfg.learning_rate * (m[row] / bc1) / (np.sqrt(v[row] / bc2) + cfg.epsilon)


@njit(cache=True, nogil=True, fastmath=_FM)
def _adam_row(p, m, v, row, g, lr, b1, b2, bc1, bc2, eps):
    for c in range(p.shape[1]):
        m[row, c] = b1 * m[row, c] + (1.0 - b1) * g[c]
        v[row, c] = b2 * v[row, c] + (1.0 - b2) * g[c] * g[c]
        p[row, c] -= lr * (m[row, c] / bc1) / (np.sqrt(v[row, c] / bc2) + eps)


@njit(cache=True, nogil=True, fastmath=_FM)
def _epoch_kernel(
    order, len_r, step_r, negs,
    indptr, indices, accept, alias, length_cdf,
    xptr, xind, xval,
    S, mS, vS, H0, m0, v0, H1, m1, v1, shared,
    t, lr, b1, b2, eps, clamp, losses,
):
    d = S.shape[1]
    nq = negs.shape[1]
    nt = nq + 1
    n_feat = H0.shape[0]
    max_nnz = 1
    for i in range(len(xptr) - 1):
        max_nnz = max(max_nnz, xptr[i + 1] - xptr[i])
    cap = 2 * nt * max_nnz
    tvec = np.empty((2, nt, d))
    coef = np.empty((2, nt))
    tnode = np.empty((2, nt), np.int64)
    srcs = np.empty(2, np.int64)
    gS = np.empty((2, d))
    # feature-row gradients are rank one per direction: wgt[slot, dr] * S[src_dr]
    wgt = np.empty((cap, 2))
    srow = np.empty((2, d))
    gtmp = np.empty(d)
    hrow = np.empty(cap, np.int64)
    htab = np.empty(cap, np.int64)
    slot = np.full((2, n_feat), -1, np.int64)

    for p in range(len(order)):
        u = order[p]
        if indptr[u + 1] == indptr[u]:
            losses[p] = np.nan
            continue
        l = _walk_length(length_cdf, len_r[p])
        v = _walk_end(indptr, indices, accept, alias, u, l, step_r[p])
        t += 1
        srcs[0] = u
        srcs[1] = v
        tnode[0, 0] = v
        tnode[1, 0] = u
        for j in range(nq):
            tnode[0, j + 1] = negs[p, j]
            tnode[1, j + 1] = negs[p, j]

        loss = 0.0
        for dr in range(2):
            H = H0 if dr == 0 or shared else H1
            s = srcs[dr]
            for j in range(nt):
                i = tnode[dr, j]
                for c in range(d):
                    tvec[dr, j, c] = 0.0
                for z in range(xptr[i], xptr[i + 1]):
                    xz = xval[z]
                    hz = xind[z]
                    for c in range(d):
                        tvec[dr, j, c] += xz * H[hz, c]
                x = 0.0
                for c in range(d):
                    x += S[s, c] * tvec[dr, j, c]
                x = min(max(x, -clamp), clamp)
                sig = 1.0 / (1.0 + np.exp(-x))
                if j == 0:
                    loss += np.log1p(np.exp(-x))
                    coef[dr, j] = sig - 1.0
                else:
                    loss += np.log1p(np.exp(x))
                    coef[dr, j] = sig
        losses[p] = loss

        for c in range(d):
            gS[0, c] = 0.0
            gS[1, c] = 0.0
        nh = 0
        for dr in range(2):
            tab = 0 if shared else dr
            s = srcs[dr]
            for j in range(nt):
                cj = coef[dr, j]
                for c in range(d):
                    gS[dr, c] += cj * tvec[dr, j, c]
                i = tnode[dr, j]
                for z in range(xptr[i], xptr[i + 1]):
                    f = xind[z]
                    sl = slot[tab, f]
                    if sl < 0:
                        sl = nh
                        slot[tab, f] = nh
                        hrow[nh] = f
                        htab[nh] = tab
                        wgt[nh, 0] = 0.0
                        wgt[nh, 1] = 0.0
                        nh += 1
                    wgt[sl, dr] += cj * xval[z]

        for c in range(d):
            srow[0, c] = S[u, c]
            srow[1, c] = S[v, c]
        bc1 = 1.0 - b1**t
        bc2 = 1.0 - b2**t
        if u == v:
            for c in range(d):
                gS[0, c] += gS[1, c]
            _adam_row(S, mS, vS, u, gS[0], lr, b1, b2, bc1, bc2, eps)
        else:
            _adam_row(S, mS, vS, u, gS[0], lr, b1, b2, bc1, bc2, eps)
            _adam_row(S, mS, vS, v, gS[1], lr, b1, b2, bc1, bc2, eps)
        for h in range(nh):
            w0 = wgt[h, 0]
            w1 = wgt[h, 1]
            for c in range(d):
                gtmp[c] = w0 * srow[0, c] + w1 * srow[1, c]
            if htab[h] == 0:
                _adam_row(H0, m0, v0, hrow[h], gtmp, lr, b1, b2, bc1, bc2, eps)
            else:
                _adam_row(H1, m1, v1, hrow[h], gtmp, lr, b1, b2, bc1, bc2, eps)
            slot[htab[h], hrow[h]] = -1
    return t


def _identity_csr(n: int):
    return np.arange(n + 1, dtype=np.int64), np.arange(n, dtype=np.int64), np.ones(n)


@dataclass
class EpochDraws:
    """All randomness one epoch consumes, drawn up front from a numpy Generator."""

    order: np.ndarray
    len_r: np.ndarray
    step_r: np.ndarray
    negs: np.ndarray

    @classmethod
    def draw(cls, g: Graph, cfg: TrainConfig, rng: np.random.Generator, noise_p=None) -> EpochDraws:
        n = g.node_count
        order = rng.permutation(n)
        len_r = rng.random(n)
        step_r = rng.random((n, cfg.k, 2))
        if noise_p is None:
            negs = rng.integers(0, n, (n, cfg.negatives))
        else:
            negs = rng.choice(n, (n, cfg.negatives), p=noise_p)
        return cls(order, len_r, step_r, negs.astype(np.int64))


def noise_distribution(g: Graph, kind: str) -> np.ndarray | None:
    """None for uniform noise, else weighted out-degree ** 0.75 normalized."""
    if kind == "uniform":
        return None
    rows = np.repeat(np.arange(g.node_count), g.out_degree())
    strength = np.bincount(rows, weights=g.weights, minlength=g.node_count) ** 0.75
    if strength.sum() == 0:
        return None
    return strength / strength.sum()


def run_epoch(g: Graph, params: ModelParams, state: AdamState, cfg: TrainConfig, draws: EpochDraws) -> np.ndarray:
    """Train on one epoch of pre-drawn randomness; returns per-position pair losses (NaN = skipped)."""
    mats = params.matrices()
    if params.mode == "attributed":
        X = params.X
        xptr, xind, xval = X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data
        h0, h1 = "H_f", "H_b"
    else:
        xptr, xind, xval = _identity_csr(g.node_count)
        h0, h1 = "T_f", "T_b"
    walk = cfg.walk
    losses = np.empty(len(draws.order))

    def shard(idx):
        return _epoch_kernel(
            draws.order[idx], draws.len_r[idx], draws.step_r[idx], draws.negs[idx],
            g.indptr, g.indices, g.accept, g.alias, walk.length_cdf,
            xptr, xind, xval,
            mats["S"], state.m["S"], state.v["S"],
            mats[h0], state.m[h0], state.v[h0],
            mats[h1], state.m[h1], state.v[h1], params.shared,
            state.t, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, CLAMP,
            losses[idx],
        )

    if cfg.workers == 1:
        state.t = int(shard(slice(None)))
        return losses

    # asynchronous mode: shards race on shared rows; results are not reproducible
    t0 = state.t
    bounds = np.linspace(0, len(draws.order), cfg.workers + 1).astype(int)
    out = [0] * cfg.workers

    def work(w):
        idx = slice(bounds[w], bounds[w + 1])
        out[w] = shard(idx) - t0

    threads = [threading.Thread(target=work, args=(w,)) for w in range(cfg.workers)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    state.t = t0 + int(sum(out))
    return losses


def train_epoch(g: Graph, params: ModelParams, state: AdamState, cfg: TrainConfig,
                rng: np.random.Generator, noise_p=None) -> float | None:
    """One pass over a shuffled node order; mean summed loss per trained pair, None if nothing trained."""
    losses = run_epoch(g, params, state, cfg, EpochDraws.draw(g, cfg, rng, noise_p))
    trained = losses[~np.isnan(losses)]
    if trained.size == 0:
        return None
    mean = float(trained.mean())
    if not np.isfinite(mean):
        raise FloatingPointError("non-finite training loss")
    return mean


def reference_epoch(g: Graph, params: ModelParams, state: AdamState, cfg: TrainConfig, draws: EpochDraws) -> np.ndarray:
    """Slow NumPy twin of :func:`run_epoch` built from :func:`pair_gradients` and :func:`adam_step`."""
    walk = cfg.walk
    losses = np.full(len(draws.order), np.nan)
    for p, u in enumerate(draws.order):
        if g.out_degree(u) == 0:
            continue
        l = _walk_length(walk.length_cdf, draws.len_r[p])
        v = int(_walk_end(g.indptr, g.indices, g.accept, g.alias, u, l, draws.step_r[p]))
        pair, negs = (int(u), v), draws.negs[p]
        losses[p] = pair_loss(params, pair, negs)
        adam_step(state, params, pair_gradients(params, pair, negs), cfg)
    return losses


def train(g: Graph, cfg: TrainConfig, X=None, callback=None) -> tuple[ModelParams, list]:
    """Full training run: initialize, then ``cfg.epochs`` epochs. Returns params and per-epoch mean losses."""
    rng = np.random.default_rng(cfg.seed)
    if X is not None:
        X = check_features(X, g.node_count, cfg.normalize_features)
    params = init_params(g.node_count, cfg, rng, X)
    state = AdamState.for_params(params)
    noise_p = noise_distribution(g, cfg.noise)
    history = []
    for epoch in range(cfg.epochs):
        loss = train_epoch(g, params, state, cfg, rng, noise_p)
        history.append(loss)
        if callback is not None:
            callback(epoch, loss)
        if loss is None:
            continue
        if epoch % 100 == 0:
            logger.debug("epoch %d loss %.5f", epoch, loss)
    return params, history


def embeddings(params: ModelParams, concat_targets: bool = False) -> np.ndarray:
    """Node representations: the source vectors, optionally followed by both target vectors."""
    if not concat_targets:
        return params.S
    return np.hstack([params.S, target_matrix(params, "forward"), target_matrix(params, "backward")])


def save_checkpoint(path, params: ModelParams, cfg: TrainConfig, history=None) -> None:
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "mode": params.mode,
        "shared": params.shared,
        "config": asdict(cfg),
        "history": history or [],
    }
    arrays = {"S": params.S}
    if params.mode == "plain":
        arrays["T_f"] = params.T_f
        if not params.shared:
            arrays["T_b"] = params.T_b
    else:
        arrays.update(H_f=params.H_f, X_data=params.X.data, X_indices=params.X.indices,
                      X_indptr=params.X.indptr, X_shape=np.array(params.X.shape))
        if not params.shared:
            arrays["H_b"] = params.H_b
    with open(path, "wb") as fh:
        np.savez_compressed(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig, list]:
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        shared = meta["shared"]
        if meta["mode"] == "plain":
            tf = z["T_f"]
            params = ModelParams(z["S"], T_f=tf, T_b=tf if shared else z["T_b"], shared=shared)
        else:
            X = sp.csr_matrix((z["X_data"], z["X_indices"], z["X_indptr"]), shape=tuple(z["X_shape"]))
            hf = z["H_f"]
            params = ModelParams(z["S"], X=X, H_f=hf, H_b=hf if shared else z["H_b"], shared=shared)
    return params, TrainConfig(**meta["config"]), meta["history"]


class BiGRW(TransformerMixin, BaseEstimator):
    """Bidirectional group-random-walk node embedding.

    ``fit(graph)`` learns plain embeddings; ``fit(graph, features)`` learns the
    attributed variant whose target vectors are projected node features.
    After fitting, ``embedding_`` holds one row per node.

    Parameters
    ----------
    alpha : float
        Walk-length bias. Lengths l <= k are drawn with probability
        proportional to ``alpha ** l``, so ``alpha < 1`` favours short walks.
    k : int
        Longest walk.
    dim : int
        Embedding dimension.
    epochs : int
        Passes over the node set; each pass trains one pair per node.
    negatives : int
        Negative samples per positive pair and direction.
    shared_targets : bool
        Ablation switch: one target table for both directions.
    """

    def __init__(
        self,
        alpha=1.0,
        k=5,
        dim=128,
        epochs=2000,
        negatives=5,
        learning_rate=0.01,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        init_scale=None,
        noise="uniform",
        normalize_features=False,
        shared_targets=False,
        concat_targets=False,
        workers=1,
        random_state=0,
    ):
        self.alpha = alpha
        self.k = k
        self.dim = dim
        self.epochs = epochs
        self.negatives = negatives
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.init_scale = init_scale
        self.noise = noise
        self.normalize_features = normalize_features
        self.shared_targets = shared_targets
        self.concat_targets = concat_targets
        self.workers = workers
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            dim=self.dim, epochs=self.epochs, negatives=self.negatives,
            learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2,
            epsilon=self.epsilon, init_scale=self.init_scale, seed=int(self.random_state or 0),
            alpha=self.alpha, k=self.k, noise=self.noise,
            normalize_features=self.normalize_features, shared_targets=self.shared_targets,
            workers=self.workers,
        )

    def fit(self, graph: Graph, features=None, callback=None):
        if not isinstance(graph, Graph):
            raise TypeError(f"expected a Graph, got {type(graph).__name__}")
        self.config_ = self._config()
        self.params_, self.loss_history_ = train(graph, self.config_, features, callback)
        self.n_nodes_ = graph.node_count
        self.embedding_ = embeddings(self.params_, self.concat_targets)
        return self

    def transform(self, nodes=None):
        """Embedding rows for node indices ``nodes`` (all nodes if None)."""
        check_is_fitted(self, "embedding_")
        if nodes is None:
            return self.embedding_
        return self.embedding_[np.asarray(nodes, dtype=np.int64)]

    def fit_transform(self, graph, features=None, **fit_params):
        return self.fit(graph, features, **fit_params).embedding_
