"""Node classification and clustering protocol for learned embeddings.

Classification: random train/test splits of the labelled nodes at ratios
0.1..0.9, one-vs-rest logistic regression, Micro/Macro-F1 averaged over
repetitions. Clustering: k-means with K = number of classes, scored by
purity, NMI and multiclass MCC.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.cluster import KMeans
from sklearn.utils.validation import check_is_fitted

from ._validation import check_embedding

DEFAULT_RATIOS = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass(frozen=True)
class LabelSet:
    """Per-node label tuples (empty for unlabelled nodes) over classes ``0..n_classes-1``."""

    labels: tuple[tuple[int, ...], ...]
    n_classes: int
    class_names: tuple = ()

    def __post_init__(self):
        for i, ls in enumerate(self.labels):
            for c in ls:
                if not 0 <= c < self.n_classes:
                    raise ValueError(f"node {i}: label {c} outside [0, {self.n_classes})")

    @classmethod
    def from_sequence(cls, labels: Sequence, n_classes: int | None = None) -> LabelSet:
        """From one class id per node (None/-1 = unlabelled) or one iterable per node."""
        out = []
        for ls in labels:
            if ls is None or (np.isscalar(ls) and ls < 0):
                out.append(())
            elif np.isscalar(ls):
                out.append((int(ls),))
            else:
                out.append(tuple(int(c) for c in ls))
        if n_classes is None:
            n_classes = 1 + max((max(ls) for ls in out if ls), default=-1)
        return cls(tuple(out), int(n_classes))

    @property
    def labeled(self) -> np.ndarray:
        return np.array([i for i, ls in enumerate(self.labels) if ls], dtype=np.int64)

    @property
    def multilabel(self) -> bool:
        return any(len(ls) > 1 for ls in self.labels)

    def indicator(self, nodes=None) -> np.ndarray:
        nodes = self.labeled if nodes is None else nodes
        Y = np.zeros((len(nodes), self.n_classes), dtype=np.int8)
        for r, i in enumerate(nodes):
            Y[r, list(self.labels[i])] = 1
        return Y

    def primary(self, nodes=None) -> np.ndarray:
        """First listed label of each node (for metrics that need one class per node)."""
        nodes = self.labeled if nodes is None else nodes
        return np.array([self.labels[i][0] for i in nodes], dtype=np.int64)


def repeated_splits(labels: LabelSet, train_ratio: float, repetitions: int = 10,
                    rng: np.random.Generator | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random (train, test) partitions of the labelled nodes; train size is floor(ratio * n)."""
    if not 0 < train_ratio < 1:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    rng = np.random.default_rng() if rng is None else rng
    nodes = labels.labeled
    n_train = int(np.floor(train_ratio * len(nodes) + 1e-9))
    splits = []
    for _ in range(repetitions):
        perm = rng.permutation(nodes)
        splits.append((np.sort(perm[:n_train]), np.sort(perm[n_train:])))
    return splits


def _binary_logreg_objective(wb, X, y, reg):
    w, b = wb[:-1], wb[-1]
    z = X @ w + b
    loss = np.logaddexp(0.0, z).sum() - y @ z + 0.5 * reg * (w @ w)
    r = expit(z) - y
    grad = np.empty_like(wb)
    grad[:-1] = X.T @ r + reg * w
    grad[-1] = r.sum()
    return loss, grad


class OneVsRestLogisticRegression(ClassifierMixin, BaseEstimator):
    """Independent L2-regularized binary logistic regressions, one per class.

    Each class minimizes ``sum_i logloss_i + reg/2 * ||w||^2`` (bias not
    penalized) with L-BFGS until the gradient norm drops below ``tol`` or
    ``max_iter`` iterations pass.
    """

    def __init__(self, reg=1.0, max_iter=500, tol=1e-5):
        self.reg = reg
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = check_embedding(X)
        y = np.asarray(y)
        if y.ndim == 1:
            self.classes_ = np.unique(y)
            Y = (y[:, None] == self.classes_[None, :]).astype(float)
        else:
            self.classes_ = np.arange(y.shape[1])
            Y = y.astype(float)
        if Y.shape[0] != X.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        d = X.shape[1]
        coef = np.zeros((Y.shape[1], d))
        intercept = np.zeros(Y.shape[1])
        self.n_iter_ = np.zeros(Y.shape[1], dtype=int)
        for c in range(Y.shape[1]):
            res = minimize(
                _binary_logreg_objective, np.zeros(d + 1), args=(X, Y[:, c], self.reg),
                jac=True, method="L-BFGS-B",
                options={"maxiter": self.max_iter, "gtol": self.tol, "ftol": 1e-15},
            )
            coef[c], intercept[c] = res.x[:-1], res.x[-1]
            self.n_iter_[c] = res.nit
        self.coef_, self.intercept_ = coef, intercept
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        return check_embedding(X) @ self.coef_.T + self.intercept_

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def predict_top(self, X, counts) -> np.ndarray:
        """Indicator matrix marking each row's ``counts[i]`` highest-scoring classes."""
        scores = self.decision_function(X)
        out = np.zeros(scores.shape, dtype=np.int8)
        ranked = np.argsort(-scores, axis=1, kind="stable")
        for i, m in enumerate(counts):
            out[i, ranked[i, :m]] = 1
        return out


def _as_indicator(a, n_classes=None) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim == 2:
        return a.astype(bool)
    n_classes = int(a.max()) + 1 if n_classes is None else n_classes
    return np.eye(n_classes, dtype=bool)[a]


def _f1_parts(pred, truth):
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.ndim == 1:
        n_classes = int(max(truth.max(), pred.max())) + 1
    else:
        n_classes = truth.shape[1]
    T = _as_indicator(truth, n_classes)
    P = _as_indicator(pred, n_classes)
    if T.shape != P.shape:
        raise ValueError(f"prediction shape {P.shape} != truth shape {T.shape}")
    tp = (T & P).sum(axis=0)
    fp = (~T & P).sum(axis=0)
    fn = (T & ~P).sum(axis=0)
    return tp, fp, fn


def micro_f1(pred, truth) -> float:
    tp, fp, fn = _f1_parts(pred, truth)
    denom = 2 * tp.sum() + fp.sum() + fn.sum()
    return float(2 * tp.sum() / denom) if denom else 1.0


def macro_f1(pred, truth) -> float:
    """Mean per-class F1 over classes occurring in the truth or the prediction."""
    tp, fp, fn = _f1_parts(pred, truth)
    denom = 2 * tp + fp + fn
    present = denom > 0
    if not present.any():
        return 1.0
    return float(np.mean(2 * tp[present] / denom[present]))


class ClusterAssignment(NamedTuple):
    labels: np.ndarray
    inertia: float
    centers: np.ndarray


def kmeans(X, n_clusters: int, restarts: int = 10, seed=None, max_iter: int = 300,
           tol: float = 1e-6) -> ClusterAssignment:
    """k-means++ seeded Lloyd iterations; the lowest-inertia of ``restarts`` runs wins."""
    X = check_embedding(X)
    km = KMeans(n_clusters=n_clusters, init="k-means++", n_init=restarts,
                max_iter=max_iter, tol=tol, random_state=seed)
    km.fit(X)
    return ClusterAssignment(km.labels_.astype(np.int64), float(km.inertia_), km.cluster_centers_)


def contingency(a, b) -> np.ndarray:
    """Counts table: rows are the distinct values of ``a``, columns those of ``b``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("partitions have different lengths")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def purity(assign, labels) -> float:
    table = contingency(assign, labels)
    return float(table.max(axis=1).sum() / table.sum())


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(assign, labels) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    table = contingency(assign, labels).astype(float)
    n = table.sum()
    ha, hb = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if ha == 0 and hb == 0:
        return 1.0
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / n**2
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / outer[nz])).sum())
    return float(np.clip(mi / ((ha + hb) / 2), 0.0, 1.0))


def mcc_multiclass(pred, truth) -> float:
    """Matthews correlation from the full confusion matrix (covariance form)."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    classes = np.union1d(pred, truth)
    pi = np.searchsorted(classes, pred)
    ti = np.searchsorted(classes, truth)
    conf = np.zeros((len(classes), len(classes)), dtype=float)
    np.add.at(conf, (ti, pi), 1)
    s = conf.sum()
    correct = np.trace(conf)
    p_k = conf.sum(axis=0)
    t_k = conf.sum(axis=1)
    cov = correct * s - p_k @ t_k
    denom = np.sqrt((s**2 - p_k @ p_k) * (s**2 - t_k @ t_k))
    return float(cov / denom) if denom > 0 else 0.0


def majority_mapping(assign, labels) -> np.ndarray:
    """Relabel every cluster with the most frequent true class inside it."""
    assign, labels = np.asarray(assign), np.asarray(labels)
    out = np.empty_like(labels)
    for c in np.unique(assign):
        members = assign == c
        vals, counts = np.unique(labels[members], return_counts=True)
        out[members] = vals[np.argmax(counts)]
    return out


def classification_scores(embedding, labels: LabelSet, train_ratio: float, repetitions: int = 10,
                          seed=None, reg: float = 1.0, max_iter: int = 500) -> dict:
    E = check_embedding(embedding, "embedding")
    rng = np.random.default_rng(seed)
    micro, macro = [], []
    for train, test in repeated_splits(labels, train_ratio, repetitions, rng):
        clf = OneVsRestLogisticRegression(reg=reg, max_iter=max_iter)
        truth = labels.indicator(test)
        if labels.multilabel:
            clf.fit(E[train], labels.indicator(train))
            pred = clf.predict_top(E[test], truth.sum(axis=1))
        else:
            y = labels.primary(train)
            clf.fit(E[train], y)
            pred = _as_indicator(clf.predict(E[test]), labels.n_classes)
        micro.append(micro_f1(pred, truth))
        macro.append(macro_f1(pred, truth))
    return {
        "train_ratio": train_ratio,
        "repetitions": repetitions,
        "micro_f1_mean": float(np.mean(micro)),
        "micro_f1_std": float(np.std(micro)),
        "macro_f1_mean": float(np.mean(macro)),
        "macro_f1_std": float(np.std(macro)),
    }


def evaluate_classification(embedding, labels: LabelSet, ratios=DEFAULT_RATIOS, repetitions: int = 10,
                            seed=None, reg: float = 1.0) -> dict:
    ss = np.random.SeedSequence(seed)
    rows = [classification_scores(embedding, labels, r, repetitions, np.random.default_rng(child), reg)
            for r, child in zip(ratios, ss.spawn(len(ratios)))]
    return {"task": "classification", "seed": seed, "reg": reg, "results": rows}


def evaluate_clustering(embedding, labels: LabelSet, n_clusters: int | None = None, restarts: int = 10,
                        seed=None) -> dict:
    """k-means on the labelled nodes; MCC is omitted (None) for multi-label data."""
    E = check_embedding(embedding, "embedding")
    nodes = labels.labeled
    truth = labels.primary(nodes)
    K = labels.n_classes if n_clusters is None else n_clusters
    assign = kmeans(E[nodes], K, restarts=restarts, seed=seed).labels
    return {
        "task": "clustering",
        "seed": seed,
        "n_clusters": K,
        "purity": purity(assign, truth),
        "nmi": nmi(assign, truth),
        "mcc": None if labels.multilabel else mcc_multiclass(majority_mapping(assign, truth), truth),
    }
