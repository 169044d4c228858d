import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import matthews_corrcoef, normalized_mutual_info_score

from bigrw.evaluation import (
    LabelSet, OneVsRestLogisticRegression, contingency, evaluate_classification, evaluate_clustering,
    kmeans, macro_f1, majority_mapping, mcc_multiclass, micro_f1, nmi, purity, repeated_splits,
)

partitions = st.lists(st.integers(0, 4), min_size=2, max_size=40)


def test_labelset_basics():
    ls = LabelSet.from_sequence([0, None, 2, (1, 2)])
    assert ls.n_classes == 3 and ls.multilabel
    assert ls.labeled.tolist() == [0, 2, 3]
    assert ls.indicator().tolist() == [[1, 0, 0], [0, 0, 1], [0, 1, 1]]
    assert ls.primary().tolist() == [0, 2, 1]
    with pytest.raises(ValueError):
        LabelSet(((3,),), 2)


def test_split_sizes_and_disjointness():
    labels = LabelSet.from_sequence([i % 3 for i in range(2708)])
    splits = repeated_splits(labels, 0.1, 4, np.random.default_rng(0))
    assert len(splits) == 4
    for tr, te in splits:
        assert len(tr) == 270 and len(te) == 2438
        assert not set(tr) & set(te)
    ten = LabelSet.from_sequence(list(range(2)) * 50)
    tr, te = repeated_splits(ten, 0.5, 1, np.random.default_rng(1))[0]
    assert len(tr) == len(te) == 50
    a = repeated_splits(labels, 0.3, 2, np.random.default_rng(5))
    b = repeated_splits(labels, 0.3, 2, np.random.default_rng(5))
    assert all((x[0] == y[0]).all() for x, y in zip(a, b))
    with pytest.raises(ValueError):
        repeated_splits(labels, 1.0)


def test_logreg_separable_and_prior():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-3, 0.5, (50, 2)), rng.normal(3, 0.5, (50, 2)), rng.normal((3, -6), 0.5, (50, 2))])
    y = np.repeat([0, 1, 2], 50)
    clf = OneVsRestLogisticRegression().fit(X, y)
    assert (clf.predict(X) == y).all()
    Xc = np.ones((40, 3))
    yc = np.array([1] * 10 + [0] * 30)
    c = OneVsRestLogisticRegression().fit(Xc, yc)
    # constant features are absorbed by the unpenalized intercept, so weights vanish
    np.testing.assert_allclose(c.coef_, 0, atol=1e-3)
    prob = 1 / (1 + np.exp(-c.decision_function(Xc[:1])))
    np.testing.assert_allclose(prob[0], [0.75, 0.25], atol=1e-3)


def test_logreg_matches_sklearn_binary():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(200, 5))
    y = (X @ [1, -2, 0.5, 0, 1] + rng.normal(size=200) > 0).astype(int)
    ours = OneVsRestLogisticRegression(reg=1.0, tol=1e-10, max_iter=2000).fit(X, y)
    ref = LogisticRegression(C=1.0, tol=1e-12, max_iter=5000).fit(X, y)
    # the positive-class column of our one-vs-rest model is sklearn's binary problem
    np.testing.assert_allclose(ours.coef_[1], ref.coef_[0], rtol=1e-4, atol=1e-6)
    np.testing.assert_allclose(ours.intercept_[1], ref.intercept_[0], rtol=1e-4, atol=1e-6)


def test_logreg_multilabel_top_m():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 3))
    Y = np.stack([X[:, 0] > 0, X[:, 1] > 0, X[:, 2] > 0], axis=1).astype(int)
    Y[Y.sum(axis=1) == 0, 0] = 1
    clf = OneVsRestLogisticRegression().fit(X, Y)
    top = clf.predict_top(X, Y.sum(axis=1))
    assert (top.sum(axis=1) == Y.sum(axis=1)).all()
    assert micro_f1(top, Y) > 0.9


def test_f1_example():
    truth = [0, 0, 1, 1]
    pred = [0, 1, 1, 1]
    assert micro_f1(pred, truth) == pytest.approx(0.75)
    # class 0: P=1 R=.5 -> 2/3; class 1: P=2/3 R=1 -> .8
    assert macro_f1(pred, truth) == pytest.approx((2 / 3 + 0.8) / 2)
    assert macro_f1(pred, truth) == pytest.approx(0.7333, abs=1e-4)


def test_kmeans_basic():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(c, 0.1, (30, 2)) for c in ((0, 0), (5, 5), (0, 5))])
    a = kmeans(X, 3, seed=0)
    assert purity(a.labels, np.repeat([0, 1, 2], 30)) == 1.0
    one = kmeans(X, 1, seed=0)
    assert one.inertia == pytest.approx(((X - X.mean(0)) ** 2).sum())
    assert (kmeans(X, 3, seed=4).labels == kmeans(X, 3, seed=4).labels).all()


def test_purity_examples():
    assert purity([0, 0, 1, 1], [5, 5, 7, 7]) == 1.0
    assert purity([0, 0, 0, 1, 1], [0, 0, 1, 1, 0]) == pytest.approx(0.6)
    assert purity([0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 1, 1]) == pytest.approx(2 / 3)
    assert contingency([0, 1, 1], [2, 2, 3]).tolist() == [[1, 0], [1, 1]]


def test_nmi_examples():
    a = [0, 0, 1, 1, 2, 2]
    assert nmi(a, a) == pytest.approx(1.0)
    assert nmi(a, [5, 5, 3, 3, 9, 9]) == pytest.approx(1.0)
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-12)
    assert nmi([0, 0, 0], [0, 0, 0]) == 1.0


def test_mcc_examples():
    assert mcc_multiclass([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.0)
    assert mcc_multiclass([0, 1, 2], [0, 1, 2]) == pytest.approx(1.0)
    assert mcc_multiclass([0, 0], [0, 0]) == 0.0
    assert majority_mapping([1, 1, 1, 0], [0, 0, 1, 1]).tolist() == [0, 0, 0, 1]


@pytest.mark.filterwarnings("ignore:A single label")
@settings(max_examples=100, deadline=None)
@given(partitions, st.data())
def test_metric_properties(a, data):
    b = data.draw(st.lists(st.integers(0, 3), min_size=len(a), max_size=len(a)))
    a, b = np.array(a), np.array(b)
    assert micro_f1(a, b) == pytest.approx(np.mean(a == b))
    p, m = purity(a, b), nmi(a, b)
    assert 0 <= p <= 1 and 0 <= m <= 1 + 1e-12
    perm = np.array([3, 0, 4, 1, 2])
    assert purity(perm[a], b) == pytest.approx(p)
    assert nmi(perm[a], b) == pytest.approx(m)
    assert nmi(a, b) == pytest.approx(nmi(b, a))
    # refining the clustering into singletons cannot reduce purity
    assert purity(np.arange(len(a)), b) == 1.0 >= p
    if len(np.unique(a)) > 1 or len(np.unique(b)) > 1:
        assert m == pytest.approx(normalized_mutual_info_score(b, a), abs=1e-10)
    assert mcc_multiclass(a, b) == pytest.approx(matthews_corrcoef(b, a), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=40))
def test_mcc_binary_reduction(pairs):
    pred, truth = np.array(pairs).T
    tp = np.sum((pred == 1) & (truth == 1))
    tn = np.sum((pred == 0) & (truth == 0))
    fp = np.sum((pred == 1) & (truth == 0))
    fn = np.sum((pred == 0) & (truth == 1))
    denom = np.sqrt(float((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)))
    expected = (tp * tn - fp * fn) / denom if denom else 0.0
    assert mcc_multiclass(pred, truth) == pytest.approx(expected, abs=1e-12)


def test_evaluate_protocols_on_separable_embedding():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1, 2], 40)
    E = np.eye(3)[y] * 5 + rng.normal(scale=0.1, size=(120, 3))
    labels = LabelSet.from_sequence(y)
    rep = evaluate_classification(E, labels, ratios=(0.1, 0.5), repetitions=3, seed=0)
    assert [r["train_ratio"] for r in rep["results"]] == [0.1, 0.5]
    assert all(r["micro_f1_mean"] == 1.0 for r in rep["results"])
    clus = evaluate_clustering(E, labels, seed=0)
    assert clus["purity"] == 1.0 and clus["nmi"] == pytest.approx(1.0) and clus["mcc"] == pytest.approx(1.0)
    assert evaluate_classification(E, labels, (0.3,), 2, seed=7) == evaluate_classification(E, labels, (0.3,), 2, seed=7)


def test_multilabel_clustering_uses_primary_and_drops_mcc():
    rng = np.random.default_rng(0)
    E = rng.normal(size=(20, 2))
    labels = LabelSet.from_sequence([(i % 2, 2) for i in range(20)])
    rep = evaluate_clustering(E, labels, seed=0)
    assert rep["mcc"] is None and rep["n_clusters"] == 3
