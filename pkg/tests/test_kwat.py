import itertools

import numpy as np
import pytest

from bigrw.graph import from_arrays, from_edge_list
from bigrw.kwat import (
    backward_distribution, exact_objective, forward_distribution, hop_weights, kwat_matrix,
    kwat_proximity, transition_matrix,
)
from bigrw.model import ModelParams

from conftest import random_graph


@pytest.mark.parametrize("k,alpha,expected", [
    (3, 1.0, [1 / 3, 1 / 3, 1 / 3]),
    (2, 2.0, [1 / 3, 2 / 3]),
    (2, 0.5, [2 / 3, 1 / 3]),
])
def test_hop_weights_examples(k, alpha, expected):
    np.testing.assert_allclose(hop_weights(k, alpha), expected, rtol=1e-14)


@pytest.mark.parametrize("k,alpha", [(0, 1.0), (2, 0.0), (2, -1.0)])
def test_hop_weights_rejects(k, alpha):
    with pytest.raises(ValueError):
        hop_weights(k, alpha)


@pytest.mark.parametrize("k,alpha", list(itertools.product(range(1, 9), [0.25, 0.5, 1, 2, 4])))
def test_hop_weights_grid(k, alpha):
    w = hop_weights(k, alpha)
    assert abs(w.sum() - 1) < 1e-12
    assert np.all(w > 0)
    d = np.diff(w)
    if k > 1 and alpha > 1:
        assert np.all(d > 0)
    if k > 1 and alpha < 1:
        assert np.all(d < 0)


def test_transition_matrix_examples(triangle, chain):
    np.testing.assert_array_equal(transition_matrix(triangle), 0.5 * (1 - np.eye(3)))
    np.testing.assert_array_equal(transition_matrix(chain), [[0, 1, 0], [0, 0, 1], [0, 0, 0]])
    star = from_edge_list([(0, 1, 1.0), (0, 2, 3.0)], directed=True)
    np.testing.assert_array_equal(transition_matrix(star)[0], [0, 0.25, 0.75])
    with pytest.raises(MemoryError):
        transition_matrix(triangle, max_nodes=2)


def test_kwat_triangle_hand_oracle(triangle):
    # A^2 has 0.5 on the diagonal and 0.25 elsewhere; W = (A + A^2) / 2
    w = kwat_matrix(triangle, 2, 1.0).values
    np.testing.assert_allclose(np.diag(w), 0.25)
    np.testing.assert_allclose(w[~np.eye(3, dtype=bool)], 0.375)
    np.testing.assert_allclose(forward_distribution(kwat_matrix(triangle, 2, 1.0), 0), [0.25, 0.375, 0.375])


def test_kwat_k1_is_transition_matrix():
    g = random_graph(8, 3, np.random.default_rng(0))
    for alpha in (0.3, 1.0, 5.0):
        np.testing.assert_array_equal(kwat_matrix(g, 1, alpha).values, transition_matrix(g))


def test_kwat_chain(chain):
    w = kwat_matrix(chain, 2, 1.0)
    np.testing.assert_allclose(w.values[0], [0, 0.5, 0.5])
    assert backward_distribution(kwat_matrix(chain, 1, 1.0), 2).tolist() == [0, 1, 0]
    with pytest.raises(ValueError):
        forward_distribution(w, 2)
    with pytest.raises(ValueError):
        backward_distribution(w, 0)


def test_kwat_against_explicit_powers():
    g = random_graph(9, 3, np.random.default_rng(4))
    a = transition_matrix(g)
    k, alpha = 4, 1.5
    w = sum(alpha**l * np.linalg.matrix_power(a, l) for l in range(1, k + 1)) / sum(alpha**l for l in range(1, k + 1))
    np.testing.assert_allclose(kwat_matrix(g, k, alpha).values, w, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_rows_stochastic_and_nonnegative(seed):
    g = random_graph(12, 3, np.random.default_rng(seed))
    w = kwat_matrix(g, 5, 1.25).values
    assert np.all(w >= 0)
    np.testing.assert_allclose(w.sum(axis=1), 1, atol=1e-9)


def test_small_alpha_concentrates_on_one_hop():
    g = random_graph(10, 3, np.random.default_rng(1))
    a = transition_matrix(g)
    # |W - A| <= sum_{l>=2} w_l * |A^l - A| <= 2 * (1 - w_1) entrywise, and 1 - w_1 ~ alpha
    for alpha in (1e-4, 1e-7):
        w1 = hop_weights(4, alpha)[0]
        dev = np.abs(kwat_matrix(g, 4, alpha).values - a).max()
        assert dev <= 2 * (1 - w1) + 1e-15
    assert dev < 1e-6


def test_regular_undirected_forward_equals_backward():
    # 4-cycle: A symmetric and doubly stochastic
    g = from_edge_list([(0, 1), (1, 2), (2, 3), (3, 0)], directed=False)
    w = kwat_matrix(g, 3, 0.7)
    for i in range(4):
        np.testing.assert_allclose(forward_distribution(w, i), backward_distribution(w, i), atol=1e-15)


def test_asymmetry_witness():
    g = from_edge_list([("a", "b"), ("b", "c"), ("c", "a"), ("a", "c")], directed=True)
    w = kwat_matrix(g, 2, 1.0)
    a = g.index_of("a")
    assert not np.allclose(forward_distribution(w, a), backward_distribution(w, a))


def test_asymmetry_on_chain(chain):
    w = kwat_matrix(chain, 2, 1.0)
    b = chain.index_of("b")
    # b reaches only c; only a reaches b
    assert forward_distribution(w, b).tolist() == [0, 0, 1]
    assert backward_distribution(w, b).tolist() == [1, 0, 0]


def test_proximity_examples():
    assert kwat_proximity([0.2, 0.8], [0.2, 0.8]) == pytest.approx(1.0)
    assert kwat_proximity([1, 0, 0], [0, 0.5, 0.5]) == 0.0
    assert kwat_proximity([0.5, 0.5, 0], [0.5, 0, 0.5]) == pytest.approx(0.5)


def _zero_params(n, d=4):
    return ModelParams(np.zeros((n, d)), T_f=np.zeros((n, d)), T_b=np.zeros((n, d)))


def test_objective_zero_params_is_n_log_n(triangle):
    for direction in ("forward", "backward"):
        assert exact_objective(triangle, 2, 1.0, _zero_params(3), direction) == pytest.approx(3 * np.log(3))


def test_objective_single_node_self_loop():
    g = from_edge_list([(0, 0)])
    rng = np.random.default_rng(0)
    p = ModelParams(rng.normal(size=(1, 3)), T_f=rng.normal(size=(1, 3)), T_b=rng.normal(size=(1, 3)))
    assert exact_objective(g, 3, 1.0, p) == pytest.approx(0.0, abs=1e-15)


def _double_loop_objective(g, k, alpha, p, direction):
    """Brute-force re-evaluation: explicit powers, explicit softmax, explicit sums."""
    n = g.node_count
    a = np.zeros((n, n))
    for u, v, w in g.arcs():
        a[u, v] += w
    a = a / a.sum(axis=1, keepdims=True)
    weights = [alpha**l for l in range(1, k + 1)]
    W = sum(w * np.linalg.matrix_power(a, l) for l, w in enumerate(weights, 1)) / sum(weights)
    T = p.T_f if direction == "forward" else p.T_b
    total = 0.0
    for i in range(n):
        target = W[i] / W[i].sum() if direction == "forward" else W[:, i] / W[:, i].sum()
        scores = [float(np.dot(p.S[i], T[j])) for j in range(n)]
        z = np.log(sum(np.exp(s) for s in scores))
        for j in range(n):
            total -= target[j] * (scores[j] - z)
    return total


@pytest.mark.parametrize("seed", range(3))
def test_objective_matches_double_loop(triangle, seed):
    rng = np.random.default_rng(seed)
    p = ModelParams(rng.normal(size=(3, 5)), T_f=rng.normal(size=(3, 5)), T_b=rng.normal(size=(3, 5)))
    g2 = random_graph(7, 3, rng)
    p2 = ModelParams(rng.normal(size=(7, 5)), T_f=rng.normal(size=(7, 5)), T_b=rng.normal(size=(7, 5)))
    for direction in ("forward", "backward"):
        assert exact_objective(triangle, 2, 1.0, p, direction) == pytest.approx(
            _double_loop_objective(triangle, 2, 1.0, p, direction), rel=1e-12)
        assert exact_objective(g2, 3, 0.8, p2, direction) == pytest.approx(
            _double_loop_objective(g2, 3, 0.8, p2, direction), rel=1e-12)


def test_objective_permutation_invariance():
    rng = np.random.default_rng(5)
    g = random_graph(8, 3, rng)
    p = ModelParams(rng.normal(size=(8, 4)), T_f=rng.normal(size=(8, 4)), T_b=rng.normal(size=(8, 4)))
    perm = rng.permutation(8)
    inv = np.argsort(perm)
    src, dst, w = zip(*g.arcs())
    gp = from_arrays(8, inv[list(src)], inv[list(dst)], np.array(w), directed=True)
    pp = ModelParams(p.S[perm], T_f=p.T_f[perm], T_b=p.T_b[perm])
    for direction in ("forward", "backward"):
        assert exact_objective(gp, 3, 1.3, pp, direction) == pytest.approx(
            exact_objective(g, 3, 1.3, p, direction), rel=1e-12)


def test_objective_dimension_mismatch(triangle):
    with pytest.raises(ValueError):
        exact_objective(triangle, 2, 1.0, _zero_params(4))
