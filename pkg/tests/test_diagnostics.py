from __future__ import annotations

import random
from fractions import Fraction

import pytest

from treepack.diagnostics import (
    FAIL,
    NO_COUNTEREXAMPLE,
    PASS,
    DenseParams,
    ExpanderParams,
    QuasiRandomParams,
    RegularityParams,
    check_dense,
    check_k_independent,
    check_quasi_random,
    check_regular_pair,
    check_robust_expander,
    greedy_k_independent_matching,
    greedy_k_independent_set,
    robust_neighbourhood,
)
from treepack.exceptions import PreconditionError
from treepack.graph_core import BipartitionView, SimpleGraph, complete_graph, gnp_graph


def path_graph(n: int) -> SimpleGraph:
    return SimpleGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> SimpleGraph:
    return SimpleGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def test_quasi_random_cases():
    K6 = complete_graph(6)
    assert check_quasi_random(K6, QuasiRandomParams(0.4, 1)).verdict == PASS
    report = check_quasi_random(K6, QuasiRandomParams(0.2, 1))
    assert report.verdict == FAIL
    assert report.witness["pair"] == [0, 1]
    assert report.witness["codegree"] == 4
    assert check_quasi_random(SimpleGraph.empty(5), QuasiRandomParams(0.3, 0)).verdict == PASS


@pytest.mark.parametrize("n", range(4, 41))
def test_complete_graph_threshold_is_two_over_n(n):
    K = complete_graph(n)
    assert check_quasi_random(K, QuasiRandomParams(Fraction(2, n), 1)).passed
    assert not check_quasi_random(K, QuasiRandomParams(Fraction(2, n) - Fraction(1, 10**6), 1)).passed


@pytest.mark.parametrize("seed", range(6))
def test_quasi_random_is_monotone_in_epsilon(seed):
    G = gnp_graph(14, 0.5, seed)
    verdicts = [check_quasi_random(G, QuasiRandomParams(eps, 0.5)).passed for eps in (0.2, 0.4, 0.6, 0.8, 1.0)]
    assert verdicts == sorted(verdicts)


def test_dense_cases():
    K4 = complete_graph(4)
    assert check_dense(K4, DenseParams(0.5, 0)).verdict == PASS
    report = check_dense(K4, DenseParams(0.5, 0.5))
    assert report.verdict == PASS
    assert report.statistic == "1/2"
    failed = check_dense(K4, DenseParams(0.5, 0.6))
    assert failed.verdict == FAIL
    assert failed.mode == "exhaustive"
    assert failed.witness == {"U": [0, 1], "V": [0, 1], "density": "1/2"}


def test_dense_sampled_mode_never_claims_pass():
    report = check_dense(complete_graph(14), DenseParams(0.5, 0.5), trials=50, seed=1)
    assert report.mode == "sampled"
    assert report.verdict == NO_COUNTEREXAMPLE
    assert report.samples == 50


def test_regular_pair_cases():
    K33 = SimpleGraph.from_edges(6, [(a, b) for a in range(3) for b in range(3, 6)])
    view = BipartitionView(K33, frozenset({0, 1, 2}), frozenset({3, 4, 5}))
    assert check_regular_pair(view, RegularityParams(0.1, 1)).verdict == PASS
    assert check_regular_pair(view, RegularityParams(0.1, 1, super_regular=True)).verdict == PASS

    empty = BipartitionView(SimpleGraph.empty(6), frozenset({0, 1, 2}), frozenset({3, 4, 5}))
    assert check_regular_pair(empty, RegularityParams(0.1, 0)).verdict == PASS


def test_regular_pair_on_six_cycle():
    C6 = BipartitionView(cycle_graph(6), frozenset({0, 2, 4}), frozenset({1, 3, 5}))
    # 2x2 の部分ペアは辺 2 本か 3 本なので、密度は 1/2 .. 3/4 に収まる
    report = check_regular_pair(C6, RegularityParams(0.5, Fraction(1, 3)))
    assert report.verdict == PASS
    assert report.mode == "exhaustive"

    strict = check_regular_pair(C6, RegularityParams(0.1, Fraction(2, 3)))
    assert strict.verdict == FAIL
    assert "A_prime" in strict.witness

    irregular = check_regular_pair(C6, RegularityParams(0.1, 1, super_regular=True))
    assert irregular.verdict == FAIL
    assert irregular.witness["degree"] == 2


def test_robust_neighbourhood_cases():
    K5 = complete_graph(5)
    assert robust_neighbourhood(K5, set(), 0.2) == frozenset()
    assert robust_neighbourhood(K5, {0, 1}, 0.2) == frozenset(range(5))
    assert robust_neighbourhood(path_graph(3), {1}, Fraction(1, 3)) == frozenset({0, 2})


@pytest.mark.parametrize("seed", range(5))
def test_robust_neighbourhood_is_monotone(seed):
    G = gnp_graph(12, 0.4, seed)
    rng = random.Random(seed)
    S = set(rng.sample(range(12), 4))
    bigger = S | set(rng.sample(range(12), 3))
    assert robust_neighbourhood(G, S, 0.1) <= robust_neighbourhood(G, bigger, 0.1)


def test_robust_expander_cases():
    assert check_robust_expander(complete_graph(5), ExpanderParams(0.2, 0.3)).verdict == PASS

    two_triangles = SimpleGraph.from_edges(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)])
    report = check_robust_expander(two_triangles, ExpanderParams(0.1, 0.3))
    assert report.verdict == FAIL
    assert report.witness["S"] == [0, 1, 2]

    vacuous = check_robust_expander(complete_graph(2), ExpanderParams(0.1, 0.6))
    assert vacuous.verdict == PASS
    assert vacuous.samples == 0


def test_params_validation():
    with pytest.raises(PreconditionError):
        QuasiRandomParams(0, 0.5)
    with pytest.raises(PreconditionError):
        DenseParams(1, 0.5)
    with pytest.raises(PreconditionError):
        ExpanderParams(0.5, 0.3)


def test_greedy_k_independent_set():
    P7 = path_graph(7)
    assert greedy_k_independent_set(P7, 3) == frozenset({0, 3, 6})
    assert greedy_k_independent_set(P7, 3, X={4}, Z={4}) == frozenset({4})
    assert greedy_k_independent_set(SimpleGraph.empty(5), 4, Z={1, 2, 3}) == frozenset({1, 2, 3})
    with pytest.raises(PreconditionError, match="vertices 0 and 1"):
        greedy_k_independent_set(P7, 2, X={0, 1})


@pytest.mark.parametrize("seed", range(5))
def test_greedy_set_meets_size_bound(seed):
    G = gnp_graph(20, 0.15, seed)
    k = 2
    Y = greedy_k_independent_set(G, k)
    assert check_k_independent(G, Y, k) is None
    assert len(Y) * max(1, G.max_degree()) ** k >= G.n


def test_greedy_k_independent_matching():
    assert greedy_k_independent_matching(path_graph(2), 3) == [(0, 1)]
    assert greedy_k_independent_matching(path_graph(7), 2) == [(0, 1), (3, 4)]
    assert greedy_k_independent_matching(complete_graph(4), 2) == [(0, 1)]
    with pytest.raises(PreconditionError):
        greedy_k_independent_matching(SimpleGraph.empty(3), 2)
