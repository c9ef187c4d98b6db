from __future__ import annotations

import random
from itertools import permutations

import pytest

from treepack.exceptions import PreconditionError
from treepack.graph_core import SimpleGraph, canonical, complete_graph, gnp_graph
from treepack.packer import gl_instance, pack_exact, ringel_instances, verify_certificate
from treepack.tree_tools import RootedForest, gen_random_tree


def path_tree(n: int) -> RootedForest:
    return RootedForest.from_edges(n, [(i, i + 1) for i in range(n - 1)], [0])


def brute_force(G: SimpleGraph, trees: dict[int, RootedForest]) -> bool:
    """全単射の総当たり。"""

    family = list(trees.values())

    def go(k: int, free: frozenset) -> bool:
        if k == len(family):
            return True
        T = family[k]
        for image in permutations(range(G.n), T.n):
            edges = frozenset(canonical(image[u], image[v]) for u, v in T.edge_list())
            if edges <= free and go(k + 1, free - edges):
                return True
        return False

    return go(0, frozenset(G.edges))


def test_k3_gl_instance():
    G, trees = gl_instance(3, 0)
    outcome = pack_exact(G, trees)
    assert outcome.found
    assert outcome.certificate.mode == "decompose"
    assert verify_certificate(G, trees, outcome.certificate).ok


def test_edge_count_mismatch_is_immediate():
    outcome = pack_exact(complete_graph(4), [path_tree(2)] * 3)
    assert outcome.status == "infeasible"
    assert outcome.reason == "edge-count"
    assert outcome.nodes == 0
    assert outcome.to_dict() == {"status": "infeasible", "nodes": 0, "reason": "edge-count"}


def test_tree_larger_than_host():
    outcome = pack_exact(complete_graph(4), [path_tree(5)], mode="pack")
    assert outcome.reason == "order"


def test_exhaustive_infeasibility():
    star = SimpleGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    outcome = pack_exact(star, [path_tree(4)])
    assert outcome.status == "infeasible"
    assert outcome.reason == "exhaustive"
    assert outcome.nodes > 0


def test_budget_is_reported():
    G, trees = gl_instance(6, 0)
    outcome = pack_exact(G, trees, budget=1)
    assert outcome.status == "exhausted"
    assert outcome.certificate is None


def test_pack_mode_leaves_edges():
    outcome = pack_exact(complete_graph(4), [path_tree(2)] * 3, mode="pack")
    assert outcome.found
    assert outcome.certificate.mode == "pack"
    assert outcome.certificate.as_dict() == {1: (0, 1), 2: (0, 2), 3: (0, 3)}


def test_bad_mode():
    with pytest.raises(PreconditionError):
        pack_exact(complete_graph(3), [], mode="cover")


def test_empty_family():
    outcome = pack_exact(SimpleGraph.empty(3), {})
    assert outcome.found
    assert outcome.certificate.assignments == ()


@pytest.mark.parametrize("seed", range(6))
def test_gl_sequences_of_order_six(seed):
    G, trees = gl_instance(6, seed)
    outcome = pack_exact(G, trees)
    assert outcome.found
    assert verify_certificate(G, trees, outcome.certificate).ok


def test_ringel_order_two():
    ((_, G, trees),) = ringel_instances(2)
    assert len(trees) == 5
    outcome = pack_exact(G, trees)
    assert outcome.found
    assert verify_certificate(G, trees, outcome.certificate).ok


@pytest.mark.parametrize("seed", range(40))
def test_agrees_with_brute_force(seed):
    rng = random.Random(seed)
    n = rng.choice([4, 5])
    G = gnp_graph(n, 0.6, seed)
    trees: dict[int, RootedForest] = {}
    remaining = G.m
    while remaining:
        k = rng.randint(1, min(n - 1, remaining))
        trees[len(trees) + 1] = gen_random_tree(k + 1, 4, seed * 100 + len(trees))
        remaining -= k
    if rng.random() < 0.3:
        trees[len(trees) + 1] = RootedForest.from_edges(1, [], [0])
    outcome = pack_exact(G, trees)
    assert outcome.status in {"found", "infeasible"}
    assert outcome.found == brute_force(G, trees)
    if outcome.found:
        assert verify_certificate(G, trees, outcome.certificate).ok


def test_forest_with_two_components():
    forest = RootedForest.from_edges(4, [(0, 1), (2, 3)], [0, 2])
    outcome = pack_exact(complete_graph(4), {1: forest, 2: path_tree(3), 3: path_tree(3)})
    assert outcome.found
    assert verify_certificate(complete_graph(4), {1: forest, 2: path_tree(3), 3: path_tree(3)}, outcome.certificate).ok


@pytest.mark.slow
def test_ringel_order_three():
    for _, G, trees in ringel_instances(3):
        outcome = pack_exact(G, trees)
        assert outcome.found
        assert verify_certificate(G, trees, outcome.certificate).ok
