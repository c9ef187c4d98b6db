from __future__ import annotations

import random
from fractions import Fraction

import pytest

from treepack.cycle_machinery import (
    CycleDecompParams,
    WeightedSet,
    cycle_edges,
    decompose_long_cycles,
    fair_partition,
    find_hamilton_cycle,
    make_eulerian,
    seagull_decompose,
    verify_cycle_list,
    weight_partition,
)
from treepack.exceptions import PreconditionError
from treepack.graph_core import BipartitionView, SimpleGraph, complete_graph, gnp_graph, max_degree, remove_edges


def cycle_graph(n: int) -> SimpleGraph:
    return SimpleGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def two_triangles() -> SimpleGraph:
    return SimpleGraph.from_edges(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)])


def test_make_eulerian_on_eulerian_graph():
    G = cycle_graph(5)
    eulerian, removed = make_eulerian(G)
    assert removed == []
    assert eulerian == G


def test_make_eulerian_k4_drops_perfect_matching():
    eulerian, removed = make_eulerian(complete_graph(4))
    assert removed == [(0, 1), (2, 3)]
    assert eulerian.degrees() == [2, 2, 2, 2]


def test_make_eulerian_matches_adjacent_odd_pair():
    G = SimpleGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    _, removed = make_eulerian(G)
    assert removed == [(0, 2)]


def test_make_eulerian_pairs_non_adjacent_odd_vertices_by_path():
    G = remove_edges(complete_graph(5), [(0, 1)])
    eulerian, removed = make_eulerian(G)
    assert removed == [(0, 2), (1, 3), (2, 3)]
    assert all(d % 2 == 0 for d in eulerian.degrees())


def _check_make_eulerian(seed: int) -> None:
    G = gnp_graph(16, 0.7, seed)
    eulerian, removed = make_eulerian(G)
    assert all(d % 2 == 0 for d in eulerian.degrees())
    assert max_degree(removed) <= 3
    assert eulerian.edges | set(removed) == G.edges
    assert not eulerian.edges & set(removed)


@pytest.mark.parametrize("seed", range(6))
def test_make_eulerian_invariants(seed):
    _check_make_eulerian(seed)


@pytest.mark.slow
def test_make_eulerian_thousand_graphs():
    for seed in range(1000):
        _check_make_eulerian(seed)


def test_make_eulerian_needs_connected_graph():
    G = SimpleGraph.from_edges(8, [(0, 1), (1, 2), (0, 2), (0, 3), (4, 5), (5, 6), (4, 6), (4, 7)])
    with pytest.raises(PreconditionError):
        make_eulerian(G)


def test_fair_partition_trivial_cases():
    K6 = complete_graph(6)
    assert fair_partition(K6, range(6), 1) == [[0, 1, 2, 3, 4, 5]]
    assert fair_partition(K6, [], 3) == [[], [], []]
    with pytest.raises(PreconditionError):
        fair_partition(K6, range(5), 2)


def test_fair_partition_on_k20():
    G = complete_graph(20)
    parts = fair_partition(G, range(20), 2, slack=3, seed=4)
    assert [len(p) for p in parts] == [10, 10]
    assert sorted(parts[0] + parts[1]) == list(range(20))
    for v in range(20):
        for part in parts:
            assert len(G.neighbours(v) & set(part)) >= Fraction(19, 2) - 3


def test_fair_partition_sizes_are_even_and_close():
    parts = fair_partition(complete_graph(15), range(14), 3, slack=10, seed=1)
    sizes = [len(p) for p in parts]
    assert all(s % 2 == 0 for s in sizes)
    assert max(sizes) - min(sizes) <= 2


def test_find_hamilton_cycle():
    C5 = find_hamilton_cycle(cycle_graph(5), restarts=5, seed=0)
    assert sorted(C5) == list(range(5))
    assert verify_cycle_list(cycle_graph(5), [C5]) is None

    K5 = find_hamilton_cycle(complete_graph(5), restarts=5, seed=3)
    assert len(K5) == 5 and len(cycle_edges(K5)) == 5

    assert find_hamilton_cycle(two_triangles(), restarts=5, seed=0) is None


def test_decompose_k7_into_hamilton_cycles():
    result = decompose_long_cycles(complete_graph(7), CycleDecompParams(seed=0))
    assert result.iterations == 0
    assert result.gaps == (0,)
    assert len(result.cycles) == 3
    assert all(result.hamilton)
    assert result.leftover.m == 0


def test_decompose_irregular_graph_runs_the_gap_loop():
    G = remove_edges(complete_graph(11), [(0, 1), (1, 2), (2, 3), (0, 3)])
    result = decompose_long_cycles(G, CycleDecompParams(r=3, seed=2))
    assert result.iterations == 1
    assert result.gaps == (2, 0)
    assert [len(c) for c in result.cycles[:3]] == [9, 9, 11]
    assert result.hamilton[:3] == (False, False, True)
    assert result.checks["odd_lengths"]
    assert result.checks["shortest_non_hamilton"] >= result.checks["length_bound"]
    covered = {e for c in result.cycles for e in cycle_edges(c)}
    assert covered | result.leftover.edges == G.edges


@pytest.mark.slow
def test_decompose_thousand_near_complete_graphs():
    for seed in range(1000):
        rng = random.Random(seed)
        n = 11 + 2 * (seed % 3)
        a, b, c, d = rng.sample(range(n), 4)
        G = remove_edges(complete_graph(n), [(a, b), (b, c), (c, d), (d, a)])
        result = decompose_long_cycles(G, CycleDecompParams(r=3, seed=seed))
        assert all(x - y == 2 for x, y in zip(result.gaps, result.gaps[1:]))
        assert result.gaps[-1] == 0
        assert verify_cycle_list(G, list(result.cycles)) is None
        assert result.checks["odd_lengths"]
        assert result.checks["shortest_non_hamilton"] >= result.checks["length_bound"]


def test_decompose_rejects_bad_inputs():
    with pytest.raises(PreconditionError, match="odd number"):
        decompose_long_cycles(cycle_graph(6))
    with pytest.raises(PreconditionError, match="not Eulerian"):
        decompose_long_cycles(SimpleGraph.from_edges(5, [(0, 1), (1, 2)]))
    with pytest.raises(PreconditionError):
        CycleDecompParams(r=1)


def test_verify_cycle_list_reports_shared_edges():
    K5 = complete_graph(5)
    problem = verify_cycle_list(K5, [(0, 1, 2), (2, 1, 3)])
    assert problem == {"reason": "shared-edge", "cycles": [0, 1], "edge": [1, 2]}


def test_seagull_cases():
    star = SimpleGraph.from_edges(5, [(0, i) for i in range(1, 5)])
    flocks = seagull_decompose(BipartitionView(star, frozenset({1, 2, 3, 4}), frozenset({0})))
    assert flocks == [[(1, 0, 2)], [(3, 0, 4)]]

    assert seagull_decompose(BipartitionView(SimpleGraph.empty(2), frozenset({0}), frozenset({1}))) == []

    square = BipartitionView(cycle_graph(4), frozenset({0, 2}), frozenset({1, 3}))
    assert len(seagull_decompose(square)) == 2


def test_seagull_rejects_odd_b_vertex():
    view = BipartitionView(SimpleGraph.from_edges(2, [(0, 1)]), frozenset({0}), frozenset({1}))
    with pytest.raises(PreconditionError, match="vertex 1"):
        seagull_decompose(view)


def _check_seagulls(seed: int) -> None:
    rng = random.Random(seed)
    A = list(range(10))
    B = list(range(10, 18))
    edges = [(a, b) for b in B for a in rng.sample(A, 2 * rng.randint(0, 3))]
    view = BipartitionView(SimpleGraph.from_edges(18, edges), frozenset(A), frozenset(B))
    flocks = seagull_decompose(view)
    assert len(flocks) <= 3 * max(1, view.max_degree())
    covered = []
    for flock in flocks:
        touched = [v for gull in flock for v in gull]
        assert len(touched) == len(set(touched))
        for wing, centre, other in flock:
            assert wing in view.A and other in view.A and centre in view.B
            covered += [tuple(sorted((wing, centre))), tuple(sorted((other, centre)))]
    assert sorted(covered) == sorted(tuple(sorted(e)) for e in edges)


@pytest.mark.parametrize("seed", range(10))
def test_seagull_flocks_cover_edges(seed):
    _check_seagulls(seed)


@pytest.mark.slow
def test_seagull_thousand_bipartitions():
    for seed in range(1000):
        _check_seagulls(seed)


def test_weight_partition_cases():
    parts = weight_partition(WeightedSet.of([1, 1, 1, 1], 1, 2))
    assert parts == [[0, 2], [1, 3]]
    singletons = weight_partition(WeightedSet.of([0.5, 1, 0.25], 1, 3))
    assert sorted(map(len, singletons)) == [1, 1, 1]
    with pytest.raises(PreconditionError):
        weight_partition(WeightedSet.of([1, 1], 1, 3))


def _check_weight_partition(seed: int) -> None:
    rng = random.Random(seed)
    n = rng.randint(1, 40)
    m = rng.randint(1, n)
    weights = [Fraction(rng.randint(0, 100), 10) for _ in range(n)]
    ws = WeightedSet.of(weights, 10, m)
    parts = weight_partition(ws)
    assert sorted(i for p in parts for i in p) == list(range(n))
    total = sum(weights, Fraction(0))
    for part in parts:
        assert len(part) <= -(-2 * n // m)
        assert sum((weights[i] for i in part), Fraction(0)) <= 2 * total / m + 10


@pytest.mark.parametrize("seed", range(200))
def test_weight_partition_bounds(seed):
    _check_weight_partition(seed)


@pytest.mark.slow
def test_weight_partition_thousand_sets():
    for seed in range(1000):
        _check_weight_partition(seed)


def test_weight_outside_range_is_rejected():
    with pytest.raises(PreconditionError):
        WeightedSet.of([2], 1, 1)
