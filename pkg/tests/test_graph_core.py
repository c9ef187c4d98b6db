from __future__ import annotations

import random
from fractions import Fraction

import pytest

from treepack.exceptions import GraphFormatError, PreconditionError
from treepack.graph_core import (
    BipartitionView,
    MultiGraph,
    SimpleGraph,
    codegree_into,
    complete_graph,
    components,
    content_hash,
    degree_into,
    format_graph,
    gnp_graph,
    induced,
    max_degree,
    pair_density,
    parse_graph_text,
    random_regular_graph,
    read_graph,
    remove_edges,
)


def path_graph(n: int) -> SimpleGraph:
    return SimpleGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def test_pair_density_cases():
    K3 = complete_graph(3)
    assert pair_density(K3, range(3), range(3)) == Fraction(2, 3)
    assert pair_density(K3, {0, 1}, {1, 2}) == Fraction(3, 4)
    assert pair_density(path_graph(3), {0, 2}, {1}) == 1


def test_pair_density_rejects_empty_sets():
    with pytest.raises(PreconditionError):
        pair_density(complete_graph(3), set(), {0})


@pytest.mark.parametrize("seed", range(5))
def test_pair_density_is_symmetric_and_zero_on_singletons(seed):
    G = gnp_graph(9, 0.5, seed)
    rng = random.Random(seed)
    U = rng.sample(range(9), 4)
    V = rng.sample(range(9), 5)
    assert pair_density(G, U, V) == pair_density(G, V, U)
    assert all(pair_density(G, {v}, {v}) == 0 for v in range(9))


def test_degree_and_codegree():
    K4 = complete_graph(4)
    assert all(degree_into(K4, v, range(4)) == 3 for v in range(4))
    assert codegree_into(K4, 0, 3, range(4)) == 2
    assert codegree_into(path_graph(3), 0, 2) == 1
    star = SimpleGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    assert codegree_into(star, 1, 3) == 1
    with pytest.raises(PreconditionError):
        codegree_into(K4, 1, 1)


def test_handshake_for_simple_and_multigraphs():
    G = gnp_graph(12, 0.4, 3)
    assert sum(G.degrees()) == 2 * G.m
    M = MultiGraph.from_edges(4, [(0, 1), (1, 0), (1, 2), (2, 3), (2, 3), (2, 3)])
    assert M.multiplicity(0, 1) == 2
    assert M.m == 6
    assert sum(M.degrees()) == 2 * M.m


def test_remove_edges_and_induced():
    K4 = complete_graph(4)
    C4 = remove_edges(K4, [(0, 2), (1, 3)])
    assert C4.degrees() == [2, 2, 2, 2]
    assert induced(complete_graph(5), [4, 1, 2]) == complete_graph(3)
    assert max_degree([(0, 1), (2, 3), (4, 5)]) == 1
    with pytest.raises(PreconditionError):
        remove_edges(C4, [(0, 2)])


@pytest.mark.parametrize("seed", range(4))
def test_removal_matches_recount(seed):
    G = gnp_graph(10, 0.5, seed)
    rng = random.Random(seed)
    removed = rng.sample(sorted(G.edges), G.m // 3)
    H = remove_edges(G, removed)
    degrees = G.degrees()
    for u, v in removed:
        degrees[u] -= 1
        degrees[v] -= 1
    assert H.degrees() == degrees


def test_bipartition_view():
    K33 = SimpleGraph.from_edges(6, [(a, b) for a in range(3) for b in range(3, 6)])
    view = BipartitionView(K33, frozenset({0, 1, 2}), frozenset({3, 4, 5}))
    assert view.edge_count() == 9
    assert view.density() == 1
    with pytest.raises(PreconditionError):
        BipartitionView(K33, frozenset({0, 1}), frozenset({1, 2}))


def test_edge_bits_follow_canonical_order():
    K4 = complete_graph(4)
    assert K4.edge_list()[0] == (0, 1)
    assert K4.edge_bit(3, 2) == K4.m - 1
    assert K4.full_edge_mask == 0b111111


def test_components():
    G = SimpleGraph.from_edges(6, [(0, 1), (1, 2), (3, 4)])
    assert components(G) == [[0, 1, 2], [3, 4], [5]]


def test_random_regular_graph_is_regular():
    G = random_regular_graph(10, 4, 1)
    assert set(G.degrees()) == {4}
    with pytest.raises(PreconditionError):
        random_regular_graph(5, 3, 0)


@pytest.mark.parametrize("n,d", [(6, 3), (20, 3), (31, 4), (40, 0)])
def test_random_regular_graph_is_simple_and_seeded(n, d):
    G = random_regular_graph(n, d, 7)
    assert G.m == n * d // 2
    assert all(G.degree(v) == d for v in range(n))
    assert all(u != v for u, v in G.edge_list())
    assert random_regular_graph(n, d, 7) == G


def test_random_regular_graph_retry_limit():
    assert set(random_regular_graph(12, 5, 3, retries=200).degrees()) == {5}
    with pytest.raises(PreconditionError, match="retries"):
        random_regular_graph(10, 3, 0, retries=0)


def test_components_of_a_vertex_subset():
    G = SimpleGraph.from_edges(7, [(0, 1), (1, 2), (2, 3), (4, 5)])
    assert components(G, [0, 2, 3, 4, 5, 6]) == [[0], [2, 3], [4, 5], [6]]
    assert components(G, []) == []


def test_parse_graph_text():
    G = parse_graph_text("# comment\n3 2\n0 1\n\n1 2\n")
    assert G == path_graph(3)
    assert format_graph(G) == "3 2\n0 1\n1 2\n"
    M = parse_graph_text("2 2\n0 1\n1 0\n", multigraph=True)
    assert isinstance(M, MultiGraph)
    assert M.multiplicity(0, 1) == 2


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("3 1\n1 1\n", ":2: loop"),
        ("3 1\n0 3\n", ":2: vertex out of range"),
        ("3 2\n0 1\n1 0\n", ":3: repeated edge"),
        ("3 2\n0 1\n", "promises 2 edges"),
        ("3 1\n0 x\n", ":2: non-integer"),
        ("", "empty graph file"),
    ],
)
def test_parse_graph_text_errors(text, fragment):
    with pytest.raises(GraphFormatError, match=fragment):
        parse_graph_text(text)


def test_read_graph_and_hash(fixtures_dir):
    G = read_graph(fixtures_dir / "k3.graph")
    assert G == complete_graph(3)
    assert content_hash(G) == "7c0343f77a3c54a7b291511fde0fd472255dbdfd45e57dc93771a4b4e021c6ad"
    with pytest.raises(FileNotFoundError):
        read_graph(fixtures_dir / "missing.graph")
