from __future__ import annotations

import pytest

from treepack.covering import (
    ExceptionalCover,
    ReservedTree,
    complete_embedding,
    cover_exceptional_vertex,
    cover_matching_with_tree,
    cover_seagulls_with_tree,
    fix_parity_with_tree,
)
from treepack.exceptions import ConstructionFailure, PreconditionError
from treepack.graph_core import SimpleGraph, complete_graph
from treepack.tree_tools import RootedForest
from treepack.walk_embedder import verify_embedding


def path_tree(n: int) -> RootedForest:
    return RootedForest.from_edges(n, [(i, i + 1) for i in range(n - 1)], [0])


def spider() -> RootedForest:
    return RootedForest.from_edges(10, [(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6), (0, 7), (7, 8), (8, 9)], [0])


def hub_host() -> SimpleGraph:
    # A = 0..18 は完全、例外頂点 19 は 0..5 とだけ隣接
    edges = [(u, v) for u in range(19) for v in range(u + 1, 19)] + [(i, 19) for i in range(6)]
    return SimpleGraph.from_edges(20, edges)


def test_empty_matching_is_a_plain_embedding():
    embedding = cover_matching_with_tree(ReservedTree(path_tree(4)), complete_graph(12), [], range(10))
    assert dict(embedding.items()) == {0: 0, 1: 1, 2: 2, 3: 3}


def test_matching_edge_lands_in_the_middle_of_a_path():
    T = path_tree(9)
    G = complete_graph(12)
    embedding = cover_matching_with_tree(ReservedTree(T), G, [(10, 11)], range(10))
    assert (10, 11) in embedding.image_edges(T)
    assert embedding[4] == 10 and embedding[5] == 11
    assert all(w < 10 for v, w in embedding.items() if v not in (4, 5))
    assert verify_embedding(T, G, embedding) is None


def test_matching_beyond_capacity_fails():
    with pytest.raises(ConstructionFailure) as info:
        cover_matching_with_tree(ReservedTree(path_tree(9)), complete_graph(14), [(10, 11), (12, 13)], range(10))
    assert info.value.details == {"needed": 2, "available": 1}


def test_matching_preconditions():
    G = complete_graph(12)
    with pytest.raises(PreconditionError, match="safe region"):
        cover_matching_with_tree(ReservedTree(path_tree(9)), G, [(9, 10)], range(10))
    with pytest.raises(PreconditionError, match="root image"):
        cover_matching_with_tree(ReservedTree(path_tree(9), {0: 11}), G, [], range(10))
    with pytest.raises(PreconditionError, match="not a root"):
        cover_matching_with_tree(ReservedTree(path_tree(9), {3: 1}), G, [], range(10))


def test_root_image_is_respected():
    embedding = cover_matching_with_tree(ReservedTree(path_tree(4), {0: 7}), complete_graph(12), [], range(10))
    assert embedding[0] == 7
    assert embedding.is_injective()


def test_seagull_on_a_degree_two_vertex():
    T = path_tree(11)
    G = complete_graph(14)
    (embedding,) = cover_seagulls_with_tree(ReservedTree(T), G, [(0, 12, 1)], range(12))
    assert embedding[4] == 12
    assert {embedding[3], embedding[5]} == {0, 1}
    assert {(0, 12), (1, 12)} <= set(embedding.image_edges(T))
    assert [v for v, w in embedding.items() if w >= 12] == [4]


def test_empty_flock_is_a_plain_embedding():
    (embedding,) = cover_seagulls_with_tree(ReservedTree(path_tree(5)), complete_graph(8), [], range(8))
    assert dict(embedding.items()) == {i: i for i in range(5)}


def test_flock_beyond_capacity_fails():
    flock = [(0, 12, 1), (2, 13, 3), (4, 14, 5)]
    with pytest.raises(ConstructionFailure, match="degree-2"):
        cover_seagulls_with_tree(ReservedTree(path_tree(11)), complete_graph(16), flock, range(12))


def test_flock_preconditions():
    G = complete_graph(14)
    with pytest.raises(PreconditionError, match="centre"):
        cover_seagulls_with_tree(ReservedTree(path_tree(11)), G, [(0, 5, 1)], range(12))
    with pytest.raises(PreconditionError, match="vertex-disjoint"):
        cover_seagulls_with_tree(ReservedTree(path_tree(11)), G, [(0, 12, 1), (1, 13, 2)], range(12))


def test_seagull_by_leaves_of_two_trees():
    pair = (ReservedTree(spider()), ReservedTree(spider()))
    G = complete_graph(14)
    first, second = cover_seagulls_with_tree(pair, G, [(0, 12, 1)], range(12))
    assert (first[2], first[3]) == (0, 12)
    assert (second[2], second[3]) == (1, 12)
    assert not set(first.image_edges(spider())) & set(second.image_edges(spider()))
    assert verify_embedding(spider(), G, second) is None


def test_parity_leaf_goes_to_the_far_end():
    T = path_tree(6)
    embedding = fix_parity_with_tree(ReservedTree(T), complete_graph(10), (0, 9), range(9))
    assert embedding[5] == 9 and embedding[4] == 0
    crossing = [e for e in embedding.image_edges(T) if 9 in e]
    assert crossing == [(0, 9)]


def test_parity_needs_a_far_leaf():
    star = RootedForest.from_edges(5, [(0, i) for i in range(1, 5)], [0])
    with pytest.raises(PreconditionError, match="distance >= 4"):
        fix_parity_with_tree(ReservedTree(star), complete_graph(10), (0, 9), range(9))
    with pytest.raises(PreconditionError, match="safe region"):
        fix_parity_with_tree(ReservedTree(path_tree(6)), complete_graph(10), (9, 0), range(9))


def test_exceptional_vertex_is_drained():
    G = hub_host()
    forests = [ReservedTree(path_tree(5), {0: 10 + i}) for i in range(3)]
    cover = cover_exceptional_vertex(forests, G, 19, range(19))
    assert cover.residual == 0
    assert cover.consumed == (2, 2, 2)
    assert [index for index, _ in cover.embeddings] == [0, 1, 2]
    used: set = set()
    for index, embedding in cover.embeddings:
        edges = set(embedding.image_edges(forests[index].tree))
        assert not used & edges
        used |= edges
        assert embedding[2] == 19
    assert {e for e in used if 19 in e} == {(i, 19) for i in range(6)}


def test_exceptional_vertex_without_edges():
    G = SimpleGraph.from_edges(6, [(0, 1), (1, 2)])
    cover = cover_exceptional_vertex([ReservedTree(path_tree(5))], G, 5, range(5))
    assert cover == ExceptionalCover((), 0, (), ())


def test_exceptional_vertex_skips_forbidden_forest():
    G = hub_host()
    forests = [ReservedTree(path_tree(5), {0: 10 + i}, frozenset({19}) if i == 0 else frozenset()) for i in range(3)]
    cover = cover_exceptional_vertex(forests, G, 19, range(19))
    assert cover.skipped == (0,)
    assert cover.consumed == (2, 2)
    assert cover.residual == 2


def test_exceptional_vertex_two_component_forest():
    G = hub_host()
    forest = RootedForest.from_edges(10, [(i, i + 1) for i in range(4)] + [(i, i + 1) for i in range(5, 9)], [0, 5])
    reserved = ReservedTree(forest, {0: 10, 5: 11})
    cover = cover_exceptional_vertex([reserved], G, 19, range(19))
    assert cover.consumed == (2,)
    assert cover.residual == 4
    (_, embedding), = cover.embeddings
    assert embedding[0] == 10 and embedding[5] == 11 and embedding[2] == 19
    assert verify_embedding(forest, G, embedding) is None


def test_exceptional_vertex_rejects_three_components():
    forest = RootedForest.from_edges(9, [(0, 1), (1, 2), (3, 4), (4, 5), (6, 7), (7, 8)], [0, 3, 6])
    with pytest.raises(PreconditionError, match="two components"):
        cover_exceptional_vertex([ReservedTree(forest)], hub_host(), 19, range(19))


def test_complete_embedding_reports_dead_end():
    T = path_tree(4)
    G = SimpleGraph.from_edges(5, [(0, 1), (1, 2)])
    with pytest.raises(ConstructionFailure) as info:
        complete_embedding(T, G, {}, range(5), attempts=2)
    assert info.value.details["pins"] == 0


def test_leaf_matching_finds_the_only_hub():
    star = RootedForest.from_edges(4, [(0, 1), (0, 2), (0, 3)], [0])
    G = SimpleGraph.from_edges(6, [(3, 0), (3, 1), (3, 2), (0, 1), (4, 5)])
    embedding = complete_embedding(star, G, {}, range(6), seed=5, match_leaves=True)
    assert embedding[0] == 3
    assert {embedding[v] for v in (1, 2, 3)} == {0, 1, 2}


def test_leaf_matching_spans_the_host():
    spider = RootedForest.from_edges(7, [(0, 1), (1, 2), (0, 3), (3, 4), (0, 5), (5, 6)], [0])
    G = complete_graph(7)
    for seed in range(10):
        embedding = complete_embedding(spider, G, {2: 6}, range(7), seed=seed, match_leaves=True)
        assert embedding[2] == 6
        assert sorted(embedding.mapping.values()) == list(range(7))
        assert verify_embedding(spider, G, embedding) is None


def test_leaf_matching_reports_dead_end():
    with pytest.raises(ConstructionFailure, match="after resampling") as info:
        complete_embedding(path_tree(4), SimpleGraph.from_edges(5, [(0, 1), (1, 2)]), {}, range(5), match_leaves=True)
    assert info.value.details["pins"] == 0
