"""吸収器: 葉を1枚ずつ抜いた予約木を最終段へ固定しておき、最後の残り辺を葉で吸い取る。"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from ..covering import complete_embedding
from ..exceptions import ConstructionFailure, InfeasibleError, PreconditionError
from ..graph_core import Edge, SimpleGraph, canonical, induced
from ..orientation import OrientParams, orient_out_regular
from ..settings import pick
from ..tree_tools import RootedForest
from ..walk_embedder import PartialEmbedding, verify_embedding


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AbsorberEntry:
    """葉 leaf を抜いた木。anchor (葉の隣) を anchor_image に固定して埋め込み済み。"""

    tree_id: int
    tree: RootedForest
    leaf: int
    anchor: int
    anchor_image: int
    body: Mapping[int, int]

    def body_edges(self) -> list[Edge]:
        return sorted(
            canonical(self.body[u], self.body[v])
            for u, v in self.tree.edge_list()
            if u != self.leaf and v != self.leaf
        )


@dataclass(frozen=True)
class AbsorberState:
    t_last: int
    A_last: frozenset[int]
    entries: tuple[AbsorberEntry, ...] = ()
    used_edges: frozenset[Edge] = frozenset()
    skipped: tuple[int, ...] = ()

    def anchors_at(self, v: int) -> list[AbsorberEntry]:
        return [e for e in self.entries if e.anchor_image == v]

    def multiplicity(self) -> Counter[int]:
        return Counter(e.anchor_image for e in self.entries)

    def summary(self) -> dict[str, Any]:
        return {
            "t_last": self.t_last,
            "A_last": len(self.A_last),
            "trees": len(self.entries),
            "body_edges": len(self.used_edges),
            "skipped": list(self.skipped),
        }


def _audit(state: AbsorberState) -> None:
    counts = state.multiplicity()
    if sum(counts.values()) != state.t_last * len(state.A_last):
        raise ConstructionFailure(
            "absorber anchor count differs from t_last * |A_last|",
            {"anchors": sum(counts.values()), "expected": state.t_last * len(state.A_last)},
        )
    bad = sorted(v for v in state.A_last if counts.get(v, 0) != state.t_last)
    stray = sorted(set(counts) - state.A_last)
    if bad or stray:
        raise ConstructionFailure(
            "absorber anchor multiplicity is uneven",
            {"vertex": (bad or stray)[0], "count": counts.get((bad or stray)[0], 0), "t_last": state.t_last},
        )


def _choose_leaf(T: RootedForest) -> tuple[int, int] | None:
    if len(T.roots) != 1 or T.n < 2:
        return None
    leaf = max(T.leaves(), key=lambda v: (T.depth(v), v))
    (anchor,) = T.neighbours(leaf)
    return leaf, anchor


def _body(T: RootedForest, leaf: int, anchor: int) -> tuple[RootedForest, list[int]]:
    """T − leaf を 0.. に付け替えたもの (anchor が根) と、新番号 → 元番号の表。"""

    keep = [v for v in range(T.n) if v != leaf]
    position = {v: i for i, v in enumerate(keep)}
    edges = [(position[u], position[v]) for u, v in T.edge_list() if leaf not in (u, v)]
    return RootedForest.from_edges(len(keep), edges, [position[anchor]]), keep


def prepare_absorber(
    G_avail: SimpleGraph,
    trees: Sequence[tuple[int, RootedForest]],
    A_last: Iterable[int],
    t_last: int,
    seed: int = 0,
    outside: Iterable[int] | None = None,
    retries: int | None = None,
) -> AbsorberState:
    """t_last·|A_last| 本の木を選び、葉を抜いた残りを anchor → v* (A_last を巡回) で埋め込みます。

    anchor 以外は A_last の外 (outside を与えればその中) に置く。頂点1個の木は選ばない。
    """

    A = frozenset(A_last)
    if t_last < 0:
        raise PreconditionError(f"t_last must be >= 0, got {t_last}")
    needed = t_last * len(A)
    if needed == 0:
        return AbsorberState(t_last, A)
    region = frozenset(range(G_avail.n)) - A if outside is None else frozenset(outside) - A

    selected: list[tuple[int, RootedForest, int, int]] = []
    skipped: list[int] = []
    for tree_id, T in trees:
        if len(selected) == needed:
            break
        choice = _choose_leaf(T)
        if choice is None:
            skipped.append(tree_id)
            continue
        selected.append((tree_id, T, *choice))
    if len(selected) < needed:
        raise PreconditionError(f"absorber needs {needed} trees with a leaf, got {len(selected)}")

    anchors = sorted(A)
    limit = pick(retries, "packer", "absorber_retries")
    available = G_avail
    entries: list[AbsorberEntry] = []
    used: set[Edge] = set()
    for index, (tree_id, T, leaf, anchor) in enumerate(selected):
        target = anchors[index % len(anchors)]
        body, labels = _body(T, leaf, anchor)
        root = body.roots[0]
        try:
            embedding = complete_embedding(body, available, {root: target}, region, seed + index, limit)
        except ConstructionFailure as exc:
            details = dict(exc.details)
            details.update({"tree_id": tree_id, "anchor_image": target})
            raise ConstructionFailure("absorber body could not be embedded", details) from exc
        mapping = {labels[v]: w for v, w in embedding.items()}
        entry = AbsorberEntry(tree_id, T, leaf, anchor, target, mapping)
        edges = entry.body_edges()
        used.update(edges)
        available = SimpleGraph(available.n, available.edges - set(edges))
        entries.append(entry)

    state = AbsorberState(t_last, A, tuple(entries), frozenset(used), tuple(skipped))
    _audit(state)
    logger.info("absorber: %d trees anchored on %d vertices (t=%d)", len(entries), len(A), t_last)
    return state


def absorb_leftover(leftover: SimpleGraph, state: AbsorberState, seed: int = 0) -> list[tuple[int, PartialEmbedding]]:
    """残り辺を出次数 t_last で向き付け、v に固定した葉を N⁺(v) へ1対1に割り当てます。"""

    A = state.A_last
    t = state.t_last
    outside = [e for e in leftover.edges if e[0] not in A or e[1] not in A]
    if outside:
        raise PreconditionError(f"leftover edge {outside[0]} leaves A_last")
    if leftover.m != t * len(A):
        raise InfeasibleError(
            f"leftover has {leftover.m} edges, absorber expects t_last*|A_last| = {t * len(A)}",
            {"reason": "edge-count", "edges": leftover.m, "required": t * len(A)},
        )
    if not state.entries:
        return []

    order = sorted(A)
    local = induced(leftover, order)
    result = orient_out_regular(local, OrientParams(dbar=t, seed=seed))
    out_of = {order[i]: [order[j] for j in result.orientation.out_neighbours(i)] for i in range(len(order))}

    placed: list[tuple[int, PartialEmbedding]] = []
    covered: Counter[Edge] = Counter()
    for v in order:
        entries = state.anchors_at(v)
        targets = out_of[v]
        if len(entries) != len(targets):
            raise ConstructionFailure(
                "out-degree does not match the anchors at a vertex",
                {"vertex": v, "anchors": len(entries), "out_degree": len(targets)},
            )
        for entry, w in zip(entries, targets):
            mapping = dict(entry.body)
            mapping[entry.leaf] = w
            body_edges = set(entry.body_edges())
            extra = canonical(v, w)
            problem = verify_embedding(
                entry.tree, lambda a, b: canonical(a, b) in body_edges or canonical(a, b) == extra, mapping
            )
            if problem is not None:
                raise ConstructionFailure("absorbed tree failed verification", {"tree_id": entry.tree_id, **problem})
            covered[extra] += 1
            placed.append((entry.tree_id, PartialEmbedding(mapping)))

    if set(covered) != set(leftover.edges) or any(c != 1 for c in covered.values()):
        raise ConstructionFailure("leftover edges not covered exactly once", {"covered": len(covered)})
    logger.info("absorber: %d leftover edges absorbed via %s orientation", leftover.m, result.method)
    return placed
