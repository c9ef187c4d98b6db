"""予約した木を埋め込んで、残った特定の構造 (例外頂点の辺、B 内のマッチング、
偶奇調整の辺、カモメ) をちょうど覆う。その他の辺は安全領域 A に置く。
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import networkx as nx
from networkx.algorithms import bipartite

from .cycle_machinery import Seagull
from .diagnostics import check_k_independent, greedy_k_independent_matching, greedy_k_independent_set
from .exceptions import ConstructionFailure, PreconditionError
from .graph_core import Edge, SimpleGraph, canonical
from .settings import pick
from .tree_tools import RootedForest
from .walk_embedder import PartialEmbedding, embed_forest_greedy, verify_embedding


logger = logging.getLogger(__name__)

MATCHING_DISTANCE = 4
SEAGULL_DISTANCE = 4
PARITY_LEAF_DISTANCE = 4
EXCEPTIONAL_DISTANCE = 2


@dataclass(frozen=True)
class ReservedTree:
    """根の像を指定した予約木 (森でもよい)。forbidden は W_T。"""

    tree: RootedForest
    root_images: Mapping[int, int] = field(default_factory=dict)
    forbidden: frozenset[int] = frozenset()

    @property
    def root(self) -> int:
        return self.tree.roots[0]

    @property
    def root_image(self) -> int | None:
        return self.root_images.get(self.root)


@dataclass(frozen=True)
class CoverStep:
    kind: str
    pins: dict[int, int]
    payload: list[list[int]]
    placed: int
    ok: bool


def _log_step(step: CoverStep) -> None:
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(json.dumps(asdict(step), ensure_ascii=False, default=str))


def _free_leaves(F: RootedForest, pins: Mapping[int, int]) -> frozenset[int]:
    roots = set(F.roots)
    return frozenset(v for v in range(F.n) if v not in pins and v not in roots and F.degree(v) == 1)


def _embed_skeleton_then_leaves(
    F: RootedForest,
    G_avail: SimpleGraph,
    pins: Mapping[int, int],
    pool: frozenset[int],
    rng: random.Random,
    order_key: Callable[[int, int], Any] | None,
) -> PartialEmbedding:
    """葉以外を先読み付きで貪欲に置き、葉は親の像の空き近傍へ二部マッチングで割り当てます。

    先読み: 子の数だけ空き近傍が残る候補を優先し、次に order_key、空き近傍の多さ、乱数の順。
    """

    leaves = _free_leaves(F, pins)
    mapping = dict(pins)
    used = set(pins.values())

    def room(w: int) -> int:
        return sum(1 for x in G_avail.neighbours(w) if x in pool and x not in used)

    for v in F.bfs_order():
        if v in leaves:
            continue
        p = F.parent[v]
        if v in pins:
            if p is not None and not G_avail.has_edge(mapping[p], pins[v]):
                raise ConstructionFailure(
                    "pinned vertex is not adjacent to its parent's image",
                    {"vertex": v, "image": pins[v], "parent_image": mapping[p]},
                )
            continue
        anchors = [mapping[p]] if p is not None else []
        anchors += [pins[w] for w in sorted(F.neighbours(v)) if w in pins and w != p]
        if anchors:
            candidates = set(G_avail.neighbours(anchors[0]))
            for a in anchors[1:]:
                candidates &= G_avail.neighbours(a)
            candidates &= pool
        else:
            candidates = set(pool)
        candidates -= used
        if not candidates:
            raise ConstructionFailure(
                "skeleton embedding exhausted its candidates", {"vertex": v, "placed": len(mapping)}
            )
        need = sum(1 for c in F.children(v) if c not in pins)
        scored = []
        for w in sorted(candidates):
            free = room(w)
            scored.append(((free < need, order_key(v, w) if order_key else 0, -free, rng.random()), w))
        w = min(scored)[1]
        mapping[v] = w
        used.add(w)

    if leaves:
        top = [("leaf", v) for v in sorted(leaves)]
        graph = nx.Graph()
        graph.add_nodes_from(top)
        for v in sorted(leaves):
            for x in G_avail.neighbours(mapping[F.parent[v]]):
                if x in pool and x not in used:
                    graph.add_edge(("leaf", v), ("host", x))
        matching = bipartite.hopcroft_karp_matching(graph, top_nodes=top)
        unmatched = [v for v in sorted(leaves) if ("leaf", v) not in matching]
        if unmatched:
            raise ConstructionFailure(
                "leaves could not be matched to free neighbours",
                {"unmatched": len(unmatched), "leaves": len(leaves)},
            )
        for v in sorted(leaves):
            mapping[v] = matching[("leaf", v)][1]

    embedding = PartialEmbedding(mapping)
    problem = verify_embedding(F, G_avail, embedding)
    if problem is not None:
        raise ConstructionFailure("skeleton embedding failed verification", problem)
    return embedding


def complete_embedding(
    F: RootedForest,
    G_avail: SimpleGraph,
    pins: Mapping[int, int],
    allowed: Iterable[int],
    seed: int = 0,
    attempts: int | None = None,
    order_key: Callable[[int, int], Any] | None = None,
    match_leaves: bool = False,
) -> PartialEmbedding:
    """事前配置を固定して残りを allowed 内へ貪欲に置きます。失敗したら乱択で引き直す。

    match_leaves=True では葉を最後にまとめてマッチングで置く (全域に近い木向け)。
    """

    pool = frozenset(allowed)
    last: ConstructionFailure | None = None
    if match_leaves:
        for attempt in range(1 + pick(attempts, "covering", "resample_attempts")):
            try:
                return _embed_skeleton_then_leaves(F, G_avail, pins, pool, random.Random(seed + attempt), order_key)
            except ConstructionFailure as exc:
                last = exc
        details = dict(last.details) if last else {}
        details["pins"] = len(pins)
        raise ConstructionFailure("greedy completion failed after resampling", details)
    try:
        return embed_forest_greedy(
            F, G_avail, pins.keys(), pins, check_preconditions=False, allowed=pool, order_key=order_key
        )
    except ConstructionFailure as exc:
        last = exc
    for attempt in range(pick(attempts, "covering", "resample_attempts")):
        try:
            return embed_forest_greedy(
                F, G_avail, pins.keys(), pins, check_preconditions=False, allowed=pool,
                rng=random.Random(seed + attempt),
            )
        except ConstructionFailure as exc:
            last = exc
    details = dict(last.details) if last else {}
    details["pins"] = len(pins)
    raise ConstructionFailure("greedy completion failed after resampling", details)


def _check_root(reserved: ReservedTree, region: frozenset[int]) -> dict[int, int]:
    pins = dict(reserved.root_images)
    for r, image in pins.items():
        if r not in reserved.tree.roots:
            raise PreconditionError(f"vertex {r} is not a root of the reserved tree")
        if image not in region:
            raise PreconditionError(f"root image {image} is not in the safe region minus W")
    return pins


def _check_cover(
    F: RootedForest,
    G_avail: SimpleGraph,
    embedding: PartialEmbedding,
    payload: Iterable[Edge],
    designated: Iterable[int],
    region: frozenset[int],
) -> None:
    problem = verify_embedding(F, G_avail, embedding)
    if problem is not None:
        raise ConstructionFailure("covering embedding failed verification", problem)
    image = set(embedding.image_edges(F))
    missing = [list(e) for e in payload if canonical(*e) not in image]
    if missing:
        raise ConstructionFailure("covering embedding misses payload edges", {"missing": missing})
    special = set(designated)
    stray = [v for v, w in embedding.items() if v not in special and w not in region]
    if stray:
        raise ConstructionFailure("vertex placed outside the safe region", {"vertex": stray[0]})


def _region(A: Iterable[int], W: Iterable[int]) -> frozenset[int]:
    return frozenset(A) - frozenset(W)


def cover_matching_with_tree(
    reserved: ReservedTree,
    G_avail: SimpleGraph,
    M: Sequence[tuple[int, int]],
    A: Iterable[int],
    seed: int = 0,
) -> PartialEmbedding:
    """木の 5-独立マッチング x_j z_j を M の辺 u_j v_j に写し、残りを A に置きます。"""

    T = reserved.tree
    region = _region(A, reserved.forbidden)
    pins = _check_root(reserved, region)
    payload = [canonical(u, v) for u, v in M]
    for u, v in payload:
        if not G_avail.has_edge(u, v):
            raise PreconditionError(f"matching edge {(u, v)} is not available")
        if u in region or v in region:
            raise PreconditionError(f"matching edge {(u, v)} touches the safe region")
    if len({x for e in payload for x in e}) != 2 * len(payload):
        raise PreconditionError("M is not a matching")

    if payload:
        far = [
            canonical(u, v) for u, v in T.edge_list()
            if min(T.depth(u), T.depth(v)) >= MATCHING_DISTANCE
        ]
        N = greedy_k_independent_matching(T, 5, far) if far else []
        if len(N) < len(payload):
            raise ConstructionFailure(
                "tree has too few independent matching edges for M",
                {"needed": len(payload), "available": len(N)},
            )
        for (x, z), (u, v) in zip(N, payload):
            if T.parent[z] != x:
                x, z = z, x
            pins[x], pins[z] = u, v

    embedding = complete_embedding(T, G_avail, pins, region, seed)
    _check_cover(T, G_avail, embedding, payload, pins, region)
    _log_step(CoverStep("matching", pins, [list(e) for e in payload], len(embedding), True))
    return embedding


def _seagull_edges(flock: Sequence[Seagull]) -> list[Edge]:
    return [canonical(a, b) for a, b, _ in flock] + [canonical(b, c) for _, b, c in flock]


def _check_flock(flock: Sequence[Seagull], G_avail: SimpleGraph, region: frozenset[int]) -> None:
    used = [v for gull in flock for v in gull]
    if len(set(used)) != len(used):
        raise PreconditionError("seagulls of a flock must be vertex-disjoint")
    for a, b, c in flock:
        if not (G_avail.has_edge(a, b) and G_avail.has_edge(b, c)):
            raise PreconditionError(f"seagull {(a, b, c)} is not available")
        if a not in region or c not in region:
            raise PreconditionError(f"wings of seagull {(a, b, c)} are not in the safe region")
        if b in region:
            raise PreconditionError(f"centre of seagull {(a, b, c)} lies in the safe region")


def _even_outside(F: RootedForest, embeddings: Sequence[PartialEmbedding], region: frozenset[int]) -> bool:
    load: dict[int, int] = {}
    for embedding in embeddings:
        for u, v in embedding.image_edges(F):
            for x in (u, v):
                if x not in region:
                    load[x] = load.get(x, 0) + 1
    return all(count % 2 == 0 for count in load.values())


def cover_seagulls_with_tree(
    reserved: ReservedTree | tuple[ReservedTree, ReservedTree],
    G_avail: SimpleGraph,
    flock: Sequence[Seagull],
    A: Iterable[int],
    seed: int = 0,
) -> list[PartialEmbedding]:
    """カモメの群れを覆います。

    木1本なら次数2の頂点 y_j を中心 v_j に、その2つの隣接頂点を翼に写す。
    木2本なら葉の親を翼に、葉を中心に写し、各カモメを2本の木で1辺ずつ覆う。
    """

    if isinstance(reserved, tuple):
        return _cover_seagulls_by_leaves(reserved, G_avail, flock, A, seed)
    T = reserved.tree
    region = _region(A, reserved.forbidden)
    pins = _check_root(reserved, region)
    _check_flock(flock, G_avail, region)
    if flock:
        candidates = [
            v for v in range(T.n)
            if T.degree(v) == 2 and T.parent[v] is not None and T.depth(v) >= SEAGULL_DISTANCE
        ]
        Y = sorted(greedy_k_independent_set(T, 5, Z=candidates)) if candidates else []
        if len(Y) < len(flock):
            raise ConstructionFailure(
                "tree has too few independent degree-2 vertices for the flock",
                {"needed": len(flock), "available": len(Y)},
            )
        for y, (a, b, c) in zip(Y, flock):
            parent = T.parent[y]
            (child,) = T.children(y)
            pins[parent], pins[y], pins[child] = a, b, c

    embedding = complete_embedding(T, G_avail, pins, region, seed)
    payload = _seagull_edges(flock)
    _check_cover(T, G_avail, embedding, payload, pins, region)
    if not _even_outside(T, [embedding], region):
        raise ConstructionFailure("seagull cover left an odd covered degree outside A", {})
    _log_step(CoverStep("seagull", pins, [list(e) for e in payload], len(embedding), True))
    return [embedding]


def _leaf_parents(T: RootedForest, count: int) -> list[tuple[int, int]]:
    parents = sorted({
        T.parent[leaf] for leaf in T.leaves()
        if T.parent[leaf] is not None and T.parent[T.parent[leaf]] is not None
    })
    chosen = sorted(greedy_k_independent_set(T, 3, Z=parents)) if parents else []
    if len(chosen) < count:
        raise ConstructionFailure(
            "tree has too few independent leaf-neighbours", {"needed": count, "available": len(chosen)}
        )
    out = []
    for q in chosen[:count]:
        leaf = min(c for c in T.children(q) if not T.children(c))
        out.append((q, leaf))
    return out


def _cover_seagulls_by_leaves(
    pair: tuple[ReservedTree, ReservedTree],
    G_avail: SimpleGraph,
    flock: Sequence[Seagull],
    A: Iterable[int],
    seed: int,
) -> list[PartialEmbedding]:
    embeddings: list[PartialEmbedding] = []
    available = G_avail
    for side, reserved in enumerate(pair):
        T = reserved.tree
        region = _region(A, reserved.forbidden)
        pins = _check_root(reserved, region)
        _check_flock(flock, G_avail, region)
        payload: list[Edge] = []
        for (q, leaf), (a, b, c) in zip(_leaf_parents(T, len(flock)), flock):
            wing = a if side == 0 else c
            pins[q], pins[leaf] = wing, b
            payload.append(canonical(wing, b))
        embedding = complete_embedding(T, available, pins, region, seed + side)
        _check_cover(T, available, embedding, payload, pins, region)
        _log_step(CoverStep(f"seagull-leaves-{side}", pins, [list(e) for e in payload], len(embedding), True))
        embeddings.append(embedding)
        available = SimpleGraph(available.n, available.edges - set(embedding.image_edges(T)))
    load: dict[int, int] = {}
    for reserved, embedding in zip(pair, embeddings):
        for u, v in embedding.image_edges(reserved.tree):
            for x in (u, v):
                load[x] = load.get(x, 0) + 1
    centres = [b for _, b, _ in flock]
    if any(load.get(b, 0) != 2 for b in centres):
        raise ConstructionFailure("seagull centre not covered exactly twice", {})
    return embeddings


def fix_parity_with_tree(
    reserved: ReservedTree,
    G_avail: SimpleGraph,
    target_edge: tuple[int, int],
    A: Iterable[int],
    seed: int = 0,
) -> PartialEmbedding:
    """根から距離4以上の葉を v に、その親を u に写して A–B の辺 uv をちょうど1本覆います。"""

    T = reserved.tree
    u, v = target_edge
    region = _region(A, reserved.forbidden)
    pins = _check_root(reserved, region)
    if u not in region or v in region:
        raise PreconditionError(f"target edge {(u, v)} must go from the safe region to outside it")
    if not G_avail.has_edge(u, v):
        raise PreconditionError(f"target edge {(u, v)} is not available")
    leaves = [x for x in T.leaves() if T.parent[x] is not None and T.depth(x) >= PARITY_LEAF_DISTANCE]
    if not leaves:
        raise PreconditionError("reserved tree has no leaf at distance >= 4 from its root")
    leaf = min(leaves, key=lambda x: (-T.depth(x), x))
    pins[leaf] = v
    pins[T.parent[leaf]] = u

    embedding = complete_embedding(T, G_avail, pins, region, seed)
    _check_cover(T, G_avail, embedding, [canonical(u, v)], pins, region)
    crossing = [e for e in embedding.image_edges(T) if (e[0] in region) != (e[1] in region)]
    outside = [e for e in embedding.image_edges(T) if e[0] not in region and e[1] not in region]
    if crossing != [canonical(u, v)] or outside:
        raise ConstructionFailure("parity fix covered more than the target edge", {"crossing": crossing})
    _log_step(CoverStep("parity", pins, [[u, v]], len(embedding), True))
    return embedding


@dataclass(frozen=True)
class ExceptionalCover:
    embeddings: tuple[tuple[int, PartialEmbedding], ...]
    residual: int
    skipped: tuple[int, ...]
    consumed: tuple[int, ...]


def cover_exceptional_vertex(
    forests: Sequence[ReservedTree],
    G_avail: SimpleGraph,
    v0: int,
    A: Iterable[int],
    threshold: int = 0,
    seed: int = 0,
) -> ExceptionalCover:
    """各森の非葉頂点 x (根から距離2以上) を v0 に写し、v0 の残り次数を threshold 以下まで減らします。

    森は2成分まで。1成分の木もそのまま受け付ける (パイプラインは予約木を1本ずつ渡す)。
    根の像を指定する場合、指定した根どうしは森の中で 5-独立でなければならない。
    """

    for index, reserved in enumerate(forests):
        F = reserved.tree
        if len(F.roots) > 2:
            raise PreconditionError(f"forest {index} has {len(F.roots)} components, at most two components allowed")
        clash = check_k_independent(F, reserved.root_images.keys(), 5)
        if clash is not None:
            raise PreconditionError(f"pinned roots {clash[0]} and {clash[1]} of forest {index} are not 5-independent")

    safe = frozenset(A)
    available = G_avail
    residual = len(available.neighbours(v0) & safe)
    done: list[tuple[int, PartialEmbedding]] = []
    skipped: list[int] = []
    consumed: list[int] = []
    for index, reserved in enumerate(forests):
        if residual <= threshold:
            break
        if v0 in reserved.forbidden:
            skipped.append(index)
            continue
        F = reserved.tree
        region = _region(safe, reserved.forbidden) - {v0}
        pins = _check_root(reserved, region)
        options = [
            x for x in range(F.n)
            if F.parent[x] is not None and F.children(x)
            and F.depth(x) >= EXCEPTIONAL_DISTANCE and F.degree(x) <= residual
        ]
        if not options:
            skipped.append(index)
            continue
        x = min(options, key=lambda y: (-F.degree(y), y))
        pins[x] = v0
        try:
            embedding = complete_embedding(F, available, pins, region, seed + index)
        except ConstructionFailure as exc:
            logger.info("exceptional vertex %d: forest %d failed (%s)", v0, index, exc)
            skipped.append(index)
            continue
        _check_cover(F, available, embedding, [], pins, region)
        edges = set(embedding.image_edges(F))
        at_v0 = sum(1 for e in edges if v0 in e)
        if at_v0 < 2:
            raise ConstructionFailure("exceptional embedding consumed fewer than 2 edges at v0", {"forest": index})
        available = SimpleGraph(available.n, available.edges - edges)
        residual = len(available.neighbours(v0) & safe)
        done.append((index, embedding))
        consumed.append(at_v0)
        _log_step(CoverStep("exceptional", pins, [], len(embedding), True))
    return ExceptionalCover(tuple(done), residual, tuple(skipped), tuple(consumed))
