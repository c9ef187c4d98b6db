"""ホストグラフの表現と、ペア密度・次数などの厳密なプリミティブ。"""

from __future__ import annotations

import hashlib
import logging
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Union

import networkx as nx

from .exceptions import ConstructionFailure, GraphFormatError, PreconditionError
from .settings import pick


logger = logging.getLogger(__name__)

Edge = tuple[int, int]


def canonical(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


def _check_vertex(n: int, v: int) -> None:
    if not 0 <= v < n:
        raise PreconditionError(f"vertex {v} out of range [0, {n})")


class HostGraph(Protocol):
    n: int

    def neighbours(self, v: int) -> frozenset[int]: ...

    def multiplicity(self, u: int, v: int) -> int: ...

    def degree(self, v: int) -> int: ...


@dataclass(frozen=True)
class SimpleGraph:
    """ループ・多重辺なしの無向グラフ。隣接集合と辺ビット番号を同時に持つ。"""

    n: int
    edges: frozenset[Edge]
    _adjacency: tuple[frozenset[int], ...] = field(init=False, repr=False, compare=False)
    _edge_order: tuple[Edge, ...] = field(init=False, repr=False, compare=False)
    _edge_index: dict[Edge, int] = field(init=False, repr=False, compare=False)
    _adj_mask: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 0:
            raise PreconditionError(f"vertex count must be non-negative, got {self.n}")
        adjacency: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            if u == v:
                raise PreconditionError(f"loop at vertex {u}")
            if u > v:
                raise PreconditionError(f"edge {(u, v)} is not in canonical order")
            _check_vertex(self.n, u)
            _check_vertex(self.n, v)
            adjacency[u].add(v)
            adjacency[v].add(u)
        order = tuple(sorted(self.edges))
        object.__setattr__(self, "_adjacency", tuple(frozenset(a) for a in adjacency))
        object.__setattr__(self, "_edge_order", order)
        object.__setattr__(self, "_edge_index", {e: i for i, e in enumerate(order)})
        object.__setattr__(
            self,
            "_adj_mask",
            tuple(sum(1 << w for w in a) for a in adjacency),
        )

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "SimpleGraph":
        seen: set[Edge] = set()
        for u, v in edges:
            e = canonical(int(u), int(v))
            if e in seen:
                raise PreconditionError(f"parallel edge {e} in a simple graph")
            seen.add(e)
        return cls(n, frozenset(seen))

    @classmethod
    def empty(cls, n: int) -> "SimpleGraph":
        return cls(n, frozenset())

    @property
    def m(self) -> int:
        return len(self.edges)

    def vertices(self) -> range:
        return range(self.n)

    def neighbours(self, v: int) -> frozenset[int]:
        return self._adjacency[v]

    def degree(self, v: int) -> int:
        return len(self._adjacency[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self._adjacency]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adjacency[u]

    def multiplicity(self, u: int, v: int) -> int:
        return 1 if v in self._adjacency[u] else 0

    def adjacency_mask(self, v: int) -> int:
        return self._adj_mask[v]

    def edge_list(self) -> tuple[Edge, ...]:
        """正準順 (辞書式) に並んだ辺。辺ビット番号はこの並びの添字。"""

        return self._edge_order

    def edge_bit(self, u: int, v: int) -> int:
        return self._edge_index[canonical(u, v)]

    @property
    def full_edge_mask(self) -> int:
        return (1 << self.m) - 1

    def max_degree(self) -> int:
        return max(self.degrees(), default=0)

    def min_degree(self) -> int:
        return min(self.degrees(), default=0)


@dataclass(frozen=True)
class MultiGraph:
    """多重辺を許す (ループは不可) 無向グラフ。"""

    n: int
    weights: tuple[tuple[Edge, int], ...]
    _neighbour_weights: tuple[dict[int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        table: list[dict[int, int]] = [dict() for _ in range(self.n)]
        for (u, v), k in self.weights:
            if u == v:
                raise PreconditionError(f"loop at vertex {u}")
            _check_vertex(self.n, u)
            _check_vertex(self.n, v)
            if k < 1:
                raise PreconditionError(f"multiplicity of {(u, v)} must be positive, got {k}")
            table[u][v] = k
            table[v][u] = k
        object.__setattr__(self, "_neighbour_weights", tuple(table))

    @classmethod
    def from_multiplicity(cls, n: int, multiplicity: Mapping[tuple[int, int], int]) -> "MultiGraph":
        merged: Counter[Edge] = Counter()
        for (u, v), k in multiplicity.items():
            merged[canonical(u, v)] += int(k)
        return cls(n, tuple(sorted(merged.items())))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "MultiGraph":
        return cls.from_multiplicity(n, Counter(canonical(u, v) for u, v in edges))

    @property
    def m(self) -> int:
        return sum(k for _, k in self.weights)

    def vertices(self) -> range:
        return range(self.n)

    def neighbours(self, v: int) -> frozenset[int]:
        return frozenset(self._neighbour_weights[v])

    def multiplicity(self, u: int, v: int) -> int:
        return self._neighbour_weights[u].get(v, 0)

    def degree(self, v: int) -> int:
        return sum(self._neighbour_weights[v].values())

    def degrees(self) -> list[int]:
        return [self.degree(v) for v in range(self.n)]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._neighbour_weights[u]

    def edge_list(self) -> tuple[Edge, ...]:
        """多重度ぶん繰り返した辺列。"""

        return tuple(e for e, k in self.weights for _ in range(k))

    def underlying(self) -> SimpleGraph:
        return SimpleGraph(self.n, frozenset(e for e, _ in self.weights))


Graph = Union[SimpleGraph, MultiGraph]


@dataclass(frozen=True)
class BipartitionView:
    """G[A, B] を表すビュー。A と B は互いに素。"""

    host: SimpleGraph
    A: frozenset[int]
    B: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "A", frozenset(self.A))
        object.__setattr__(self, "B", frozenset(self.B))
        if self.A & self.B:
            raise PreconditionError(f"A and B overlap in {sorted(self.A & self.B)}")
        for v in self.A | self.B:
            _check_vertex(self.host.n, v)

    def degree(self, v: int) -> int:
        side = self.B if v in self.A else self.A
        return len(self.host.neighbours(v) & side)

    def edges(self) -> list[tuple[int, int]]:
        """(a, b) の組 (a ∈ A, b ∈ B) を a, b の昇順で返します。"""

        return [(a, b) for a in sorted(self.A) for b in sorted(self.host.neighbours(a) & self.B)]

    def edge_count(self) -> int:
        return sum(self.degree(a) for a in self.A)

    def max_degree(self) -> int:
        return max((self.degree(v) for v in self.A | self.B), default=0)

    def density(self) -> Fraction:
        if not self.A or not self.B:
            raise PreconditionError("density of a pair needs both sides nonempty")
        return Fraction(self.edge_count(), len(self.A) * len(self.B))


# ---- 密度・次数 ----


def _cross_count(G: HostGraph, X: Iterable[int], Y: frozenset[int]) -> int:
    return sum(G.multiplicity(x, y) for x in X for y in G.neighbours(x) & Y)


def _inside_count(G: HostGraph, S: frozenset[int]) -> int:
    return _cross_count(G, S, S) // 2


def pair_edge_count(G: HostGraph, U: Iterable[int], V: Iterable[int]) -> int:
    """重なりを許す e_G(U, V)。共通部分の辺は2回数える。"""

    U_set, V_set = frozenset(U), frozenset(V)
    both = U_set & V_set
    return (
        _cross_count(G, U_set - V_set, V_set)
        + _cross_count(G, V_set - U_set, both)
        + 2 * _inside_count(G, both)
    )


def pair_density(G: HostGraph, U: Iterable[int], V: Iterable[int]) -> Fraction:
    U_set, V_set = frozenset(U), frozenset(V)
    if not U_set or not V_set:
        raise PreconditionError("pair_density needs nonempty U and V")
    for v in U_set | V_set:
        _check_vertex(G.n, v)
    return Fraction(pair_edge_count(G, U_set, V_set), len(U_set) * len(V_set))


def degree_into(G: HostGraph, v: int, U: Iterable[int]) -> int:
    _check_vertex(G.n, v)
    U_set = frozenset(U)
    return sum(G.multiplicity(v, w) for w in G.neighbours(v) & U_set)


def codegree_into(G: HostGraph, u: int, v: int, U: Iterable[int] | None = None) -> int:
    if u == v:
        raise PreconditionError(f"codegree needs two distinct vertices, got {u} twice")
    _check_vertex(G.n, u)
    _check_vertex(G.n, v)
    common = G.neighbours(u) & G.neighbours(v)
    if U is not None:
        common &= frozenset(U)
    return len(common)


def min_codegree(G: HostGraph) -> int:
    """全ペアの共通近傍数の最小値 (n < 2 なら 0)。"""

    best: int | None = None
    for u in range(G.n):
        nu = G.neighbours(u)
        for v in range(u + 1, G.n):
            c = len(nu & G.neighbours(v))
            if best is None or c < best:
                best = c
    return best or 0


# ---- 部分グラフ ----


def remove_edges(G: SimpleGraph, removed: Iterable[tuple[int, int]]) -> SimpleGraph:
    drop = {canonical(u, v) for u, v in removed}
    missing = sorted(drop - G.edges)
    if missing:
        raise PreconditionError(f"cannot remove non-edge {missing[0]}")
    return SimpleGraph(G.n, G.edges - drop)


def induced(G: SimpleGraph, U: Iterable[int]) -> SimpleGraph:
    """G[U] を 0..|U|-1 に付け替えて返します (U の昇順)。"""

    order = sorted(set(U))
    for v in order:
        _check_vertex(G.n, v)
    position = {v: i for i, v in enumerate(order)}
    edges = {
        canonical(position[u], position[v])
        for u, v in G.edges
        if u in position and v in position
    }
    return SimpleGraph(len(order), frozenset(edges))


def induced_spanning(G: SimpleGraph, U: Iterable[int]) -> SimpleGraph:
    """頂点番号を保ったまま U 内部の辺だけを残します。"""

    keep = frozenset(U)
    return SimpleGraph(G.n, frozenset(e for e in G.edges if e[0] in keep and e[1] in keep))


def max_degree(edges: Iterable[tuple[int, int]]) -> int:
    counts: Counter[int] = Counter()
    for u, v in edges:
        counts[u] += 1
        counts[v] += 1
    return max(counts.values(), default=0)


def degree_map(edges: Iterable[tuple[int, int]]) -> Counter[int]:
    counts: Counter[int] = Counter()
    for u, v in edges:
        counts[u] += 1
        counts[v] += 1
    return counts


# ---- 探索 ----


def bfs_distances(
    G: HostGraph,
    source: int,
    limit: int | None = None,
    allowed: frozenset[int] | None = None,
) -> dict[int, int]:
    """source からの距離。limit を超える頂点は含めない。"""

    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if limit is not None and dist[u] >= limit:
            continue
        for w in sorted(G.neighbours(u)):
            if w in dist or (allowed is not None and w not in allowed):
                continue
            dist[w] = dist[u] + 1
            queue.append(w)
    return dist


def components(G: HostGraph, vertices: Iterable[int] | None = None) -> list[list[int]]:
    pool = frozenset(range(G.n)) if vertices is None else frozenset(vertices)
    graph = nx.Graph()
    graph.add_nodes_from(pool)
    graph.add_edges_from((u, w) for u in pool for w in G.neighbours(u) if w in pool)
    return sorted(sorted(part) for part in nx.connected_components(graph))


def is_connected(G: HostGraph, vertices: Iterable[int] | None = None) -> bool:
    return len(components(G, vertices)) <= 1


def to_networkx(G: SimpleGraph) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(G.n))
    graph.add_edges_from(G.edge_list())
    return graph


# ---- 生成 ----


def complete_graph(n: int) -> SimpleGraph:
    return SimpleGraph(n, frozenset((u, v) for u in range(n) for v in range(u + 1, n)))


def gnp_graph(n: int, p: float, seed: int) -> SimpleGraph:
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"edge probability must lie in [0, 1], got {p}")
    rng = random.Random(seed)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return SimpleGraph(n, frozenset(edges))


def _pairing_suitable(edges: set[Edge], pending: Counter[int]) -> bool:
    """残った端点の間にまだ張れる辺があるか。"""

    ends = sorted(pending)
    return not ends or any(canonical(a, b) not in edges for i, a in enumerate(ends) for b in ends[:i])


def _try_pairing(n: int, d: int, rng: random.Random) -> set[Edge] | None:
    edges: set[Edge] = set()
    stubs = [v for v in range(n) for _ in range(d)]
    while stubs:
        pending: Counter[int] = Counter()
        rng.shuffle(stubs)
        for i in range(0, len(stubs), 2):
            u, v = stubs[i], stubs[i + 1]
            if u == v or canonical(u, v) in edges:
                pending[u] += 1
                pending[v] += 1
            else:
                edges.add(canonical(u, v))
        if not _pairing_suitable(edges, pending):
            return None
        stubs = [v for v, k in pending.items() for _ in range(k)]
    return edges


def random_regular_graph(n: int, d: int, seed: int, retries: int | None = None) -> SimpleGraph:
    """配置モデル (衝突した組は引き直し) による単純 d-正則グラフ。

    行き詰まった組み合わせは最初から引き直し、retries 回で諦める。
    """

    if d < 0 or (n > 0 and d >= n):
        raise PreconditionError(f"degree {d} is not realizable on {n} vertices")
    if (n * d) % 2:
        raise PreconditionError(f"n*d must be even for a {d}-regular graph on {n} vertices")
    limit = pick(retries, "graphs", "regular_retries")
    if limit < 1:
        raise PreconditionError(f"retries must be >= 1, got {limit}")
    rng = random.Random(seed)
    for attempt in range(limit):
        edges = _try_pairing(n, d, rng)
        if edges is not None:
            logger.debug("random_regular_graph: n=%d d=%d after %d restarts", n, d, attempt)
            return SimpleGraph.from_edges(n, sorted(edges))
    raise ConstructionFailure(
        f"no simple {d}-regular pairing on {n} vertices after {limit} tries", {"n": n, "d": d, "retries": limit}
    )


# ---- テキスト形式 ----


def parse_graph_text(text: str, multigraph: bool = False, source: str = "<text>") -> Graph:
    """"n m" の後に "u v" が m 行続く形式を読みます。"#" 行と空行は無視。"""

    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise GraphFormatError(f"{source}: empty graph file")

    def _ints(lineno: int, tokens: list[str]) -> tuple[int, int]:
        if len(tokens) != 2:
            raise GraphFormatError(f"{source}:{lineno}: expected two integers, got {' '.join(tokens)!r}")
        try:
            return int(tokens[0]), int(tokens[1])
        except ValueError as exc:
            raise GraphFormatError(f"{source}:{lineno}: non-integer token in {' '.join(tokens)!r}") from exc

    header_line, header = rows[0]
    n, m = _ints(header_line, header)
    if n < 0 or m < 0:
        raise GraphFormatError(f"{source}:{header_line}: negative header values")
    if len(rows) - 1 != m:
        raise GraphFormatError(f"{source}: header promises {m} edges, found {len(rows) - 1}")
    counts: Counter[Edge] = Counter()
    for lineno, tokens in rows[1:]:
        u, v = _ints(lineno, tokens)
        if u == v:
            raise GraphFormatError(f"{source}:{lineno}: loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"{source}:{lineno}: vertex out of range [0, {n}) in edge {u} {v}")
        e = canonical(u, v)
        if counts[e] and not multigraph:
            raise GraphFormatError(f"{source}:{lineno}: repeated edge {u} {v} in a simple graph")
        counts[e] += 1
    if multigraph:
        return MultiGraph.from_multiplicity(n, counts)
    return SimpleGraph(n, frozenset(counts))


def read_graph(path: str | Path, multigraph: bool = False) -> Graph:
    graph_path = Path(path)
    if not graph_path.exists():
        raise FileNotFoundError(f"graph file not found: {graph_path}")
    return parse_graph_text(graph_path.read_text(encoding="utf-8"), multigraph, str(graph_path))


def format_graph(G: Graph) -> str:
    edges = G.edge_list()
    lines = [f"{G.n} {len(edges)}"] + [f"{u} {v}" for u, v in edges]
    return "\n".join(lines) + "\n"


def content_hash(G: Graph) -> str:
    """正準な辺リストの sha256。証明書をインスタンスに結び付ける。"""

    return hashlib.sha256(format_graph(G).encode("utf-8")).hexdigest()
