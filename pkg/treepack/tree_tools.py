"""根付き森の構築と部分木操作、木の分割・部分森選択、次数制限付きランダム木の生成。"""

from __future__ import annotations

import heapq
import json
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .diagnostics import as_fraction
from .exceptions import ConstructionFailure, GraphFormatError, PreconditionError
from .graph_core import Edge, bfs_distances, canonical


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RootedForest:
    """各成分に根を持つ森。子は番号の昇順で並ぶ。

    labels は部分木を切り出したときの元の頂点番号 (None なら恒等)。
    """

    n: int
    parent: tuple[int | None, ...]
    roots: tuple[int, ...]
    max_degree_bound: int | None = None
    labels: tuple[int, ...] | None = None
    _children: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _order: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _depth: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _root_of: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.parent) != self.n:
            raise PreconditionError(f"parent table has {len(self.parent)} entries for {self.n} vertices")
        children: list[list[int]] = [[] for _ in range(self.n)]
        for v, p in enumerate(self.parent):
            if p is None:
                if v not in self.roots:
                    raise PreconditionError(f"vertex {v} has no parent but is not a root")
                continue
            if not 0 <= p < self.n or p == v:
                raise PreconditionError(f"vertex {v} has invalid parent {p}")
            children[p].append(v)
        if len(set(self.roots)) != len(self.roots):
            raise PreconditionError(f"repeated root in {list(self.roots)}")
        order: list[int] = []
        depth = [-1] * self.n
        root_of = [-1] * self.n
        for r in self.roots:
            if not 0 <= r < self.n or self.parent[r] is not None:
                raise PreconditionError(f"root {r} is invalid or has a parent")
            depth[r] = 0
            root_of[r] = r
            queue = deque([r])
            while queue:
                u = queue.popleft()
                order.append(u)
                for c in sorted(children[u]):
                    depth[c] = depth[u] + 1
                    root_of[c] = r
                    queue.append(c)
        if len(order) != self.n:
            raise PreconditionError("parent table contains a cycle or a vertex unreachable from the roots")
        object.__setattr__(self, "_children", tuple(tuple(sorted(c)) for c in children))
        object.__setattr__(self, "_order", tuple(order))
        object.__setattr__(self, "_depth", tuple(depth))
        object.__setattr__(self, "_root_of", tuple(root_of))
        if self.max_degree_bound is not None and self.max_degree() > self.max_degree_bound:
            raise PreconditionError(
                f"forest has maximum degree {self.max_degree()} above the bound {self.max_degree_bound}"
            )

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]],
        roots: Sequence[int] | None = None,
        delta: int | None = None,
    ) -> "RootedForest":
        adjacency: list[list[int]] = [[] for _ in range(n)]
        seen: set[Edge] = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v or not (0 <= u < n and 0 <= v < n):
                raise PreconditionError(f"invalid forest edge {(u, v)} for {n} vertices")
            e = canonical(u, v)
            if e in seen:
                raise PreconditionError(f"repeated forest edge {e}")
            seen.add(e)
            adjacency[u].append(v)
            adjacency[v].append(u)
        if len(seen) > max(n - 1, 0):
            raise PreconditionError("edge set contains a cycle")
        parent: list[int | None] = [None] * n
        visited = [False] * n
        chosen: list[int] = []
        starts = list(roots) if roots is not None else []
        for r in starts:
            if not 0 <= r < n:
                raise PreconditionError(f"root {r} out of range")
            if visited[r]:
                raise PreconditionError(f"root {r} shares a component with an earlier root")
            cls._orient_component(r, adjacency, parent, visited)
            chosen.append(r)
        for v in range(n):
            if not visited[v]:
                if roots is not None:
                    raise PreconditionError(f"vertex {v} lies in a component without a root")
                cls._orient_component(v, adjacency, parent, visited)
                chosen.append(v)
        return cls(n, tuple(parent), tuple(chosen), delta)

    @staticmethod
    def _orient_component(
        root: int,
        adjacency: list[list[int]],
        parent: list[int | None],
        visited: list[bool],
    ) -> None:
        visited[root] = True
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in sorted(adjacency[u]):
                if w == parent[u] and visited[w]:
                    continue
                if visited[w]:
                    raise PreconditionError("edge set contains a cycle")
                visited[w] = True
                parent[w] = u
                queue.append(w)

    @property
    def m(self) -> int:
        return self.n - len(self.roots)

    def children(self, v: int) -> tuple[int, ...]:
        return self._children[v]

    def neighbours(self, v: int) -> frozenset[int]:
        p = self.parent[v]
        base = frozenset(self._children[v])
        return base if p is None else base | {p}

    def multiplicity(self, u: int, v: int) -> int:
        return 1 if self.parent[u] == v or self.parent[v] == u else 0

    def has_edge(self, u: int, v: int) -> bool:
        return self.multiplicity(u, v) == 1

    def degree(self, v: int) -> int:
        return len(self._children[v]) + (0 if self.parent[v] is None else 1)

    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(self.n)), default=0)

    def depth(self, v: int) -> int:
        return self._depth[v]

    def root_of(self, v: int) -> int:
        return self._root_of[v]

    def bfs_order(self) -> tuple[int, ...]:
        return self._order

    def edge_list(self) -> tuple[Edge, ...]:
        return tuple(sorted(canonical(v, p) for v, p in enumerate(self.parent) if p is not None))

    def leaves(self) -> list[int]:
        return [v for v in range(self.n) if self.degree(v) == 1]

    def component(self, root: int) -> list[int]:
        return [v for v in self._order if self._root_of[v] == root]

    def subtree_sizes(self) -> list[int]:
        sizes = [1] * self.n
        for v in reversed(self._order):
            p = self.parent[v]
            if p is not None:
                sizes[p] += sizes[v]
        return sizes

    def original(self, v: int) -> int:
        return v if self.labels is None else self.labels[v]

    def degree_bound(self) -> int:
        """Δ として使う値 (上限が無ければ実際の最大次数、最低 2)。"""

        bound = self.max_degree_bound if self.max_degree_bound is not None else self.max_degree()
        return max(2, bound)


@dataclass(frozen=True)
class TreeDecompParams:
    t: int
    delta: int

    def __post_init__(self) -> None:
        if self.t < 1:
            raise PreconditionError(f"granularity t must be >= 1, got {self.t}")
        if self.delta < 2:
            raise PreconditionError(f"delta must be >= 2, got {self.delta}")


@dataclass(frozen=True)
class SubtreeHandle:
    y: int
    size: int
    distance_from_root: int
    vertices: tuple[int, ...] = ()


@dataclass(frozen=True)
class BalancedChoice:
    forest_index: int
    variant: str
    handles: tuple[SubtreeHandle, ...]

    @property
    def edge_count(self) -> int:
        return sum(h.size - 1 for h in self.handles)


@dataclass(frozen=True)
class BalancedSelection:
    choices: tuple[BalancedChoice, ...]
    crossing_index: int
    total_edges: int
    target: Fraction


def rerooted(T: RootedForest, r: int) -> RootedForest:
    """r を含む成分の根を r に付け替えた森。"""

    if not 0 <= r < T.n:
        raise PreconditionError(f"vertex {r} is not in the forest")
    old_root = T.root_of(r)
    roots = [r if root == old_root else root for root in T.roots]
    return RootedForest.from_edges(T.n, T.edge_list(), roots, T.max_degree_bound)


def tree_distance(T: RootedForest, u: int, v: int) -> int | None:
    return bfs_distances(T, u).get(v)  # type: ignore[arg-type]


def _relabel_from(T: RootedForest, start: int, max_depth: int | None) -> RootedForest:
    if not 0 <= start < T.n:
        raise PreconditionError(f"vertex {start} is not in the forest")
    order = [start]
    depth = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if max_depth is not None and depth[u] >= max_depth:
            continue
        for c in T.children(u):
            depth[c] = depth[u] + 1
            order.append(c)
            queue.append(c)
    position = {v: i for i, v in enumerate(order)}
    parent = tuple(None if v == start else position[T.parent[v]] for v in order)  # type: ignore[index]
    labels = tuple(T.original(v) for v in order)
    return RootedForest(len(order), parent, (0,), T.max_degree_bound, labels)


def subtree_below(T: RootedForest, v: int) -> RootedForest:
    """T(v) を v を根 (番号 0) とする木として返します。labels に元の番号を持つ。"""

    return _relabel_from(T, v, None)


def subtree_below_depth(T: RootedForest, v: int, t: int) -> RootedForest:
    """T(v, t): v から距離 t 以内の子孫だけの木。"""

    if t < 0:
        raise PreconditionError(f"depth must be non-negative, got {t}")
    return _relabel_from(T, v, t)


def _single_component(T: RootedForest, what: str) -> int:
    if len(T.roots) != 1:
        raise PreconditionError(f"{what} needs a single tree, got {len(T.roots)} components")
    return T.roots[0]


def decompose_rooted(T: RootedForest, params: TreeDecompParams) -> list[SubtreeHandle]:
    """根付き木を大きさ [t, 2Δt] の頂点素な根付き部分木に分けます。

    残りが 2Δt を超える間、深さ最大 (同点は番号最小) で |T(y)| ≥ t の y を選び、
    残りが t 未満にならない限り T(y) を切り出す。最後の残りが根を含む部分。
    """

    root = _single_component(T, "decompose_rooted")
    t, delta = params.t, params.delta
    if t > T.n:
        raise PreconditionError(f"granularity t={t} exceeds tree order {T.n}")
    if T.max_degree() > delta:
        raise PreconditionError(f"tree has maximum degree {T.max_degree()} above delta={delta}")

    removed: set[int] = set()
    remaining = T.n
    parts: list[SubtreeHandle] = []
    order = T.bfs_order()
    while remaining > 2 * delta * t:
        sizes: dict[int, int] = {}
        for v in reversed(order):
            if v in removed:
                continue
            sizes[v] = 1 + sum(sizes[c] for c in T.children(v) if c not in removed)
        y = min(
            (v for v, s in sizes.items() if s >= t),
            key=lambda v: (-T.depth(v), v),
        )
        if remaining - sizes[y] < t:
            break
        part = _collect_below(T, y, removed)
        parts.append(SubtreeHandle(y, len(part), T.depth(y), tuple(part)))
        removed.update(part)
        remaining -= len(part)
        logger.debug("decompose_rooted: split %d vertices below %d", len(part), y)
    rest = _collect_below(T, root, removed)
    parts.append(SubtreeHandle(root, len(rest), 0, tuple(rest)))

    covered = [v for h in parts for v in h.vertices]
    if sorted(covered) != list(range(T.n)):
        raise ConstructionFailure("decomposition does not partition the tree", {"parts": len(parts)})
    for h in parts:
        if not t <= h.size <= 2 * delta * t:
            raise ConstructionFailure(
                "decomposition part outside [t, 2*delta*t]", {"y": h.y, "size": h.size, "t": t}
            )
    return parts


def count_degree2_floor(T: RootedForest, t: int) -> int:
    """次数 2 の頂点数。葉が t 枚以下の木では n − 2t 以上になる (判定は呼び出し側)。"""

    if len(T.leaves()) > t:
        logger.debug("count_degree2_floor: %d leaves exceed t=%d", len(T.leaves()), t)
    return sum(1 for v in range(T.n) if T.degree(v) == 2)


def _collect_below(T: RootedForest, y: int, removed: set[int]) -> list[int]:
    out = [y]
    queue = deque([y])
    while queue:
        u = queue.popleft()
        for c in T.children(u):
            if c not in removed:
                out.append(c)
                queue.append(c)
    return out


def _descend(T: RootedForest, start: int, high: Fraction, sizes: list[int]) -> tuple[int, int]:
    u, steps = start, 0
    while sizes[u] > high and T.children(u):
        u = max(T.children(u), key=lambda c: (sizes[c], -c))
        steps += 1
    return u, steps


def extract_subtree(
    T: RootedForest,
    x: int,
    alpha: float | Fraction,
    k: int,
    delta: int | None = None,
) -> SubtreeHandle:
    """x から最大の子部分木へ降り、|T(y)| ≤ αΔn となった最初の y を返します。"""

    _single_component(T, "extract_subtree")
    Delta = delta if delta is not None else T.degree_bound()
    a = as_fraction(alpha)
    if a > Fraction(1, 2 * Delta ** k):
        raise PreconditionError(f"alpha={alpha} exceeds Delta^-k/2 = 1/{2 * Delta ** k}")
    n = T.n
    if a * n < 1:
        raise PreconditionError(f"alpha*n = {a * n} is below 1")
    R = T if T.roots[0] == x else rerooted(T, x)
    sizes = R.subtree_sizes()
    y, dist = _descend(R, x, a * Delta * n, sizes)
    handle = SubtreeHandle(y, sizes[y], dist, tuple(_collect_below(R, y, set())))
    if not (a * n <= handle.size <= a * Delta * n) or dist < k:
        raise ConstructionFailure(
            "extracted subtree violates its size window or distance bound",
            {"y": y, "size": handle.size, "distance": dist, "k": k, "alpha": str(a)},
        )
    return handle


def select_balanced_subforests(
    family: Sequence[RootedForest],
    beta: float | Fraction,
    n: int,
    c: int = 1,
    alpha: float | Fraction | None = None,
    delta: int | None = None,
) -> BalancedSelection:
    """各森から根から距離 5 以上の部分木を選び、辺数の総和を β n |family| ± n に合わせます。

    小さい方 (サイズ [βn/(cΔ), βn/c]) と大きい方 (サイズ [βn/c, Δβn/c]) を両方求め、
    添字 t 以下は大きい方、t より後は小さい方を使う混成和 S_t が目標に最も近い t を選ぶ。
    """

    if c not in (1, 2):
        raise PreconditionError(f"c must be 1 or 2, got {c}")
    b = as_fraction(beta)
    Delta = delta if delta is not None else max((F.degree_bound() for F in family), default=2)
    small: list[BalancedChoice] = []
    large: list[BalancedChoice] = []
    for index, F in enumerate(family):
        if len(F.roots) != 2:
            raise PreconditionError(f"forest {index} must have exactly two components, got {len(F.roots)}")
        if F.n > n:
            raise PreconditionError(f"forest {index} has {F.n} vertices, more than n={n}")
        if F.max_degree() > Delta:
            raise PreconditionError(f"forest {index} has maximum degree above {Delta}")
        sizes = F.subtree_sizes()
        for root in F.roots:
            if sizes[root] < 6:
                raise PreconditionError(f"forest {index} has a component with fewer than 6 vertices")
            if alpha is not None and sizes[root] < as_fraction(alpha) * n:
                raise PreconditionError(f"forest {index} has a component smaller than alpha*n")
        picks: dict[str, list[SubtreeHandle]] = {"small": [], "large": []}
        for root in F.roots[:c]:
            for variant, low, high in (
                ("small", b * n / (c * Delta), b * n / c),
                ("large", b * n / c, Delta * b * n / c),
            ):
                y, dist = _descend(F, root, high, sizes)
                if sizes[y] < low or dist < 5:
                    raise PreconditionError(
                        f"forest {index}: no {variant} subtree at distance >= 5 "
                        f"(got size {sizes[y]} at distance {dist})"
                    )
                picks[variant].append(SubtreeHandle(y, sizes[y], dist, tuple(_collect_below(F, y, set()))))
        small.append(BalancedChoice(index, "small", tuple(picks["small"])))
        large.append(BalancedChoice(index, "large", tuple(picks["large"])))

    target = b * n * len(family)
    totals = []
    for t in range(len(family) + 1):
        totals.append(sum(ch.edge_count for ch in large[:t]) + sum(ch.edge_count for ch in small[t:]))
    crossing = min(range(len(totals)), key=lambda t: (abs(totals[t] - target), t))
    if abs(totals[crossing] - target) > n:
        raise ConstructionFailure(
            "no hybrid choice within n of the target",
            {"target": str(target), "closest": totals[crossing], "index": crossing},
        )
    choices = tuple(large[:crossing] + small[crossing:])
    return BalancedSelection(choices, crossing, totals[crossing], target)


# ---- 生成 ----


def gen_random_tree(n: int, delta: int, seed: int | random.Random) -> RootedForest:
    """残り次数に余裕のある頂点へ一様に接続していく木 (同型類上の一様分布ではない)。"""

    if n < 1:
        raise PreconditionError(f"tree order must be >= 1, got {n}")
    if delta < 1 or (delta == 1 and n >= 3):
        raise PreconditionError(f"delta={delta} is too small for a tree on {n} vertices")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    parent: list[int | None] = [None] * n
    degree = [0] * n
    open_list = [0]
    position = {0: 0}

    def _close(u: int) -> None:
        i = position.pop(u)
        last = open_list.pop()
        if last != u:
            open_list[i] = last
            position[last] = i

    for v in range(1, n):
        u = open_list[rng.randrange(len(open_list))]
        parent[v] = u
        degree[u] += 1
        degree[v] = 1
        if degree[u] >= delta:
            _close(u)
        if degree[v] < delta:
            position[v] = len(open_list)
            open_list.append(v)
    return RootedForest(n, tuple(parent), (0,), max(delta, 1))


def gen_gl_sequence(
    n: int,
    delta: int,
    seed: int,
    unbounded_below: int = 0,
) -> list[RootedForest]:
    """位数 1..n の木の列。位数 unbounded_below 以下の木は次数制限なし。"""

    rng = random.Random(seed)
    trees = []
    for order in range(1, n + 1):
        bound = max(delta, order - 1) if order <= unbounded_below else delta
        if order <= 2:
            bound = max(bound, 1)
        trees.append(gen_random_tree(order, bound, rng.randrange(2**32)))
    return trees


def prufer_to_edges(sequence: Sequence[int], n: int) -> list[Edge]:
    if n == 1:
        return []
    if len(sequence) != n - 2:
        raise PreconditionError(f"Prufer sequence for {n} vertices needs length {n - 2}")
    degree = [1] * n
    for x in sequence:
        degree[x] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges: list[Edge] = []
    for x in sequence:
        leaf = heapq.heappop(leaves)
        edges.append(canonical(leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append(canonical(u, v))
    return sorted(edges)


def _rooted_code(adjacency: list[list[int]], v: int, parent: int) -> str:
    return "(" + "".join(sorted(_rooted_code(adjacency, w, v) for w in adjacency[v] if w != parent)) + ")"


def tree_code(n: int, edges: Iterable[tuple[int, int]]) -> str:
    """根の取り方で最小化した括弧列 (無根木の同型類の代表)。"""

    adjacency: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    return min(_rooted_code(adjacency, r, -1) for r in range(n))


def rooted_code(T: RootedForest, root: int) -> str:
    """root を根とした括弧列。根を保つ同型写像があるとき、かつそのときに限り一致する。"""

    adjacency = [sorted(T.neighbours(v)) for v in range(T.n)]
    return _rooted_code(adjacency, root, -1)


def enumerate_tree_classes(order: int) -> list[RootedForest]:
    """位数 order の無根木の同型類を Prüfer 列の総当たりで列挙します。"""

    if order < 1:
        raise PreconditionError(f"order must be >= 1, got {order}")
    if order <= 2:
        return [RootedForest.from_edges(order, [(0, 1)] if order == 2 else [], [0])]
    found: dict[str, list[Edge]] = {}
    for sequence in product(range(order), repeat=order - 2):
        edges = prufer_to_edges(sequence, order)
        code = tree_code(order, edges)
        found.setdefault(code, edges)
    return [RootedForest.from_edges(order, found[code], [0]) for code in sorted(found)]


# ---- JSON 形式 ----


def forests_from_payload(payload: Mapping[str, Any], source: str = "<json>") -> dict[int, RootedForest]:
    if "trees" not in payload or not isinstance(payload["trees"], list):
        raise GraphFormatError(f"{source}: missing 'trees' list")
    shared_delta = payload.get("delta")
    trees: dict[int, RootedForest] = {}
    for entry in payload["trees"]:
        try:
            tree_id = int(entry["id"])
            n = int(entry["n"])
            edges = [(int(u), int(v)) for u, v in entry["edges"]]
            roots = [int(r) for r in entry["roots"]] if "roots" in entry else None
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFormatError(f"{source}: malformed tree entry {entry!r}") from exc
        if tree_id in trees:
            raise GraphFormatError(f"{source}: repeated tree id {tree_id}")
        delta = entry.get("delta", shared_delta)
        try:
            trees[tree_id] = RootedForest.from_edges(n, edges, roots, None if delta is None else int(delta))
        except PreconditionError as exc:
            raise GraphFormatError(f"{source}: tree {tree_id}: {exc}") from exc
    return trees


def load_forests(path: str | Path) -> dict[int, RootedForest]:
    forest_path = Path(path)
    if not forest_path.exists():
        raise FileNotFoundError(f"forest file not found: {forest_path}")
    try:
        payload = json.loads(forest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{forest_path}: invalid JSON ({exc})") from exc
    return forests_from_payload(payload, str(forest_path))


def dump_forests(trees: Mapping[int, RootedForest] | Sequence[RootedForest], delta: int | None = None) -> dict[str, Any]:
    items = trees.items() if isinstance(trees, Mapping) else enumerate(trees, start=1)
    payload: dict[str, Any] = {
        "trees": [
            {"id": tree_id, "n": T.n, "edges": [list(e) for e in T.edge_list()], "roots": list(T.roots)}
            for tree_id, T in items
        ]
    }
    if delta is not None:
        payload["delta"] = delta
    return payload
