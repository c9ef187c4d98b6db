"""閉路分解まわり: オイラー化、公平分割、ハミルトン閉路探索、長い奇閉路への分解、カモメ分解、重み分割。"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import networkx as nx

from .diagnostics import as_fraction
from .exceptions import ConstructionFailure, PreconditionError
from .graph_core import BipartitionView, Edge, SimpleGraph, canonical, components
from .settings import pick


logger = logging.getLogger(__name__)


def cycle_edges(cycle: Sequence[int]) -> list[Edge]:
    return [canonical(cycle[i], cycle[(i + 1) % len(cycle)]) for i in range(len(cycle))]


def verify_cycle_list(G: SimpleGraph, cycles: Iterable[Sequence[int]]) -> dict[str, Any] | None:
    """各閉路が単純で G に含まれ、互いに辺素であることを確かめます。違反が無ければ None。"""

    seen: dict[Edge, int] = {}
    for index, cycle in enumerate(cycles):
        if len(cycle) < 3 or len(set(cycle)) != len(cycle):
            return {"reason": "not-simple", "cycle": index}
        for e in cycle_edges(cycle):
            if not G.has_edge(*e):
                return {"reason": "non-edge", "cycle": index, "edge": list(e)}
            if e in seen:
                return {"reason": "shared-edge", "cycles": [seen[e], index], "edge": list(e)}
            seen[e] = index
    return None


# ---- オイラー化 ----


def _find_three_path(
    adj: list[frozenset[int]],
    x: int,
    y: int,
    matching: set[Edge],
    blocked: set[int],
) -> tuple[int, int] | None:
    for a in sorted(adj[x]):
        if a in blocked or canonical(x, a) in matching:
            continue
        for b in sorted(adj[a] & adj[y]):
            if b in blocked or b == a or b == x:
                continue
            if canonical(a, b) in matching or canonical(b, y) in matching:
                continue
            return a, b
    return None


def make_eulerian(G: SimpleGraph, search_budget: int = 100_000) -> tuple[SimpleGraph, list[Edge]]:
    """奇数次数頂点を極大マッチングと長さ3の道で処理し、全次数が偶数の部分グラフを返します。"""

    active = [v for v in range(G.n) if G.degree(v) > 0]
    if len(components(G, active)) > 1:
        raise PreconditionError("make_eulerian needs the non-isolated vertices to be connected")
    odd = [v for v in range(G.n) if G.degree(v) % 2 == 1]
    odd_set = set(odd)
    matched: set[int] = set()
    matching: set[Edge] = set()
    for u in odd:
        if u in matched:
            continue
        for w in sorted(G.neighbours(u) & odd_set):
            if w > u and w not in matched:
                matching.add((u, w))
                matched.update((u, w))
                break
    X = [v for v in odd if v not in matched]
    logger.debug("make_eulerian: |M|=%d, %d unmatched odd vertices", len(matching), len(X))

    adj = [G.neighbours(v) for v in range(G.n)]
    blocked: set[int] = set(X)
    paths: list[tuple[int, int, int, int]] = []
    budget = [search_budget]
    stuck: list[tuple[int, int]] = []

    def pair_up(rest: list[int]) -> bool:
        if not rest:
            return True
        x = rest[0]
        for y in rest[1:]:
            budget[0] -= 1
            if budget[0] < 0:
                return False
            inner = _find_three_path(adj, x, y, matching, blocked)
            if inner is None:
                stuck.append((x, y))
                continue
            a, b = inner
            blocked.update(inner)
            paths.append((x, a, b, y))
            if pair_up([v for v in rest[1:] if v != y]):
                return True
            paths.pop()
            blocked.difference_update(inner)
        return False

    if X and not pair_up(X):
        pair = stuck[-1] if stuck else (X[0], X[1])
        raise ConstructionFailure(
            "no vertex-disjoint 3-paths pair the unmatched odd vertices",
            {"stuck_pair": list(pair), "unmatched": X, "budget_left": max(budget[0], 0)},
        )

    removed = set(matching)
    for x, a, b, y in paths:
        removed.update((canonical(x, a), canonical(a, b), canonical(b, y)))
    result = SimpleGraph(G.n, G.edges - removed)
    if any(result.degree(v) % 2 for v in range(G.n)):
        raise ConstructionFailure("eulerian subgraph still has an odd vertex", {})
    load: dict[int, int] = {}
    for u, v in removed:
        load[u] = load.get(u, 0) + 1
        load[v] = load.get(v, 0) + 1
    if load and max(load.values()) > 3:
        raise ConstructionFailure("removed edges exceed maximum degree 3", {})
    return result, sorted(removed)


# ---- 公平分割 ----


def fair_partition(
    G: SimpleGraph,
    V_prime: Iterable[int],
    k: int,
    slack: float | None = None,
    seed: int = 0,
    retries: int | None = None,
) -> list[list[int]]:
    """V' を偶数サイズで大きさの差が2以内の k 個に分け、各頂点の次数が均等に割れるまで引き直します。"""

    members = sorted(set(V_prime))
    if k < 1:
        raise PreconditionError(f"part count k must be >= 1, got {k}")
    if len(members) % 2:
        raise PreconditionError(f"|V'| = {len(members)} is odd")
    if k == 1:
        return [members]
    if not members:
        return [[] for _ in range(k)]
    allowance = as_fraction(slack) if slack is not None else Fraction(math.ceil(G.n ** (2 / 3)))
    limit = pick(retries, "cycles", "fair_partition_retries")

    pairs, extra = divmod(len(members) // 2, k)
    sizes = [2 * (pairs + (1 if i < extra else 0)) for i in range(k)]
    member_set = frozenset(members)
    base = [len(G.neighbours(v) & member_set) for v in range(G.n)]
    rng = random.Random(seed)
    shuffled = list(members)
    for attempt in range(limit):
        rng.shuffle(shuffled)
        parts: list[list[int]] = []
        cursor = 0
        for size in sizes:
            parts.append(sorted(shuffled[cursor:cursor + size]))
            cursor += size
        if _fair(G, parts, base, k, allowance):
            logger.debug("fair_partition: accepted after %d samples", attempt + 1)
            return parts
    raise ConstructionFailure(
        "no fair partition found within the retry cap",
        {"k": k, "size": len(members), "slack": str(allowance), "retries": limit},
    )


def _fair(G: SimpleGraph, parts: list[list[int]], base: list[int], k: int, allowance: Fraction) -> bool:
    part_sets = [frozenset(p) for p in parts]
    for v in range(G.n):
        floor = Fraction(base[v], k) - allowance
        for part in part_sets:
            if len(G.neighbours(v) & part) < floor:
                return False
    return True


# ---- ハミルトン閉路 ----


def _posa_attempt(
    adj: Mapping[int, frozenset[int] | set[int]],
    vertices: list[int],
    rng: random.Random,
    max_rotations: int,
) -> list[int] | None:
    size = len(vertices)
    path = [rng.choice(vertices)]
    position = {path[0]: 0}
    rotations = 0
    while rotations <= max_rotations:
        end = path[-1]
        fresh = [w for w in adj[end] if w not in position]
        if fresh:
            w = rng.choice(sorted(fresh))
            position[w] = len(path)
            path.append(w)
            continue
        if len(path) == size and path[0] in adj[end]:
            return path
        pivots = [w for w in adj[end] if position[w] < len(path) - 2]
        if not pivots:
            return None
        i = position[rng.choice(sorted(pivots))]
        path[i + 1:] = reversed(path[i + 1:])
        for j in range(i + 1, len(path)):
            position[path[j]] = j
        rotations += 1
    return None


def _is_hamilton_cycle(adj: Mapping[int, frozenset[int] | set[int]], cycle: Sequence[int], vertices: Iterable[int]) -> bool:
    if sorted(cycle) != sorted(vertices) or len(cycle) < 3:
        return False
    return all(cycle[(i + 1) % len(cycle)] in adj[cycle[i]] for i in range(len(cycle)))


def hamilton_cycle_in(
    adj: Mapping[int, frozenset[int] | set[int]],
    vertices: Iterable[int],
    restarts: int,
    seed: int,
) -> list[int] | None:
    """隣接表 adj を vertices に制限したグラフで回転・延長法を試します。"""

    pool = sorted(set(vertices))
    if len(pool) < 3:
        raise PreconditionError(f"a Hamilton cycle needs at least 3 vertices, got {len(pool)}")
    inside = frozenset(pool)
    local = {v: frozenset(adj[v]) & inside for v in pool}
    if min(len(local[v]) for v in pool) < 2:
        return None
    graph = nx.Graph()
    graph.add_nodes_from(pool)
    graph.add_edges_from((v, w) for v in pool for w in local[v] if v < w)
    if not nx.is_connected(graph):
        return None
    rng = random.Random(seed)
    for _ in range(max(1, restarts)):
        path = _posa_attempt(local, pool, rng, max_rotations=10 * len(pool) * len(pool))
        if path is not None and _is_hamilton_cycle(local, path, pool):
            return path
    return None


def find_hamilton_cycle(
    G: SimpleGraph,
    restarts: int | None = None,
    seed: int = 0,
    vertices: Iterable[int] | None = None,
) -> list[int] | None:
    """検証済みのハミルトン閉路 (頂点列) を返します。見つからなければ None。"""

    pool = range(G.n) if vertices is None else vertices
    adj = {v: G.neighbours(v) for v in range(G.n)}
    return hamilton_cycle_in(adj, pool, pick(restarts, "cycles", "hamilton_restarts"), seed)


# ---- 長い奇閉路への分解 ----


@dataclass(frozen=True)
class CycleDecompParams:
    r: int | None = None
    hamilton_restarts: int | None = None
    seed: int = 0
    leftover_threshold: int | None = None
    slack: float | None = None

    def __post_init__(self) -> None:
        if self.r is not None and self.r < 2:
            raise PreconditionError(f"r must be >= 2, got {self.r}")


@dataclass(frozen=True)
class CycleDecomposition:
    cycles: tuple[tuple[int, ...], ...]
    hamilton: tuple[bool, ...]
    leftover: SimpleGraph
    iterations: int
    gaps: tuple[int, ...] = ()
    checks: dict[str, Any] = field(default_factory=dict)

    @property
    def non_hamilton_count(self) -> int:
        return sum(1 for flag in self.hamilton if not flag)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cycles": [list(c) for c in self.cycles],
            "hamilton": list(self.hamilton),
            "leftover_edges": self.leftover.m,
            "iterations": self.iterations,
            "non_hamilton": self.non_hamilton_count,
            "gaps": list(self.gaps),
            "checks": self.checks,
        }


def _degree_gap(adj: list[set[int]]) -> tuple[int, int]:
    degrees = [len(a) for a in adj]
    return max(degrees), min(degrees)


def _drop_cycle(adj: list[set[int]], cycle: Sequence[int]) -> None:
    for u, v in cycle_edges(cycle):
        adj[u].discard(v)
        adj[v].discard(u)


def _irregular_round(
    G: SimpleGraph,
    adj: list[set[int]],
    r: int,
    restarts: int,
    slack: float | None,
    seed: int,
    iteration: int,
) -> list[tuple[int, ...]]:
    n = G.n
    top, _ = _degree_gap(adj)
    M = [v for v in range(n) if len(adj[v]) == top]
    Z = [v for v in range(n) if len(adj[v]) != top]
    x = M[0]
    Z_prime = Z if len(M) % 2 == 1 else sorted(Z + [x])
    rounds = [fair_partition(G, Z_prime, r, slack, seed=seed)]
    if len(M) % 2 == 0:
        rounds.append(fair_partition(G, [v for v in range(n) if v != x], r, slack, seed=seed + 1))

    found: list[tuple[int, ...]] = []
    for parts in rounds:
        for t, part in enumerate(parts):
            excluded = frozenset(part)
            keep = [v for v in range(n) if v not in excluded]
            cycle = hamilton_cycle_in(
                {v: adj[v] for v in range(n)}, keep, restarts, seed * 7919 + len(found)
            )
            if cycle is None:
                raise ConstructionFailure(
                    "Hamilton heuristic failed inside the irregular loop",
                    {
                        "iteration": iteration,
                        "part": t,
                        "max_set_size": len(M),
                        "excluded": sorted(excluded),
                        "cycles_so_far": len(found),
                    },
                )
            _drop_cycle(adj, cycle)
            found.append(tuple(cycle))
    return found


def _regular_phase(
    adj: list[set[int]],
    restarts: int,
    threshold: int,
    seed: int,
) -> list[tuple[int, ...]]:
    n = len(adj)
    found: list[tuple[int, ...]] = []
    step = 0
    while True:
        degree = len(adj[0]) if n else 0
        if degree <= threshold:
            return found
        if degree == 2:
            graph = nx.Graph([(u, w) for u in range(n) for w in adj[u] if u < w])
            if graph.number_of_nodes() != n or not nx.is_connected(graph):
                return found
            cycle = [c for c, _ in nx.find_cycle(graph, source=0)]
            _drop_cycle(adj, cycle)
            found.append(tuple(cycle))
            continue
        accepted: list[int] | None = None
        for attempt in range(max(1, restarts)):
            cycle = hamilton_cycle_in({v: adj[v] for v in range(n)}, range(n), 1, seed * 104729 + step * 131 + attempt)
            if cycle is None:
                continue
            if degree - 2 != 2:
                accepted = cycle
                break
            rest = nx.Graph([(u, w) for u in range(n) for w in adj[u] if u < w])
            rest.remove_edges_from(cycle_edges(cycle))
            if rest.number_of_nodes() == n and nx.is_connected(rest):
                accepted = cycle
                break
        step += 1
        if accepted is None:
            return found
        _drop_cycle(adj, accepted)
        found.append(tuple(accepted))


def decompose_long_cycles(G: SimpleGraph, params: CycleDecompParams | None = None) -> CycleDecomposition:
    """次数差を2ずつ縮める奇閉路の抽出と、正則になった後のハミルトン閉路の繰り返し抽出。"""

    params = params or CycleDecompParams()
    r = pick(params.r, "cycles", "r")
    restarts = pick(params.hamilton_restarts, "cycles", "hamilton_restarts")
    threshold = pick(params.leftover_threshold, "cycles", "leftover_threshold")
    n = G.n
    if n % 2 == 0:
        raise PreconditionError(f"decompose_long_cycles needs an odd number of vertices, got {n}")
    odd = [v for v in range(n) if G.degree(v) % 2]
    if odd:
        raise PreconditionError(f"graph is not Eulerian: vertex {odd[0]} has odd degree")

    adj = [set(G.neighbours(v)) for v in range(n)]
    top, bottom = _degree_gap(adj)
    logger.info("decompose_long_cycles: n=%d, degree gap %d (max %d, min %d)", n, top - bottom, top, bottom)
    cycles: list[tuple[int, ...]] = []
    gaps = [top - bottom]
    iteration = 0
    while top != bottom:
        found = _irregular_round(G, adj, r, restarts, params.slack, params.seed + iteration, iteration)
        cycles.extend(found)
        new_top, new_bottom = _degree_gap(adj)
        if (top - bottom) - (new_top - new_bottom) != 2:
            raise ConstructionFailure(
                "degree gap did not drop by exactly 2",
                {"iteration": iteration, "before": top - bottom, "after": new_top - new_bottom},
            )
        top, bottom = new_top, new_bottom
        gaps.append(top - bottom)
        iteration += 1
        logger.info("decompose_long_cycles: iteration %d, gap now %d", iteration, top - bottom)

    snapshot = [set(a) for a in adj]
    best: list[tuple[int, ...]] = []
    best_adj = snapshot
    for phase in range(max(1, restarts)):
        trial_adj = [set(a) for a in snapshot]
        found = _regular_phase(trial_adj, restarts, threshold, params.seed * 31 + phase)
        if phase == 0 or sum(map(len, trial_adj)) < sum(map(len, best_adj)):
            best, best_adj = found, trial_adj
        if (len(trial_adj[0]) if n else 0) <= threshold:
            break
    if best_adj and len(best_adj[0]) > threshold:
        logger.warning("decompose_long_cycles: regular phase left degree %d", len(best_adj[0]))
    cycles.extend(best)

    leftover = SimpleGraph(n, frozenset(canonical(u, w) for u in range(n) for w in best_adj[u]))
    hamilton = tuple(len(c) == n for c in cycles)
    problem = verify_cycle_list(G, cycles)
    if problem is not None:
        raise ConstructionFailure("cycle list failed verification", problem)
    covered = {e for c in cycles for e in cycle_edges(c)}
    if covered | leftover.edges != G.edges or covered & leftover.edges:
        raise ConstructionFailure("cycles and leftover do not partition the edge set", {})
    shortest = min((len(c) for c, h in zip(cycles, hamilton) if not h), default=n)
    checks = {
        "edge_disjoint": True,
        "odd_lengths": all(len(c) % 2 == 1 for c in cycles),
        "shortest_non_hamilton": shortest,
        "length_bound": float((1 - Fraction(1, r - 1)) * n),
    }
    return CycleDecomposition(tuple(cycles), hamilton, leftover, iteration, tuple(gaps), checks)


# ---- カモメ ----


Seagull = tuple[int, int, int]


def seagull_decompose(view: BipartitionView) -> list[list[Seagull]]:
    """G[A, B] の辺を、翼が A にあるカモメの群れ (頂点素な長さ2の道の集まり) に分けます。"""

    seagulls: list[Seagull] = []
    for b in sorted(view.B):
        wings = sorted(view.host.neighbours(b) & view.A)
        if len(wings) % 2:
            raise PreconditionError(f"vertex {b} of B has odd degree {len(wings)}")
        for i in range(0, len(wings), 2):
            seagulls.append((wings[i], b, wings[i + 1]))
    if not seagulls:
        return []

    by_vertex: dict[int, list[int]] = {}
    for index, gull in enumerate(seagulls):
        for v in gull:
            by_vertex.setdefault(v, []).append(index)
    conflicts = [
        {j for v in gull for j in by_vertex[v] if j != index} for index, gull in enumerate(seagulls)
    ]
    colour = [-1] * len(seagulls)
    for index in sorted(range(len(seagulls)), key=lambda i: (-len(conflicts[i]), i)):
        taken = {colour[j] for j in conflicts[index]}
        c = 0
        while c in taken:
            c += 1
        colour[index] = c
    flocks: list[list[Seagull]] = [[] for _ in range(max(colour) + 1)]
    for index, c in enumerate(colour):
        flocks[c].append(seagulls[index])
    if len(flocks) > 3 * view.max_degree():
        raise ConstructionFailure("flock count exceeds 3 * max degree", {"flocks": len(flocks)})
    return flocks


# ---- 重み分割 ----


@dataclass(frozen=True)
class WeightedSet:
    items: tuple[Any, ...]
    weights: tuple[Fraction, ...]
    M: Fraction
    m: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(as_fraction(w) for w in self.weights))
        object.__setattr__(self, "M", as_fraction(self.M))
        if len(self.items) != len(self.weights):
            raise PreconditionError("items and weights differ in length")
        for item, w in zip(self.items, self.weights):
            if not 0 <= w <= self.M:
                raise PreconditionError(f"weight {w} of {item!r} is outside [0, {self.M}]")

    @classmethod
    def of(cls, weights: Mapping[Any, float | Fraction] | Sequence[float | Fraction], M: float | Fraction, m: int) -> "WeightedSet":
        if isinstance(weights, Mapping):
            keys = tuple(weights)
            return cls(keys, tuple(weights[k] for k in keys), M, m)
        return cls(tuple(range(len(weights))), tuple(weights), M, m)


def weight_partition(ws: WeightedSet) -> list[list[Any]]:
    """各パートの大きさ ≤ ⌈2n/m⌉、重み ≤ 2w(X)/m + M となるよう貪欲に詰めます。"""

    n, m = len(ws.items), ws.m
    if m < 1 or m > n:
        raise PreconditionError(f"part count m={m} must satisfy 1 <= m <= n={n}")
    size_cap = math.ceil(Fraction(2 * n, m))
    weight_cap = 2 * sum(ws.weights, Fraction(0)) / m + ws.M
    parts: list[list[Any]] = [[] for _ in range(m)]
    loads = [Fraction(0)] * m
    for item, w in zip(ws.items, ws.weights):
        eligible = [
            i for i in range(m)
            if len(parts[i]) + 1 <= size_cap and loads[i] + w <= weight_cap
        ]
        if not eligible:
            raise ConstructionFailure("no part has room for item", {"item": repr(item)})
        i = min(eligible, key=lambda j: (loads[j], len(parts[j]), j))
        parts[i].append(item)
        loads[i] += w
    for i in range(m):
        if len(parts[i]) > size_cap or loads[i] > weight_cap:
            raise ConstructionFailure("weight partition bound violated", {"part": i})
    return parts
