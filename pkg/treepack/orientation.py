"""全頂点の出次数がちょうど d̄ となる向き付け。

ポテンシャル Z を減らしながら層 (ハミルトン閉路 + 長さ2の道) を剥がすループと、
最大流による厳密な判定器を持つ。
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import networkx as nx
from networkx.algorithms import bipartite

from .cycle_machinery import hamilton_cycle_in
from .exceptions import ConstructionFailure, InfeasibleError, PreconditionError
from .graph_core import SimpleGraph, canonical
from .settings import pick


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Orientation:
    """向き付け。arcs の各 (u, v) は u→v を表し、ホストの各辺をちょうど1回含む。"""

    n: int
    arcs: tuple[tuple[int, int], ...]

    def out_degrees(self) -> list[int]:
        out = [0] * self.n
        for u, _ in self.arcs:
            out[u] += 1
        return out

    def direction(self, u: int, v: int) -> tuple[int, int] | None:
        for a, b in self.arcs:
            if canonical(a, b) == canonical(u, v):
                return a, b
        return None

    def covers(self, G: SimpleGraph) -> bool:
        undirected = [canonical(u, v) for u, v in self.arcs]
        return len(undirected) == len(set(undirected)) and set(undirected) == set(G.edges)

    def out_neighbours(self, v: int) -> list[int]:
        return sorted(b for a, b in self.arcs if a == v)

    def to_lines(self) -> list[str]:
        return [f"{u} {v}" for u, v in sorted(self.arcs)]


def average_degree(G: SimpleGraph) -> Fraction:
    if G.n < 1:
        raise PreconditionError("average degree of an empty vertex set")
    return Fraction(2 * G.m, G.n)


def imbalance(G: SimpleGraph) -> Fraction:
    """Z(G) = Σ |d(v) - d̄(G)| を有理数で返します。"""

    mean = average_degree(G)
    return sum((abs(G.degree(v) - mean) for v in range(G.n)), Fraction(0))


def _imbalance_of(adj: list[set[int]]) -> Fraction:
    degrees = [len(a) for a in adj]
    mean = Fraction(sum(degrees), len(degrees))
    return sum((abs(d - mean) for d in degrees), Fraction(0))


def _exact_out_degree(orientation: Orientation, G: SimpleGraph, dbar: int) -> bool:
    return orientation.covers(G) and all(d == dbar for d in orientation.out_degrees())


# ---- 厳密判定 ----


@dataclass(frozen=True)
class OracleResult:
    feasible: bool
    orientation: Orientation | None
    certificate: dict[str, Any] = field(default_factory=dict)


def orient_exact_oracle(G: SimpleGraph, dbar: int) -> OracleResult:
    """source → 辺 → 端点 → sink (容量 d̄) の流れが飽和するかで判定します。

    実行不能なときは辺数の不一致か、e(G[S]) > d̄|S| となる S を証拠として返す。
    """

    required = G.n * dbar
    if G.m != required:
        return OracleResult(False, None, {"reason": "edge-count", "edges": G.m, "required": required})
    if G.m == 0:
        return OracleResult(True, Orientation(G.n, ()), {})

    network = nx.DiGraph()
    edges = G.edge_list()
    for index, (u, v) in enumerate(edges):
        network.add_edge("source", ("e", index), capacity=1)
        network.add_edge(("e", index), ("v", u), capacity=1)
        network.add_edge(("e", index), ("v", v), capacity=1)
    for v in range(G.n):
        network.add_edge(("v", v), "sink", capacity=dbar)
    value, flow = nx.maximum_flow(network, "source", "sink")
    if value == G.m:
        arcs = []
        for index, (u, v) in enumerate(edges):
            tail = u if flow[("e", index)][("v", u)] == 1 else v
            arcs.append((tail, v if tail == u else u))
        orientation = Orientation(G.n, tuple(arcs))
        if not _exact_out_degree(orientation, G, dbar):
            raise ConstructionFailure("oracle orientation failed its out-degree check", {"dbar": dbar})
        return OracleResult(True, orientation, {})

    _, (source_side, _) = nx.minimum_cut(network, "source", "sink")
    S = sorted(node[1] for node in source_side if isinstance(node, tuple) and node[0] == "v")
    inside = sum(1 for u, v in edges if u in S and v in S) if S else 0
    certificate: dict[str, Any] = {"reason": "dense-set", "S": S, "edges_inside": inside, "bound": dbar * len(S)}
    if inside <= dbar * len(S):
        certificate = {"reason": "flow-deficit", "flow": value, "edges": G.m}
    return OracleResult(False, None, certificate)


# ---- オイラー回路 ----


def _euler_arcs(adj: list[set[int]]) -> list[tuple[int, int]]:
    graph = nx.Graph()
    graph.add_nodes_from(range(len(adj)))
    graph.add_edges_from((u, w) for u in range(len(adj)) for w in adj[u] if u < w)
    arcs: list[tuple[int, int]] = []
    for part in nx.connected_components(graph):
        sub = graph.subgraph(part)
        if sub.number_of_edges() == 0:
            continue
        arcs.extend(nx.eulerian_circuit(sub, source=min(part)))
    return arcs


def euler_orientation(G: SimpleGraph) -> Orientation:
    """全次数が偶数の G を、各成分のオイラー回路に沿って向き付けます (出次数 = 次数/2)。"""

    odd = [v for v in range(G.n) if G.degree(v) % 2]
    if odd:
        raise PreconditionError(f"euler_orientation needs even degrees; vertex {odd[0]} is odd")
    orientation = Orientation(G.n, tuple(_euler_arcs([set(G.neighbours(v)) for v in range(G.n)])))
    out = orientation.out_degrees()
    if not orientation.covers(G) or any(2 * out[v] != G.degree(v) for v in range(G.n)):
        raise ConstructionFailure("Euler orientation is not balanced", {})
    return orientation


# ---- 層を剥がすループ ----


@dataclass(frozen=True)
class OrientParams:
    dbar: int | None = None
    p_hint: float | None = None
    seed: int = 0
    restarts: int | None = None


@dataclass(frozen=True)
class LayerStat:
    t: int
    imbalance_before: Fraction
    imbalance_after: Fraction
    gap_before: int
    gap_after: int


@dataclass(frozen=True)
class OrientationResult:
    orientation: Orientation
    method: str
    dbar: int
    layers: tuple[LayerStat, ...] = ()
    attempts: int = 0
    oracle_seconds: float = 0.0
    layered_seconds: float = 0.0

    def summary(self) -> dict[str, Any]:
        return {
            "feasible": True,
            "method": self.method,
            "outdeg": self.dbar,
            "layers": len(self.layers),
            "attempts": self.attempts,
            "oracle_seconds": round(self.oracle_seconds, 6),
            "layered_seconds": round(self.layered_seconds, 6),
        }


def _gap(adj: list[set[int]]) -> tuple[int, int]:
    degrees = [len(a) for a in adj]
    return max(degrees), min(degrees)


def _peel_layers(
    G: SimpleGraph,
    dbar: int,
    p: float,
    rng: random.Random,
    hamilton_restarts: int,
) -> tuple[list[tuple[int, int]], list[LayerStat]]:
    n = G.n
    adj = [set(G.neighbours(v)) for v in range(n)]
    arcs: list[tuple[int, int]] = []
    layers: list[LayerStat] = []
    for iteration in range(3 * n + 1):
        top, bottom = _gap(adj)
        if top == bottom:
            if top != 2 * (dbar - len(layers)):
                raise ConstructionFailure("regular remainder has the wrong degree", {"degree": top, "layers": len(layers)})
            arcs.extend(_euler_arcs(adj))
            return arcs, layers
        if iteration == 3 * n:
            break
        U = [v for v in range(n) if len(adj[v]) == top]
        V = [v for v in range(n) if len(adj[v]) == bottom]
        rng.shuffle(U)
        rng.shuffle(V)
        t = max(1, min(len(U), len(V), int(p * p * n / 4)))
        U_t, V_t = U[:t], V[:t]
        ends = frozenset(U_t) | frozenset(V_t)

        middle = nx.Graph()
        left = [("pair", j) for j in range(t)]
        middle.add_nodes_from(left)
        for j in range(t):
            for w in adj[U_t[j]] & adj[V_t[j]]:
                if w not in ends:
                    middle.add_edge(("pair", j), ("w", w))
        matching = bipartite.hopcroft_karp_matching(middle, top_nodes=left)
        chosen = sorted(
            (j, matching[("pair", j)][1]) for j in range(t) if ("pair", j) in matching
        )
        if not chosen:
            raise ConstructionFailure(
                "no middle vertices for the layer paths", {"iteration": iteration, "t": t}
            )
        paths = [(U_t[j], w, V_t[j]) for j, w in chosen]
        removed = {v for _, w, v in paths} | {w for _, w, _ in paths}
        keep = [v for v in range(n) if v not in removed]
        cycle = hamilton_cycle_in(
            {v: adj[v] for v in range(n)}, keep, hamilton_restarts, rng.randrange(2**32)
        ) if len(keep) >= 3 else None
        if cycle is None:
            raise ConstructionFailure(
                "Hamilton heuristic failed while peeling a layer",
                {"iteration": iteration, "t": len(paths), "gap": top - bottom},
            )

        before = _imbalance_of(adj)
        layer: list[tuple[int, int]] = [(cycle[i], cycle[(i + 1) % len(cycle)]) for i in range(len(cycle))]
        for u, w, v in paths:
            layer.extend([(v, w), (w, u)])
        for a, b in layer:
            adj[a].discard(b)
            adj[b].discard(a)
        out = [0] * n
        for a, _ in layer:
            out[a] += 1
        if any(d != 1 for d in out):
            raise ConstructionFailure("layer is not out-degree 1", {"iteration": iteration})
        after = _imbalance_of(adj)
        new_top, new_bottom = _gap(adj)
        if before - after != 2 * len(paths) or new_top - new_bottom > top - bottom:
            raise ConstructionFailure(
                "layer broke the potential invariant",
                {"iteration": iteration, "Z": [str(before), str(after)], "gap": [top - bottom, new_top - new_bottom]},
            )
        arcs.extend(layer)
        layers.append(LayerStat(len(paths), before, after, top - bottom, new_top - new_bottom))
        logger.debug("orientation layer %d: t=%d Z %s -> %s", iteration, len(paths), before, after)
    raise ConstructionFailure("orientation loop hit its iteration cap", {"cap": 3 * n})


def orient_out_regular(G: SimpleGraph, params: OrientParams | None = None, use_oracle: bool = True) -> OrientationResult:
    """出次数 d̄ の向き付けを返します。判定器で実行可能性を確かめてから層を剥がすループを走らせ、
    ループが失敗したら判定器の向き付けに切り替える。"""

    params = params or OrientParams()
    n = G.n
    if n < 1:
        raise PreconditionError("orientation needs at least one vertex")
    if params.dbar is None:
        if G.m % n:
            raise PreconditionError(f"average degree 2*{G.m}/{n} is not an even integer")
        dbar = G.m // n
    else:
        dbar = params.dbar
    if G.m != n * dbar:
        raise InfeasibleError(
            f"average degree must be 2*dbar = {2 * dbar}", {"reason": "edge-count", "edges": G.m, "required": n * dbar}
        )
    low = min(G.degrees()) if n else 0
    if low < dbar:
        raise InfeasibleError(f"minimum degree {low} is below dbar={dbar}", {"reason": "degree", "min_degree": low})

    oracle: OracleResult | None = None
    oracle_seconds = 0.0
    if use_oracle:
        started = time.perf_counter()
        oracle = orient_exact_oracle(G, dbar)
        oracle_seconds = time.perf_counter() - started
        if not oracle.feasible:
            raise InfeasibleError("no orientation with the requested out-degree exists", oracle.certificate)

    pairs = n * (n - 1) // 2
    p = params.p_hint if params.p_hint is not None else (G.m / pairs if pairs else 0.0)
    restarts = pick(params.restarts, "orientation", "restarts")
    hamilton_restarts = pick(None, "cycles", "hamilton_restarts")
    started = time.perf_counter()
    last_failure: ConstructionFailure | None = None
    for attempt in range(max(1, restarts)):
        rng = random.Random(params.seed * 1_000_003 + attempt)
        try:
            arcs, layers = _peel_layers(G, dbar, p, rng, hamilton_restarts)
        except ConstructionFailure as exc:
            last_failure = exc
            logger.info("orientation attempt %d failed: %s", attempt, exc)
            continue
        orientation = Orientation(n, tuple(arcs))
        if not _exact_out_degree(orientation, G, dbar):
            raise ConstructionFailure("composed orientation failed its out-degree check", {"dbar": dbar})
        logger.info("orientation: %d layers, attempt %d", len(layers), attempt)
        return OrientationResult(
            orientation, "layered", dbar, tuple(layers), attempt + 1,
            oracle_seconds, time.perf_counter() - started,
        )

    if oracle is None or oracle.orientation is None:
        details = last_failure.details if last_failure else {}
        raise ConstructionFailure("orientation loop failed after all restarts", details)
    logger.info("orientation: loop failed, using the flow orientation")
    return OrientationResult(
        oracle.orientation, "oracle", dbar, (), max(1, restarts), oracle_seconds, time.perf_counter() - started
    )


def layer_table(result: OrientationResult) -> list[dict[str, Any]]:
    return [
        {
            "t": s.t,
            "Z_before": str(s.imbalance_before),
            "Z_after": str(s.imbalance_after),
            "gap_before": s.gap_before,
            "gap_after": s.gap_after,
        }
        for s in result.layers
    ]


def check_orientation(G: SimpleGraph, orientation: Orientation, dbar: int) -> bool:
    return _exact_out_degree(orientation, G, dbar)

