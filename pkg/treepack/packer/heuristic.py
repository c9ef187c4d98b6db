"""渦・被覆・吸収器・厳密探索を順につなぐ発見的な分解パイプライン。

1. 渦を作り最終段 A_last を得る
2. A_last の中に吸収領域を選び、吸収器用と被覆用の木を取り置く
3. 残りの木を大きい順に貪欲に埋め込む (深い段を避け、ウォークのクラスタで負荷を分散)
4. 取り置いた木で例外頂点・B 内の辺・偶奇・A–B の辺を覆う (失敗した木は戻す)
5. 残りの小さな木を厳密探索で詰める (行き詰まれば貪欲に置いた木を外して再探索)
6. 吸収領域の辺を吸収器の葉で吸い取り、証明書を検証する
"""

from __future__ import annotations

import logging
import math
import random
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterator, Mapping, Sequence

import networkx as nx

from ..covering import (
    ReservedTree,
    complete_embedding,
    cover_exceptional_vertex,
    cover_matching_with_tree,
    cover_seagulls_with_tree,
    fix_parity_with_tree,
)
from ..cycle_machinery import seagull_decompose
from ..exceptions import ConstructionFailure, InfeasibleError, PreconditionError, TreePackError
from ..graph_core import BipartitionView, Edge, SimpleGraph, bfs_distances, canonical, induced
from ..orientation import orient_exact_oracle
from ..settings import default
from ..tree_tools import RootedForest, rerooted
from ..walk_embedder import PartialEmbedding, WalkEmbedParams, walk_assign_tree
from .absorber import AbsorberState, absorb_leftover, prepare_absorber
from .certificate import PackingCertificate, verify_certificate
from .exact import pack_exact
from .vortex import MIN_ORDER, Vortex, build_vortex


logger = logging.getLogger(__name__)


def _heuristic(key: str) -> Callable[[], Any]:
    return lambda: default("heuristic", key)


@dataclass(frozen=True)
class HeuristicConfig:
    seed: int = 0
    restarts: int = field(default_factory=_heuristic("restarts"))
    gamma: float = field(default_factory=_heuristic("gamma"))
    epsilon: float = field(default_factory=_heuristic("epsilon"))
    vortex_levels: int = field(default_factory=_heuristic("vortex_levels"))
    reserve_fraction: float = field(default_factory=_heuristic("reserve_fraction"))
    absorber_multiplicity: int = field(default_factory=_heuristic("absorber_multiplicity"))
    exact_finish_edges: int = field(default_factory=_heuristic("exact_finish_edges"))
    exact_finish_budget: int = field(default_factory=_heuristic("exact_finish_budget"))
    finish_backoff: int = field(default_factory=_heuristic("finish_backoff"))
    walk_ell: int = field(default_factory=_heuristic("walk_ell"))
    walk_min_order: int = field(default_factory=_heuristic("walk_min_order"))
    cover_min_diameter: int = field(default_factory=_heuristic("cover_min_diameter"))
    greedy_backtracks: int = field(default_factory=_heuristic("greedy_backtracks"))
    backtrack_depth: int = field(default_factory=_heuristic("backtrack_depth"))
    stall_tail_edges: int = field(default_factory=_heuristic("stall_tail_edges"))
    tail_edges: int = field(default_factory=_heuristic("tail_edges"))
    tail_samples: int = field(default_factory=_heuristic("tail_samples"))
    time_limit: float = field(default_factory=_heuristic("time_limit"))
    vortex_slack: int = field(default_factory=lambda: default("packer", "vortex_slack"))
    vortex_retries: int = field(default_factory=lambda: default("packer", "vortex_retries"))
    exact_budget: int = field(default_factory=lambda: default("packer", "exact_budget"))
    covering: bool = True

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise PreconditionError(f"restarts must be >= 1, got {self.restarts}")
        if not 0 <= self.reserve_fraction < 1:
            raise PreconditionError(f"reserve_fraction must lie in [0, 1), got {self.reserve_fraction}")
        if self.vortex_levels < 0:
            raise PreconditionError(f"vortex_levels must be >= 0, got {self.vortex_levels}")


@dataclass(frozen=True)
class HeuristicOutcome:
    certificate: PackingCertificate | None
    report: dict[str, Any]

    @property
    def ok(self) -> bool:
        return self.certificate is not None


def _diameter_end(T: RootedForest) -> tuple[int, int]:
    """T の直径の一端と直径。"""

    first = bfs_distances(T, T.roots[0])  # type: ignore[arg-type]
    far = max(first, key=lambda v: (first[v], v))
    second = bfs_distances(T, far)  # type: ignore[arg-type]
    return far, max(second.values())


def _absorber_region(
    G: SimpleGraph,
    A_last: frozenset[int],
    budget: int,
    max_t: int,
    rng: random.Random,
) -> tuple[frozenset[int], int]:
    """e(G[S]) = t|S| (1 ≤ t ≤ max_t) で出次数 t の向き付けが存在し、辺数が budget 以下の最大の S。"""

    pool = sorted(A_last)
    rng.shuffle(pool)
    for a in range(len(pool), 2, -1):
        S = sorted(pool[:a])
        H = induced(G, S)
        if H.m == 0 or H.m % a or H.m > budget:
            continue
        t = H.m // a
        if t > max_t:
            continue
        if orient_exact_oracle(H, t).feasible:
            return frozenset(S), t
    return frozenset(), 0


def _residual_parts(H: SimpleGraph, removed: set[Edge]) -> list[tuple[int, int]]:
    """H から removed を除いたグラフの、辺を持つ成分ごとの (辺数, 頂点数)。"""

    graph = nx.Graph()
    graph.add_edges_from(e for e in H.edges if e not in removed)
    return sorted(
        ((graph.subgraph(part).number_of_edges(), len(part)) for part in nx.connected_components(graph)),
        reverse=True,
    )


def _tail_feasible(parts: Sequence[tuple[int, int]], sizes: Sequence[int], limit: int = 20_000) -> bool:
    """各成分に木を割り振って辺数をちょうど使い切れるか (木の頂点数は成分の頂点数以下)。

    探索ノードが limit に達したら可能とみなす。
    """

    items = sorted((m for m in sizes if m > 0), reverse=True)
    capacity = [e for e, _ in parts]
    order = [v for _, v in parts]
    if sum(items) != sum(capacity):
        return False
    budget = [limit]

    def place(k: int) -> bool:
        if k == len(items):
            return True
        budget[0] -= 1
        if budget[0] < 0:
            return True
        smallest = items[-1]
        if any(0 < c < smallest for c in capacity):
            return False
        m = items[k]
        tried: set[tuple[int, int]] = set()
        for j, c in enumerate(capacity):
            if c < m or order[j] < m + 1 or (c, order[j]) in tried:
                continue
            tried.add((c, order[j]))
            capacity[j] -= m
            found = place(k + 1)
            capacity[j] += m
            if found:
                return True
        return False

    return place(0)


class _Attempt:
    """1回分の試行。free は未使用の辺、maps は木ごとの頂点写像。"""

    def __init__(self, G: SimpleGraph, family: Mapping[int, RootedForest], config: HeuristicConfig, seed: int) -> None:
        self.G = G
        self.family = family
        self.config = config
        self.seed = seed
        self.rng = random.Random(seed)
        self.free: set[Edge] = set(G.edges)
        self.inner: frozenset[Edge] = frozenset()
        self.maps: dict[int, dict[int, int]] = {}
        self.greedy_order: list[int] = []
        self.vortex: Vortex | None = None
        self.absorber: AbsorberState | None = None
        self.stats: dict[str, Any] = {"seed": seed}

    # ---- 共通 ----

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        except TreePackError as exc:
            details = dict(getattr(exc, "details", {}))
            details.update({"phase": name, "residual_edges": len(self.free)})
            raise ConstructionFailure(f"{name}: {exc}", details) from exc
        finally:
            self.stats.setdefault("seconds", {})[name] = round(time.perf_counter() - started, 6)
        logger.info("heuristic seed %d: phase %s done (%d edges left)", self.seed, name, len(self.free))

    def residual(self) -> SimpleGraph:
        return SimpleGraph(self.G.n, frozenset(self.free - self.inner))

    def commit(self, tree_id: int, embedding: PartialEmbedding | Mapping[int, int]) -> None:
        mapping = dict(embedding.mapping if isinstance(embedding, PartialEmbedding) else embedding)
        T = self.family[tree_id]
        edges = {canonical(mapping[u], mapping[v]) for u, v in T.edge_list()}
        if not edges <= self.free:
            raise ConstructionFailure("embedding reuses an edge", {"tree_id": tree_id})
        self.free -= edges
        self.maps[tree_id] = mapping

    def release(self, tree_id: int) -> None:
        mapping = self.maps.pop(tree_id)
        T = self.family[tree_id]
        self.free |= {canonical(mapping[u], mapping[v]) for u, v in T.edge_list()}

    def unplaced(self) -> list[int]:
        return [i for i in self.family if i not in self.maps]

    def unplaced_edges(self, exclude: frozenset[int] = frozenset()) -> int:
        return sum(self.family[i].m for i in self.unplaced() if i not in exclude)

    # ---- 段階 ----

    def build_levels(self) -> None:
        c = self.config
        if c.vortex_levels == 0 or self.G.n < MIN_ORDER:
            self.stats["vortex"] = None
            return
        self.vortex = build_vortex(
            self.G, c.gamma, c.epsilon, c.vortex_slack, self.seed, c.vortex_levels, c.vortex_retries
        )
        self.stats["vortex"] = self.vortex.to_dict()

    def reserve(self) -> tuple[list[tuple[int, RootedForest]], list[int]]:
        """吸収器用の木 (小さい順) と被覆用の木 (直径が十分な小さい順) を取り置きます。"""

        c = self.config
        reserve_count = math.floor(c.reserve_fraction * len(self.family))
        candidates = sorted(
            (i for i, T in self.family.items() if T.n >= 2 and len(T.roots) == 1),
            key=lambda i: (self.family[i].m, i),
        )
        absorber_trees: list[tuple[int, RootedForest]] = []
        if self.vortex is not None:
            region, t = _absorber_region(
                self.G, self.vortex.last, min(reserve_count, len(candidates)), c.absorber_multiplicity, self.rng
            )
            if t:
                self.inner = frozenset(e for e in self.G.edges if e[0] in region and e[1] in region)
                absorber_trees = [(i, self.family[i]) for i in candidates[: t * len(region)]]
                self.absorber = prepare_absorber(
                    self.residual(),
                    absorber_trees,
                    region,
                    t,
                    self.seed,
                    outside=frozenset(range(self.G.n)) - region,
                )
                for entry in self.absorber.entries:
                    self.free -= set(entry.body_edges())
        self.stats["absorber"] = self.absorber.summary() if self.absorber else None

        taken = {i for i, _ in absorber_trees}
        pool = []
        for i in sorted(self.family, key=lambda j: (self.family[j].m, j)):
            if len(pool) >= max(0, reserve_count - len(taken)):
                break
            T = self.family[i]
            if i in taken or len(T.roots) != 1 or T.n < 2:
                continue
            if _diameter_end(T)[1] >= c.cover_min_diameter:
                pool.append(i)
        self.stats["cover_pool"] = len(pool)
        return absorber_trees, pool

    def _order_key(self, tree_id: int, T: RootedForest, H: SimpleGraph) -> Callable[[int, int], Any]:
        degrees = H.degrees()
        level = self.vortex.level_of if self.vortex is not None else (lambda w: 0)
        c = self.config
        if T.n >= c.walk_min_order and len(T.roots) == 1:
            params = WalkEmbedParams.with_slack(T.n, c.walk_ell, seed=self.seed * 7919 + tree_id)
            cluster = walk_assign_tree(T, params).cluster_of
            hosts = list(range(H.n))
            self.rng.shuffle(hosts)
            group = {w: i % c.walk_ell for i, w in enumerate(hosts)}
            return lambda v, w: (group[w] != cluster[v], level(w), -degrees[w])
        return lambda v, w: (level(w), -degrees[w])

    def _salted(self, tree_id: int, salt: int) -> int:
        return self.seed * 1_000_003 + tree_id * 7919 + salt * 104_729

    @property
    def absorber_ids(self) -> frozenset[int]:
        return frozenset(e.tree_id for e in self.absorber.entries) if self.absorber else frozenset()

    def place_greedy(self, tree_id: int, salt: int = 0) -> None:
        T = self.family[tree_id]
        H = self.residual()
        key = self._order_key(tree_id, T, H)
        embedding = complete_embedding(
            T, H, {}, range(H.n), self._salted(tree_id, salt), order_key=key, match_leaves=True
        )
        self.commit(tree_id, embedding)
        self.greedy_order.append(tree_id)

    def place_scored(self, tree_id: int, salt: int = 0) -> None:
        """末尾の木。何通りか置いてみて、残りグラフが残りの木で割り切れそうなものを選ぶ。"""

        T = self.family[tree_id]
        H = self.residual()
        key = self._order_key(tree_id, T, H)
        others = [self.family[i].m for i in self.unplaced() if i != tree_id and i not in self.absorber_ids]
        best: tuple[tuple[bool, int], PartialEmbedding] | None = None
        for sample in range(self.config.tail_samples):
            try:
                embedding = complete_embedding(
                    T, H, {}, range(H.n), self._salted(tree_id, salt) + 7907 * sample,
                    attempts=0, order_key=key, match_leaves=True,
                )
            except ConstructionFailure:
                continue
            parts = _residual_parts(H, set(embedding.image_edges(T)))
            score = (not _tail_feasible(parts, others), len(parts))
            if best is None or score < best[0]:
                best = (score, embedding)
            if score == (False, 1):
                break
        if best is None:
            raise ConstructionFailure("no sampled placement of the tree fit", {"tree_id": tree_id})
        self.commit(tree_id, best[1])
        self.greedy_order.append(tree_id)

    def _fill(self, exclude: frozenset[int], salt: int) -> bool:
        """exclude 以外の未配置の木を大きい順に置き、残りが exact_finish_edges 以下になったら止めます。

        置けなければ直前に置いた木を外して別の乱数で置き直す。やり直しが尽きたら True (行き詰まり)。
        """

        c = self.config
        stalls = 0
        while self.unplaced_edges(exclude) > c.exact_finish_edges:
            rest = [i for i in self.unplaced() if i not in exclude]
            tree_id = min(rest, key=lambda i: (-self.family[i].m, i))
            try:
                if self.unplaced_edges(exclude) <= c.tail_edges:
                    self.place_scored(tree_id, salt + stalls)
                else:
                    self.place_greedy(tree_id, salt + stalls)
            except ConstructionFailure as exc:
                stalls += 1
                self.stats["backtracks"] = self.stats.get("backtracks", 0) + 1
                logger.debug("tree %d did not fit (%s); backtrack %d", tree_id, exc, stalls)
                if stalls > c.greedy_backtracks:
                    return True
                for _ in range(min(stalls, c.backtrack_depth, len(self.greedy_order))):
                    self.release(self.greedy_order.pop())
        return False

    def bulk(self, hold: frozenset[int]) -> None:
        before = len(self.greedy_order)
        stalled = self._fill(hold, salt=0)
        self.stats["bulk_trees"] = len(self.greedy_order) - before
        if stalled:
            self.stats["bulk_stalled"] = self.unplaced_edges(hold)
            logger.info("heuristic seed %d: bulk stalled with %d edges unplaced", self.seed, self.unplaced_edges(hold))

    def cover(self, pool: list[int]) -> None:
        counts = {"exceptional": 0, "matching": 0, "parity": 0, "seagull": 0}
        remaining = list(pool)
        for name, step in (
            ("exceptional", self._cover_exceptional),
            ("matching", self._cover_matching),
            ("parity", self._cover_parity),
            ("seagull", self._cover_seagulls),
        ):
            for tree_id in list(remaining):
                T = self.family[tree_id]
                start, _ = _diameter_end(T)
                reserved = ReservedTree(rerooted(T, start))
                try:
                    embedding = step(reserved, self.residual())
                except TreePackError as exc:
                    logger.debug("cover %s with tree %d skipped: %s", name, tree_id, exc)
                    continue
                if embedding is None:
                    break
                self.commit(tree_id, embedding)
                remaining.remove(tree_id)
                counts[name] += 1
                break
        self.stats["cover"] = counts

    def _heavy(self, R: SimpleGraph) -> frozenset[int]:
        degrees = R.degrees()
        average = sum(degrees) / max(1, R.n)
        return frozenset(v for v in range(R.n) if degrees[v] > average)

    def _cover_exceptional(self, reserved: ReservedTree, R: SimpleGraph) -> PartialEmbedding | None:
        degrees = R.degrees()
        average = sum(degrees) / max(1, R.n)
        v0 = max(range(R.n), key=lambda v: (degrees[v], -v))
        if degrees[v0] < 2 or degrees[v0] <= 2 * average:
            return None
        result = cover_exceptional_vertex(
            [reserved], R, v0, frozenset(range(R.n)) - {v0}, seed=self.seed
        )
        if not result.embeddings:
            raise ConstructionFailure("exceptional forest did not fit", {"vertex": v0})
        return result.embeddings[0][1]

    def _cover_matching(self, reserved: ReservedTree, R: SimpleGraph) -> PartialEmbedding | None:
        B = self._heavy(R)
        matched: set[int] = set()
        M: list[tuple[int, int]] = []
        for u, v in R.edge_list():
            if u in B and v in B and u not in matched and v not in matched:
                M.append((u, v))
                matched.update((u, v))
        if not M:
            return None
        A = frozenset(range(R.n)) - B
        for k in (3, 2, 1):
            if k > len(M):
                continue
            try:
                return cover_matching_with_tree(reserved, R, M[:k], A, self.seed)
            except ConstructionFailure:
                continue
        raise ConstructionFailure("no matching prefix could be covered", {"matching": len(M)})

    def _cover_parity(self, reserved: ReservedTree, R: SimpleGraph) -> PartialEmbedding | None:
        odd = [v for v in sorted(self._heavy(R)) if R.degree(v) % 2]
        if not odd:
            return None
        v = odd[0]
        u = min(R.neighbours(v))
        return fix_parity_with_tree(reserved, R, (u, v), frozenset(range(R.n)) - {v}, self.seed)

    def _cover_seagulls(self, reserved: ReservedTree, R: SimpleGraph) -> PartialEmbedding | None:
        B = self._heavy(R)
        if not B:
            return None
        A = frozenset(range(R.n)) - B
        flocks = seagull_decompose(BipartitionView(R, A, B))
        if not flocks:
            return None
        flock = flocks[0]
        for k in (2, 1):
            if k > len(flock):
                continue
            try:
                return cover_seagulls_with_tree(reserved, R, flock[:k], A, self.seed)[0]
            except ConstructionFailure:
                continue
        raise ConstructionFailure("no flock prefix could be covered", {"flock": len(flock)})

    def finish(self) -> None:
        """残りを厳密探索で詰めます。解けなければ末尾の貪欲な木を外して置き直し、別の残りグラフで再探索する。"""

        c = self.config
        exclude = self.absorber_ids
        stalled = self._fill(exclude, salt=1)
        rounds = nodes = filtered = 0
        while True:
            rest = {i: self.family[i] for i in self.unplaced() if i not in exclude}
            H = self.residual()
            tail = sum(T.m for T in rest.values())
            if tail != H.m:
                raise ConstructionFailure(
                    "residual edge count differs from the unplaced trees", {"residual": H.m, "trees": tail}
                )
            if tail > c.stall_tail_edges:
                reason = "tail-too-large"
            elif not _tail_feasible(_residual_parts(H, set()), [T.m for T in rest.values()]):
                reason = "components"
                filtered += 1
            else:
                outcome = pack_exact(H, rest, "decompose", c.exact_finish_budget)
                nodes += outcome.nodes
                if outcome.found and outcome.certificate is not None:
                    for tree_id, image in outcome.certificate.assignments:
                        self.commit(tree_id, dict(enumerate(image)))
                    break
                reason = outcome.reason or outcome.status
            if rounds >= c.finish_backoff or not self.greedy_order:
                raise ConstructionFailure(
                    "exact finish failed", {"reason": reason, "rounds": rounds, "tail_edges": tail}
                )
            rounds += 1
            logger.debug("exact finish round %d: %s on %d edges", rounds, reason, tail)
            for _ in range(min(1 + rounds // 3, len(self.greedy_order))):
                self.release(self.greedy_order.pop())
            stalled = self._fill(exclude, salt=1 + rounds * 1009)
        self.stats["finish"] = {"nodes": nodes, "rounds": rounds, "filtered": filtered, "stalled": stalled}

    def absorb(self) -> None:
        if self.free != set(self.inner):
            raise ConstructionFailure(
                "edges outside the absorber region remain", {"stray": len(self.free - self.inner)}
            )
        if self.absorber is None:
            return
        leftover = SimpleGraph(self.G.n, self.inner)
        for entry in self.absorber.entries:
            self.free |= set(entry.body_edges())
        for tree_id, embedding in absorb_leftover(leftover, self.absorber, self.seed):
            self.commit(tree_id, embedding)

    def run(self) -> PackingCertificate:
        with self.phase("vortex"):
            self.build_levels()
        with self.phase("reserve"):
            _, pool = self.reserve()
        hold = frozenset(pool) | frozenset(e.tree_id for e in (self.absorber.entries if self.absorber else ()))
        with self.phase("bulk"):
            self.bulk(hold)
        if self.config.covering:
            with self.phase("cover"):
                self.cover(pool)
        with self.phase("exact-finish"):
            self.finish()
        with self.phase("absorb"):
            self.absorb()

        cert = PackingCertificate.build(
            self.G,
            "decompose",
            {tree_id: [self.maps[tree_id][v] for v in range(T.n)] for tree_id, T in self.family.items()},
        )
        result = verify_certificate(self.G, self.family, cert)
        if not result.ok:
            raise ConstructionFailure("assembled certificate failed verification", result.to_dict())
        return cert


def _edgeless(G: SimpleGraph, family: Mapping[int, RootedForest]) -> PackingCertificate | None:
    if any(T.n > G.n for T in family.values()):
        return None
    return PackingCertificate.build(G, "decompose", {i: list(range(T.n)) for i, T in family.items()})


def pack_heuristic(
    G: SimpleGraph,
    trees: Mapping[int, RootedForest] | Sequence[RootedForest],
    config: HeuristicConfig | None = None,
) -> HeuristicOutcome:
    """G を trees に分解する発見的パイプライン。返す証明書は必ず検証済み。"""

    config = config or HeuristicConfig()
    family = dict(trees) if isinstance(trees, Mapping) else {i: T for i, T in enumerate(trees, start=1)}
    total = sum(T.m for T in family.values())
    if total != G.m:
        raise InfeasibleError(
            f"trees have {total} edges but the host has {G.m}", {"reason": "edge-count", "edges": G.m, "trees": total}
        )
    report: dict[str, Any] = {"n": G.n, "trees": len(family), "config": asdict(config), "attempts": []}

    if G.m == 0:
        cert = _edgeless(G, family)
        report["path"] = "trivial"
        if cert is None:
            report["reason"] = "order"
        return HeuristicOutcome(cert, report)

    if G.n < MIN_ORDER or total <= config.exact_finish_edges:
        outcome = pack_exact(G, family, "decompose", config.exact_budget)
        report["path"] = "exact"
        report["exact"] = outcome.to_dict()
        return HeuristicOutcome(outcome.certificate, report)

    report["path"] = "pipeline"
    started = time.perf_counter()
    for attempt in range(config.restarts):
        if attempt and time.perf_counter() - started > config.time_limit:
            report["timed_out"] = True
            logger.info("heuristic: time limit %.0fs reached after %d attempts", config.time_limit, attempt)
            break
        seed = config.seed + attempt
        runner = _Attempt(G, family, config, seed)
        try:
            cert = runner.run()
        except ConstructionFailure as exc:
            logger.info("heuristic attempt %d (seed %d) failed: %s", attempt, seed, exc)
            runner.stats.update({"ok": False, "phase": exc.details.get("phase"), "reason": str(exc)})
            runner.stats["residual_edges"] = exc.details.get("residual_edges", len(runner.free))
            report["attempts"].append(runner.stats)
            continue
        runner.stats["ok"] = True
        report["attempts"].append(runner.stats)
        logger.info("heuristic: verified decomposition on attempt %d", attempt)
        return HeuristicOutcome(cert, report)
    last = report["attempts"][-1] if report["attempts"] else {}
    report["phase"] = last.get("phase")
    report["residual_edges"] = last.get("residual_edges")
    return HeuristicOutcome(None, report)
