"""奇数長サイクル上の対称ランダムウォークと、それを使った木のブローアップへの埋め込み。

併せて、貪欲な森の埋め込み (事前配置付き) と、制約付きの辺選択を提供する。
"""

from __future__ import annotations

import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .diagnostics import check_k_independent
from .exceptions import ConstructionFailure, PreconditionError
from .graph_core import Edge, SimpleGraph, canonical, min_codegree
from .settings import pick
from .tree_tools import RootedForest, TreeDecompParams, decompose_rooted


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PartialEmbedding:
    """森の頂点 → ホスト頂点の単射な部分写像。"""

    mapping: Mapping[int, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.mapping)

    def __getitem__(self, v: int) -> int:
        return self.mapping[v]

    def __contains__(self, v: object) -> bool:
        return v in self.mapping

    def get(self, v: int) -> int | None:
        return self.mapping.get(v)

    def items(self) -> Iterable[tuple[int, int]]:
        return self.mapping.items()

    def image(self) -> set[int]:
        return set(self.mapping.values())

    def is_injective(self) -> bool:
        return len(set(self.mapping.values())) == len(self.mapping)

    def image_edges(self, F: RootedForest) -> list[Edge]:
        return sorted(
            canonical(self.mapping[u], self.mapping[v])
            for u, v in F.edge_list()
            if u in self.mapping and v in self.mapping
        )

    def as_list(self, n: int) -> list[int]:
        missing = [v for v in range(n) if v not in self.mapping]
        if missing:
            raise PreconditionError(f"embedding is partial: vertex {missing[0]} unmapped")
        return [self.mapping[v] for v in range(n)]


def verify_embedding(
    F: RootedForest,
    adjacent: SimpleGraph | Callable[[int, int], bool],
    embedding: PartialEmbedding | Mapping[int, int],
    total: bool = True,
) -> dict[str, Any] | None:
    """単射性と隣接保存を調べ、違反があればその内容を返します (問題なければ None)。"""

    mapping = embedding.mapping if isinstance(embedding, PartialEmbedding) else embedding
    has_edge = adjacent.has_edge if isinstance(adjacent, SimpleGraph) else adjacent
    if total:
        for v in range(F.n):
            if v not in mapping:
                return {"reason": "unmapped", "vertex": v}
    owner: dict[int, int] = {}
    for v, w in mapping.items():
        if w in owner:
            return {"reason": "not-injective", "vertices": [owner[w], v], "image": w}
        owner[w] = v
    for u, v in F.edge_list():
        if u in mapping and v in mapping and not has_edge(mapping[u], mapping[v]):
            return {"reason": "non-edge", "tree_edge": [u, v], "image": [mapping[u], mapping[v]]}
    return None


# ---- ランダムウォーク ----


def transition_matrix(ell: int) -> np.ndarray:
    if ell < 3:
        raise PreconditionError(f"cycle length must be >= 3, got {ell}")
    P = np.zeros((ell, ell))
    for i in range(ell):
        P[i, (i + 1) % ell] += 0.5
        P[i, (i - 1) % ell] += 0.5
    return P


def exact_walk_distribution(ell: int, t: int, start: int = 0) -> np.ndarray:
    """遷移行列の t 乗から求めた Pr[X_t = i]。"""

    dist = np.zeros(ell)
    dist[start % ell] = 1.0
    return dist @ np.linalg.matrix_power(transition_matrix(ell), t)


def mixing_rate(ell: int) -> float:
    """|Pr[X_t = i] - 1/ℓ| ≤ γ^t となる γ。偶数長では混合しないので 1。"""

    if ell < 3:
        raise PreconditionError(f"cycle length must be >= 3, got {ell}")
    if ell % 2 == 0:
        return 1.0
    return abs(math.cos(math.pi / ell))


@dataclass(frozen=True, eq=False)
class WalkTable:
    ell: int
    start: int
    trials: int
    steps: tuple[int, ...]
    empirical: np.ndarray

    def exact(self) -> np.ndarray:
        return np.vstack([exact_walk_distribution(self.ell, t, self.start) for t in self.steps])

    def standard_errors(self) -> np.ndarray:
        p = self.exact()
        return np.sqrt(p * (1.0 - p) / self.trials)

    def within_standard_errors(self, k: float = 4.0) -> bool:
        gap = np.abs(self.empirical - self.exact())
        return bool(np.all(gap <= k * self.standard_errors() + 1e-12))

    def max_deviation_from_uniform(self) -> np.ndarray:
        return np.max(np.abs(self.empirical - 1.0 / self.ell), axis=1)

    def row(self, t: int) -> np.ndarray:
        return self.empirical[self.steps.index(t)]

    def to_frame(self) -> pd.DataFrame:
        exact = self.exact()
        errors = self.standard_errors()
        records = [
            {
                "t": t,
                "cell": i,
                "empirical": float(self.empirical[r, i]),
                "exact": float(exact[r, i]),
                "stderr": float(errors[r, i]),
            }
            for r, t in enumerate(self.steps)
            for i in range(self.ell)
        ]
        return pd.DataFrame.from_records(records, columns=["t", "cell", "empirical", "exact", "stderr"])


def simulate_walk(
    ell: int,
    steps: Sequence[int],
    trials: int,
    seed: int,
    start: int = 0,
) -> WalkTable:
    """trials 本のウォークを同時に進め、指定時刻の経験分布を表にします。"""

    if ell < 3:
        raise PreconditionError(f"cycle length must be >= 3, got {ell}")
    if trials < 1:
        raise PreconditionError(f"trials must be >= 1, got {trials}")
    wanted = tuple(sorted(set(int(t) for t in steps)))
    if not wanted or wanted[0] < 0:
        raise PreconditionError("steps must be a nonempty list of non-negative integers")
    rng = np.random.default_rng(seed)
    positions = np.full(trials, start % ell, dtype=np.int64)
    rows: dict[int, np.ndarray] = {}
    if 0 in wanted:
        rows[0] = np.bincount(positions, minlength=ell) / trials
    for t in range(1, wanted[-1] + 1):
        positions = (positions + rng.integers(0, 2, size=trials) * 2 - 1) % ell
        if t in wanted:
            rows[t] = np.bincount(positions, minlength=ell) / trials
    return WalkTable(ell, start % ell, trials, wanted, np.vstack([rows[t] for t in wanted]))


# ---- ブローアップへの埋め込み ----


@dataclass(frozen=True)
class CycleBlowup:
    """C(ℓ, k): 長さ ℓ のサイクルの各頂点を大きさ k のクラスタに膨らませたもの。

    host を与えない場合は隣り合うクラスタ間が完全二部グラフ (暗黙表現)。
    """

    ell: int
    k: int
    clusters: tuple[tuple[int, ...], ...]
    host: SimpleGraph | None = None
    _cluster_of: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.ell < 3:
            raise PreconditionError(f"a cycle blow-up needs ell >= 3, got {self.ell}")
        if len(self.clusters) != self.ell or any(len(c) != self.k for c in self.clusters):
            raise PreconditionError(f"expected {self.ell} clusters of size {self.k}")
        table = {v: i for i, cluster in enumerate(self.clusters) for v in cluster}
        if len(table) != self.ell * self.k:
            raise PreconditionError("clusters overlap")
        object.__setattr__(self, "_cluster_of", table)

    @classmethod
    def complete(cls, ell: int, k: int) -> "CycleBlowup":
        return cls(ell, k, tuple(tuple(range(i * k, (i + 1) * k)) for i in range(ell)))

    @property
    def n(self) -> int:
        return self.ell * self.k

    def cluster_index(self, v: int) -> int:
        return self._cluster_of[v]

    def consecutive(self, i: int, j: int) -> bool:
        return (i - j) % self.ell in (1, self.ell - 1)

    def adjacent(self, u: int, v: int) -> bool:
        if self.host is not None:
            return self.host.has_edge(u, v)
        if u not in self._cluster_of or v not in self._cluster_of:
            return False
        return self.consecutive(self._cluster_of[u], self._cluster_of[v])

    def is_complete(self) -> bool:
        if self.host is None:
            return True
        for u, v in self.host.edge_list():
            if u not in self._cluster_of or v not in self._cluster_of:
                return False
            if not self.consecutive(self._cluster_of[u], self._cluster_of[v]):
                return False
        return self.host.m == self.ell * self.k * self.k

    def graph(self) -> SimpleGraph:
        if self.host is not None:
            return self.host
        edges = [
            canonical(u, v)
            for i in range(self.ell)
            for u in self.clusters[i]
            for v in self.clusters[(i + 1) % self.ell]
        ]
        return SimpleGraph(max(self._cluster_of) + 1, frozenset(edges))


@dataclass(frozen=True)
class WalkEmbedParams:
    ell: int
    m: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.ell < 3 or self.ell % 2 == 0:
            raise PreconditionError(f"ell must be an odd integer >= 3, got {self.ell}")
        if self.m < 1:
            raise PreconditionError(f"capacity m must be >= 1, got {self.m}")

    @classmethod
    def with_slack(cls, n: int, ell: int, slack: float | None = None, seed: int = 0) -> "WalkEmbedParams":
        sigma = pick(slack, "walk", "capacity_slack")
        return cls(ell, max(1, math.ceil((1 + sigma) * n / ell)), seed)


@dataclass(frozen=True)
class ClusterAssignment:
    ell: int
    seed: int
    cluster_of: tuple[int, ...]
    loads: tuple[int, ...]
    pair_loads: tuple[int, ...]

    @property
    def max_load(self) -> int:
        return max(self.loads)

    @property
    def max_pair_load(self) -> int:
        return max(self.pair_loads)

    def fits(self, m: int) -> bool:
        return self.max_load <= m and self.max_pair_load <= m


def walk_assign_tree(
    T: RootedForest,
    params: WalkEmbedParams,
    chunk_delta: float | None = None,
) -> ClusterAssignment:
    """木の頂点をクラスタへ割り当てます。各辺に ±1 のラベルを振り、親のクラスタから1歩進める。

    木をまず t = n^(1-δ) で根付き部分木に分け、根からの距離の昇順に各部分を BFS 順で処理する。
    """

    if len(T.roots) != 1:
        raise PreconditionError(f"walk_assign_tree needs a single tree, got {len(T.roots)} components")
    ell, n = params.ell, T.n
    exponent = pick(chunk_delta, "walk", "chunk_delta")
    t = min(n, max(1, math.floor(n ** (1 - exponent))))
    parts = decompose_rooted(T, TreeDecompParams(t, max(2, T.degree_bound(), T.max_degree())))
    ordered = sorted(range(len(parts)), key=lambda i: (parts[i].distance_from_root, i))

    rng = np.random.default_rng(params.seed)
    start_cluster = int(rng.integers(ell))
    labels = rng.integers(0, 2, size=n) * 2 - 1
    cluster = [-1] * n
    cursor = 0
    for index in ordered:
        for v in parts[index].vertices:
            p = T.parent[v]
            if p is None:
                cluster[v] = start_cluster
            else:
                if cluster[p] < 0:
                    raise ConstructionFailure("chunk processed before its parent chunk", {"vertex": v})
                cluster[v] = (cluster[p] + int(labels[cursor])) % ell
            cursor += 1

    loads = [0] * ell
    for c in cluster:
        loads[c] += 1
    pair_loads = [0] * ell
    for u, v in T.edge_list():
        a, b = cluster[u], cluster[v]
        if (a + 1) % ell == b:
            pair_loads[a] += 1
        elif (b + 1) % ell == a:
            pair_loads[b] += 1
        else:
            raise ConstructionFailure("tree edge between non-consecutive clusters", {"edge": [u, v]})
    logger.debug("walk_assign_tree seed=%d max_load=%d max_pair=%d", params.seed, max(loads), max(pair_loads))
    return ClusterAssignment(ell, params.seed, tuple(cluster), tuple(loads), tuple(pair_loads))


@dataclass(frozen=True)
class WalkAttempt:
    seed: int
    max_cluster_load: int
    max_pair_load: int
    capacity: int
    ok: bool


@dataclass(frozen=True)
class WalkEmbedOutcome:
    ok: bool
    embedding: PartialEmbedding | None
    assignment: ClusterAssignment
    attempts: tuple[WalkAttempt, ...]

    def attempts_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [a.__dict__ for a in self.attempts],
            columns=["seed", "max_cluster_load", "max_pair_load", "capacity", "ok"],
        )


def realize_assignment(assignment: ClusterAssignment, blowup: CycleBlowup) -> PartialEmbedding:
    """各クラスタ内で任意 (番号順) に単射を取ります。"""

    cursor = [0] * blowup.ell
    mapping: dict[int, int] = {}
    for v, c in enumerate(assignment.cluster_of):
        mapping[v] = blowup.clusters[c][cursor[c]]
        cursor[c] += 1
    return PartialEmbedding(mapping)


def walk_embed_tree(
    T: RootedForest,
    blowup: CycleBlowup,
    params: WalkEmbedParams,
    retry_limit: int | None = None,
    chunk_delta: float | None = None,
) -> WalkEmbedOutcome:
    if not blowup.is_complete():
        raise PreconditionError("target is not a complete cycle blow-up")
    if blowup.ell != params.ell:
        raise PreconditionError(f"blow-up has {blowup.ell} clusters but params ask for ell={params.ell}")
    if blowup.k < params.m:
        raise PreconditionError(f"cluster size {blowup.k} is below the capacity m={params.m}")
    if params.m * params.ell < T.n:
        raise PreconditionError(f"capacity m={params.m} is below ceil(n/ell) for n={T.n}")

    limit = pick(retry_limit, "walk", "retry_limit")
    attempts: list[WalkAttempt] = []
    assignment: ClusterAssignment | None = None
    for i in range(limit):
        current = replace(params, seed=params.seed + i)
        assignment = walk_assign_tree(T, current, chunk_delta)
        ok = assignment.fits(params.m)
        attempts.append(
            WalkAttempt(current.seed, assignment.max_load, assignment.max_pair_load, params.m, ok)
        )
        if not ok:
            logger.info(
                "walk_embed_tree: seed %d over capacity (load %d, pair %d, m %d)",
                current.seed, assignment.max_load, assignment.max_pair_load, params.m,
            )
            continue
        embedding = realize_assignment(assignment, blowup)
        problem = verify_embedding(T, blowup.adjacent, embedding)
        if problem is not None:
            raise ConstructionFailure("realized walk embedding failed verification", problem)
        return WalkEmbedOutcome(True, embedding, assignment, tuple(attempts))
    assert assignment is not None
    return WalkEmbedOutcome(False, None, assignment, tuple(attempts))


# ---- 貪欲な森の埋め込み ----


def embed_forest_greedy(
    F: RootedForest,
    G: SimpleGraph,
    I: Iterable[int],
    phi_prime: PartialEmbedding | Mapping[int, int],
    check_preconditions: bool = True,
    allowed: Iterable[int] | None = None,
    order_key: Callable[[int, int], Any] | None = None,
    rng: random.Random | None = None,
) -> PartialEmbedding:
    """φ' を延長して F 全体を G に埋め込みます。

    各頂点は BFS 順 (先行する隣接頂点は高々1つ) に処理し、親の像と、事前配置済みの隣接頂点の像の
    共通近傍から番号最小の頂点を選ぶ。check_preconditions=False では I の 3-独立性と共通近傍数の
    仮定を確かめず、行き詰まりを ConstructionFailure で報告する。
    """

    pins = dict(phi_prime.mapping if isinstance(phi_prime, PartialEmbedding) else phi_prime)
    I_set = frozenset(I)
    if set(pins) != set(I_set):
        raise PreconditionError("the pre-embedding must be defined exactly on I")
    if len(set(pins.values())) != len(pins):
        raise PreconditionError("the pre-embedding is not injective")
    for v, w in pins.items():
        if not 0 <= v < F.n or not 0 <= w < G.n:
            raise PreconditionError(f"pre-embedding entry {v} -> {w} out of range")
    if check_preconditions:
        clash = check_k_independent(F, I_set, 3)
        if clash is not None:
            raise PreconditionError(f"I is not 3-independent: {clash[0]} and {clash[1]} are too close")
        codegree = min_codegree(G)
        if codegree < F.n:
            raise PreconditionError(f"minimum codegree {codegree} is below |F| = {F.n}")

    pool = frozenset(range(G.n)) if allowed is None else frozenset(allowed)
    mapping = dict(pins)
    used = set(pins.values())
    for v in F.bfs_order():
        p = F.parent[v]
        if v in pins:
            if p is not None and not G.has_edge(mapping[p], pins[v]):
                raise ConstructionFailure(
                    "pinned vertex is not adjacent to its parent's image",
                    {"vertex": v, "image": pins[v], "parent_image": mapping[p]},
                )
            continue
        anchors = [mapping[p]] if p is not None else []
        anchors += [pins[w] for w in sorted(F.neighbours(v)) if w in pins and w != p]
        if anchors:
            candidates = set(G.neighbours(anchors[0]))
            for a in anchors[1:]:
                candidates &= G.neighbours(a)
            candidates &= pool
        else:
            candidates = set(pool)
        candidates -= used
        if not candidates:
            message = "greedy forest embedding exhausted its candidates"
            if check_preconditions:
                message = "internal: " + message + " although the hypotheses held"
            raise ConstructionFailure(message, {"vertex": v, "placed": len(mapping), "anchors": anchors})
        if rng is not None:
            w = rng.choice(sorted(candidates))
        elif order_key is not None:
            w = min(candidates, key=lambda c: (order_key(v, c), c))
        else:
            w = min(candidates)
        mapping[v] = w
        used.add(w)
    embedding = PartialEmbedding(mapping)
    problem = verify_embedding(F, G, embedding)
    if problem is not None:
        raise ConstructionFailure("greedy forest embedding failed verification", problem)
    return embedding


# ---- 制約付きの辺選択 ----


def sparse_edge_embedding(
    G: SimpleGraph,
    A: Iterable[int],
    sources: Sequence[int],
    W: Sequence[Iterable[int]] | None = None,
    H: Iterable[tuple[int, int]] | SimpleGraph | None = None,
    s: int = 1,
) -> list[Edge]:
    """各 u_i から A \\ W_i への辺 u_i v_i を、重複なし・各 v の重複度 ≤ s・衝突制約付きで選びます。

    返り値は (u_i, v_i) の列 (入力順)。
    """

    A_set = frozenset(A)
    m = len(sources)
    if s < 1:
        raise PreconditionError(f"multiplicity cap s must be >= 1, got {s}")
    forbidden_sets = [frozenset(w) for w in W] if W is not None else [frozenset()] * m
    if len(forbidden_sets) != m:
        raise PreconditionError(f"expected {m} forbidden sets, got {len(forbidden_sets)}")
    if isinstance(H, SimpleGraph):
        conflict_edges = list(H.edge_list())
    else:
        conflict_edges = [canonical(i, j) for i, j in (H or [])]
    conflicts: list[set[int]] = [set() for _ in range(m)]
    for i, j in conflict_edges:
        if not (0 <= i < m and 0 <= j < m) or i == j:
            raise PreconditionError(f"conflict edge {(i, j)} is invalid for {m} sources")
        conflicts[i].add(j)
        conflicts[j].add(i)
    delta = max(max(Counter(sources).values(), default=0), max((len(c) for c in conflicts), default=0))
    need = 3 * delta + Fraction(m, s) + s
    for i, u in enumerate(sources):
        room = len(G.neighbours(u) & A_set) - len(forbidden_sets[i])
        if room < need:
            raise PreconditionError(
                f"source {i} (vertex {u}) has room {room} below 3*Delta + m/s + s = {need}"
            )

    chosen: list[Edge] = []
    used_edges: set[Edge] = set()
    load: Counter[int] = Counter()
    for i, u in enumerate(sources):
        blocked = set(forbidden_sets[i]) | {u}
        for j in conflicts[i]:
            blocked.add(sources[j])
            if j < i:
                blocked.add(chosen[j][1])
        pick_w = next(
            (
                w for w in sorted(G.neighbours(u) & A_set)
                if w not in blocked and load[w] < s and canonical(u, w) not in used_edges
            ),
            None,
        )
        if pick_w is None:
            raise ConstructionFailure("no admissible target for source", {"index": i, "vertex": u})
        chosen.append((u, pick_w))
        used_edges.add(canonical(u, pick_w))
        load[pick_w] += 1

    _recheck_sparse_edges(chosen, A_set, forbidden_sets, conflict_edges, s)
    return chosen


def _recheck_sparse_edges(
    chosen: list[Edge],
    A_set: frozenset[int],
    forbidden_sets: list[frozenset[int]],
    conflict_edges: list[Edge],
    s: int,
) -> None:
    if len({canonical(u, v) for u, v in chosen}) != len(chosen):
        raise ConstructionFailure("selected edges are not distinct", {})
    load = Counter(v for _, v in chosen)
    if load and max(load.values()) > s:
        raise ConstructionFailure("target multiplicity above s", {"s": s})
    for i, (u, v) in enumerate(chosen):
        if v not in A_set or v in forbidden_sets[i]:
            raise ConstructionFailure("target outside A minus W", {"index": i})
    for i, j in conflict_edges:
        if chosen[i][1] in chosen[j] or chosen[j][1] in chosen[i]:
            raise ConstructionFailure("conflict constraint violated", {"pair": [i, j]})
