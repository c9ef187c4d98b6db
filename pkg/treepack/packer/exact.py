"""小さな n 向けの厳密な詰め込み探索 (辺ビット集合上のバックトラック)。"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from ..exceptions import ConstructionFailure, PreconditionError
from ..graph_core import SimpleGraph
from ..settings import pick
from ..tree_tools import RootedForest, rooted_code
from .certificate import MODES, PackingCertificate, verify_certificate


logger = logging.getLogger(__name__)

FOUND = "found"
INFEASIBLE = "infeasible"
EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class ExactOutcome:
    status: str
    certificate: PackingCertificate | None
    nodes: int
    reason: str = ""

    @property
    def found(self) -> bool:
        return self.status == FOUND

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"status": self.status, "nodes": self.nodes}
        if self.reason:
            payload["reason"] = self.reason
        return payload


class _BudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class _Plan:
    """1本の木の配置順。order[k] の親は order 内で先に現れる (根は None)。"""

    tree_id: int
    n: int
    m: int
    order: tuple[int, ...]
    parent: tuple[int | None, ...]
    children: tuple[int, ...]
    code: str | None

    def sort_key(self) -> tuple[int, int, str, int]:
        return (-self.m, -self.n, self.code or "", self.tree_id)


def _plan(tree_id: int, T: RootedForest) -> _Plan:
    roots = []
    for r in T.roots:
        part = T.component(r)
        roots.append(min(part, key=lambda v: (-T.degree(v), v)))
    # 孤立点の成分は最後に置く (どこに置いても他の制約に影響しない)
    roots.sort(key=lambda r: T.degree(r) == 0)
    F = RootedForest.from_edges(T.n, T.edge_list(), roots)
    order = F.bfs_order()
    code = rooted_code(F, roots[0]) if len(roots) == 1 else None
    return _Plan(
        tree_id,
        T.n,
        T.m,
        order,
        tuple(F.parent[v] for v in order),
        tuple(len(F.children(v)) for v in order),
        code,
    )


def _normalise(trees: Mapping[int, RootedForest] | Sequence[RootedForest]) -> dict[int, RootedForest]:
    if isinstance(trees, Mapping):
        return dict(trees)
    return {i: T for i, T in enumerate(trees, start=1)}


def pack_exact(
    G: SimpleGraph,
    trees: Mapping[int, RootedForest] | Sequence[RootedForest],
    mode: str = "decompose",
    budget: int | None = None,
) -> ExactOutcome:
    """木を辺数の降順に、各木は最大次数の頂点からの BFS 順に1頂点ずつ置いていきます。

    完全グラフでは最初の木の根を頂点 0 に固定し、根付きで同型な木が続くときは根の像を
    非減少に揃える。budget はノード展開数の上限で、使い切れば "exhausted"。
    """

    if mode not in MODES:
        raise PreconditionError(f"mode must be one of {MODES}, got {mode!r}")
    family = _normalise(trees)
    limit = pick(budget, "packer", "exact_budget")
    total = sum(T.m for T in family.values())
    if (mode == "decompose" and total != G.m) or total > G.m:
        logger.info("pack_exact: edge count %d does not fit e(G)=%d (%s)", total, G.m, mode)
        return ExactOutcome(INFEASIBLE, None, 0, "edge-count")
    if any(T.n > G.n for T in family.values()):
        return ExactOutcome(INFEASIBLE, None, 0, "order")

    plans = sorted((_plan(tree_id, T) for tree_id, T in family.items()), key=_Plan.sort_key)
    n = G.n
    edge_bit = [[0] * n for _ in range(n)]
    incident = [0] * n
    for index, (u, v) in enumerate(G.edge_list()):
        bit = 1 << index
        edge_bit[u][v] = edge_bit[v][u] = bit
        incident[u] |= bit
        incident[v] |= bit
    neighbours = [sorted(G.neighbours(v)) for v in range(n)]
    complete = G.m == n * (n - 1) // 2 and n > 0

    images: list[list[int]] = [[-1] * p.n for p in plans]
    nodes = 0

    def free_degree(free: int, w: int) -> int:
        return (free & incident[w]).bit_count()

    def place(k: int, pos: int, free: int, used: int) -> bool:
        nonlocal nodes
        if k == len(plans):
            return True
        plan = plans[k]
        if pos == len(plan.order):
            return place(k + 1, 0, free, 0)
        nodes += 1
        if nodes > limit:
            raise _BudgetExceeded
        v = plan.order[pos]
        need = plan.children[pos]
        image = images[k]
        p = plan.parent[pos]
        if p is None:
            if need == 0:
                w = next((x for x in range(n) if not used >> x & 1), None)
                if w is None:
                    return False
                image[v] = w
                return place(k, pos + 1, free, used | 1 << w)
            if k == 0 and pos == 0 and complete:
                candidates: Sequence[int] = (0,)
            else:
                low = 0
                if pos == 0 and k > 0 and plan.code is not None and plan.code == plans[k - 1].code:
                    low = images[k - 1][plans[k - 1].order[0]]
                candidates = range(low, n)
            for w in candidates:
                if used >> w & 1 or free_degree(free, w) < need:
                    continue
                image[v] = w
                if place(k, pos + 1, free, used | 1 << w):
                    return True
            image[v] = -1
            return False
        wp = image[p]
        for w in neighbours[wp]:
            bit = edge_bit[wp][w]
            if used >> w & 1 or not free & bit:
                continue
            rest = free & ~bit
            if free_degree(rest, w) < need:
                continue
            image[v] = w
            if place(k, pos + 1, rest, used | 1 << w):
                return True
        image[v] = -1
        return False

    try:
        found = place(0, 0, G.full_edge_mask, 0)
    except _BudgetExceeded:
        logger.info("pack_exact: node budget %d exhausted", limit)
        return ExactOutcome(EXHAUSTED, None, nodes, "budget")
    if not found:
        logger.info("pack_exact: exhaustive search found no packing (%d nodes)", nodes)
        return ExactOutcome(INFEASIBLE, None, nodes, "exhaustive")

    cert = PackingCertificate.build(G, mode, [(plan.tree_id, images[k]) for k, plan in enumerate(plans)])
    result = verify_certificate(G, family, cert)
    if not result.ok:
        raise ConstructionFailure("exact search produced a certificate that fails verification", result.to_dict())
    logger.info("pack_exact: certificate found after %d nodes", nodes)
    return ExactOutcome(FOUND, cert, nodes)
