"""入れ子の頂点集合の列 (渦) と、その次数窓の検査。"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from ..diagnostics import as_fraction, degree_window_deviation
from ..exceptions import ConstructionFailure, PreconditionError
from ..graph_core import SimpleGraph
from ..settings import pick


logger = logging.getLogger(__name__)

MIN_ORDER = 8


def vortex_sizes(n: int, gamma: float | Fraction) -> list[int]:
    """n_i = ⌊γ^i n⌋ を、n_Λ^3 ≤ n となる最小の Λ まで並べます。"""

    g = as_fraction(gamma)
    if not 0 < g < 1:
        raise PreconditionError(f"gamma must lie in (0, 1), got {gamma}")
    if n < 1:
        raise PreconditionError(f"vortex needs n >= 1, got {n}")
    sizes = [n]
    while sizes[-1] ** 3 > n:
        sizes.append(math.floor(g ** len(sizes) * n))
    return sizes


@dataclass(frozen=True)
class Vortex:
    levels: tuple[frozenset[int], ...]
    reservoirs: tuple[frozenset[int], ...]
    gamma: Fraction
    epsilon: Fraction
    attempts: int = 1
    worst: Fraction = Fraction(0)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def sizes(self) -> list[int]:
        return [len(A) for A in self.levels]

    @property
    def last(self) -> frozenset[int]:
        return self.levels[-1]

    def level_of(self, v: int) -> int:
        """v を含む最も深い段の番号。"""

        depth = 0
        for i, A in enumerate(self.levels):
            if v in A:
                depth = i
        return depth

    def to_dict(self) -> dict[str, Any]:
        return {
            "sizes": self.sizes,
            "reservoirs": [len(R) for R in self.reservoirs],
            "gamma": str(self.gamma),
            "epsilon": str(self.epsilon),
            "attempts": self.attempts,
            "worst_deviation": str(self.worst),
        }


def _window_excess(
    G: SimpleGraph, X: frozenset[int], p: Fraction, width: Fraction, slack: int
) -> tuple[Fraction, dict[str, Any] | None]:
    size = len(X)
    worst, witness = degree_window_deviation(G, X, p * size, width * p * size + slack)
    pair_worst, pair_witness = degree_window_deviation(
        G, X, p * p * size, width * p * p * size + slack, codegree=True
    )
    if pair_worst > worst:
        return pair_worst, pair_witness
    return worst, witness


def build_vortex(
    G: SimpleGraph,
    gamma: float | Fraction,
    epsilon: float | Fraction,
    slack: int | None = None,
    seed: int = 0,
    max_levels: int | None = None,
    retries: int | None = None,
) -> Vortex:
    """無作為な入れ子 A_0 ⊇ … ⊇ A_Λ と R_i ⊆ A_i \\ A_{i+1} を、次数・共通次数の窓に収まるまで引き直します。

    窓は A_i について pn_i ± (3ε/2)pn_i + slack、R_i について幅 2ε。p = e(G)/C(n,2)。
    max_levels を与えると Λ をそこで打ち切る。
    """

    n = G.n
    if n < MIN_ORDER:
        raise PreconditionError(f"a vortex needs n >= {MIN_ORDER}, got {n}")
    g, eps = as_fraction(gamma), as_fraction(epsilon)
    if not 0 < eps < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    sizes = vortex_sizes(n, g)
    if max_levels is not None:
        if max_levels < 1:
            raise PreconditionError(f"max_levels must be >= 1, got {max_levels}")
        sizes = sizes[: max_levels + 1]
    if sizes[-1] == 0:
        raise PreconditionError(f"gamma={gamma} leaves an empty last level for n={n}")

    tolerance = pick(slack, "packer", "vortex_slack")
    limit = pick(retries, "packer", "vortex_retries")
    pairs = n * (n - 1) // 2
    p = Fraction(G.m, pairs)
    rng = random.Random(seed)
    best: Fraction | None = None
    best_witness: dict[str, Any] | None = None
    for attempt in range(1, limit + 1):
        levels = [frozenset(range(n))]
        reservoirs: list[frozenset[int]] = []
        for size in sizes[1:]:
            levels.append(frozenset(rng.sample(sorted(levels[-1]), size)))
        for i in range(len(sizes) - 1):
            outer = sorted(levels[i] - levels[i + 1])
            reservoirs.append(frozenset(rng.sample(outer, min(len(outer), math.floor(eps * sizes[i])))))

        worst = Fraction(0)
        witness: dict[str, Any] | None = None
        checks = [(A, Fraction(3, 2) * eps) for A in levels[1:]] + [(R, 2 * eps) for R in reservoirs if R]
        for X, width in checks:
            excess, where = _window_excess(G, X, p, width, tolerance)
            if excess > worst:
                worst, witness = excess, where
        if worst == 0:
            logger.info("vortex: sizes %s after %d attempts", sizes, attempt)
            return Vortex(tuple(levels), tuple(reservoirs), g, eps, attempt, Fraction(0))
        if best is None or worst < best:
            best, best_witness = worst, witness
        logger.debug("vortex attempt %d: worst window excess %s", attempt, worst)
    raise ConstructionFailure(
        "vortex degree windows not met within the retry cap",
        {"attempts": limit, "worst_deviation": str(best), "witness": best_witness, "sizes": sizes},
    )
