"""補題が仮定する構造条件 (準ランダム性・密度・正則性・頑健拡大性・k-独立性) の判定。

小さい入力では全列挙、大きい入力では seed 付きサンプリングで判定し、
サンプリングの場合は "no-counterexample" としか報告しない。
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Any, Iterable, Protocol

from .exceptions import ConstructionFailure, PreconditionError
from .graph_core import BipartitionView, Edge, HostGraph, bfs_distances, canonical
from .settings import pick


logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
NO_COUNTEREXAMPLE = "no-counterexample"


def as_fraction(value: float | int | str | Fraction) -> Fraction:
    """実数パラメータを厳密な有理数へ。0.1 は 1/10 として扱う。"""

    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(repr(float(value)))


def _ceil(x: Fraction) -> int:
    return math.ceil(x)


def _floor(x: Fraction) -> int:
    return math.floor(x)


@dataclass(frozen=True)
class QuasiRandomParams:
    epsilon: float
    p: float

    def __post_init__(self) -> None:
        if not 0 < self.epsilon <= 1:
            raise PreconditionError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0 <= self.p <= 1:
            raise PreconditionError(f"p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class DenseParams:
    beta: float
    alpha: float

    def __post_init__(self) -> None:
        if not 0 < self.beta < 1:
            raise PreconditionError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 <= self.alpha <= 1:
            raise PreconditionError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class RegularityParams:
    epsilon: float
    d: float
    super_regular: bool = False

    def __post_init__(self) -> None:
        if not 0 < as_fraction(self.epsilon) <= 1:
            raise PreconditionError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0 <= as_fraction(self.d) <= 1:
            raise PreconditionError(f"d must lie in [0, 1], got {self.d}")


@dataclass(frozen=True)
class ExpanderParams:
    nu: float
    tau: float

    def __post_init__(self) -> None:
        if not 0 < self.nu <= self.tau < 1:
            raise PreconditionError(f"need 0 < nu <= tau < 1, got nu={self.nu}, tau={self.tau}")


@dataclass(frozen=True)
class DiagnosticsReport:
    check: str
    verdict: str
    mode: str
    witness: dict[str, Any] | None = None
    samples: int = 0
    statistic: str | None = None

    @property
    def passed(self) -> bool:
        return self.verdict != FAIL

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "check": self.check,
            "verdict": self.verdict,
            "mode": self.mode,
            "witness": self.witness,
            "samples": self.samples,
        }
        if self.statistic is not None:
            payload["statistic"] = self.statistic
        return payload


def _sampled_verdict(failed: bool) -> str:
    return FAIL if failed else NO_COUNTEREXAMPLE


def _mask_of(vertices: Iterable[int]) -> int:
    return sum(1 << v for v in vertices)


def _members(mask: int) -> list[int]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return out


def _degrees_into(G: HostGraph, V: list[int], universe: list[int]) -> list[int]:
    V_set = frozenset(V)
    return [sum(G.multiplicity(u, w) for w in G.neighbours(u) & V_set) for u in universe]


# ---- 準ランダム性 ----


def check_quasi_random(G: HostGraph, params: QuasiRandomParams) -> DiagnosticsReport:
    n = G.n
    if n < 2:
        raise PreconditionError("check_quasi_random needs n >= 2")
    eps, p = as_fraction(params.epsilon), as_fraction(params.p)
    d_lo, d_hi = (1 - eps) * p * n, (1 + eps) * p * n
    c_lo, c_hi = (1 - eps) * p * p * n, (1 + eps) * p * p * n
    for v in range(n):
        d = G.degree(v)
        if not d_lo <= d <= d_hi:
            return DiagnosticsReport(
                "quasi-random", FAIL, "exhaustive",
                {"vertex": v, "degree": d, "window": [str(d_lo), str(d_hi)]},
            )
    for u in range(n):
        nu = G.neighbours(u)
        for v in range(u + 1, n):
            c = len(nu & G.neighbours(v))
            if not c_lo <= c <= c_hi:
                return DiagnosticsReport(
                    "quasi-random", FAIL, "exhaustive",
                    {"pair": [u, v], "codegree": c, "window": [str(c_lo), str(c_hi)]},
                )
    return DiagnosticsReport("quasi-random", PASS, "exhaustive")


# ---- (β, α)-密 ----


def _min_density_for(G: HostGraph, V: list[int], floor_size: int) -> tuple[Fraction, list[int]]:
    """V を固定したとき、|U| ≥ floor_size の U での最小ペア密度と U。"""

    universe = list(range(G.n))
    degs = _degrees_into(G, V, universe)
    ranked = sorted(universe, key=lambda u: (degs[u], u))
    best: tuple[Fraction, list[int]] | None = None
    running = 0
    for size, u in enumerate(ranked, start=1):
        running += degs[u]
        if size < floor_size:
            continue
        density = Fraction(running, size * len(V))
        if best is None or density < best[0]:
            best = (density, sorted(ranked[:size]))
    assert best is not None
    return best


def check_dense(
    G: HostGraph,
    params: DenseParams,
    exhaustive_cap: int | None = None,
    trials: int | None = None,
    seed: int = 0,
) -> DiagnosticsReport:
    """全ての |U|,|V| ≥ βn について den(U,V) ≥ α かを調べます。

    V を固定すると最小の e(U,V) は d_V の小さい順に U を取れば得られるため、
    列挙は V 側だけで済む。
    """

    n = G.n
    if n < 1:
        raise PreconditionError("check_dense needs n >= 1")
    cap = pick(exhaustive_cap, "diagnostics", "dense_exhaustive_cap")
    beta, alpha = as_fraction(params.beta), as_fraction(params.alpha)
    floor_size = max(1, _ceil(beta * n))
    exhaustive = n <= cap
    mode = "exhaustive" if exhaustive else "sampled"
    if alpha == 0 or floor_size > n:
        return DiagnosticsReport("dense", PASS, mode)

    best: tuple[Fraction, list[int], list[int]] | None = None
    samples = 0
    if exhaustive:
        candidates: Iterable[list[int]] = (
            _members(mask) for mask in range(1, 1 << n) if bin(mask).count("1") >= floor_size
        )
    else:
        rng = random.Random(seed)
        count = pick(trials, "diagnostics", "sample_trials")
        candidates = (
            sorted(rng.sample(range(n), rng.randint(floor_size, n))) for _ in range(count)
        )
    for V in candidates:
        samples += 1
        density, U = _min_density_for(G, V, floor_size)
        if best is None or density < best[0]:
            best = (density, U, V)
    assert best is not None
    density, U, V = best
    if density < alpha:
        verdict = FAIL
        witness = {"U": U, "V": V, "density": str(density)}
    else:
        verdict = PASS if exhaustive else NO_COUNTEREXAMPLE
        witness = None
    return DiagnosticsReport("dense", verdict, mode, witness, samples, statistic=str(density))


# ---- (ε, d)-正則ペア ----


def _pair_extremes(
    view: BipartitionView,
    outer: list[int],
    inner: list[int],
    inner_floor: int,
) -> tuple[Fraction, list[int], Fraction, list[int]]:
    outer_set = frozenset(outer)
    degs = [len(view.host.neighbours(u) & outer_set) for u in inner]
    order = sorted(range(len(inner)), key=lambda i: (degs[i], inner[i]))
    low_sum = high_sum = 0
    lo: tuple[Fraction, list[int]] | None = None
    hi: tuple[Fraction, list[int]] | None = None
    for size in range(1, len(inner) + 1):
        low_sum += degs[order[size - 1]]
        high_sum += degs[order[-size]]
        if size < inner_floor:
            continue
        d_low = Fraction(low_sum, size * len(outer))
        d_high = Fraction(high_sum, size * len(outer))
        if lo is None or d_low < lo[0]:
            lo = (d_low, sorted(inner[i] for i in order[:size]))
        if hi is None or d_high > hi[0]:
            hi = (d_high, sorted(inner[i] for i in order[-size:]))
    assert lo is not None and hi is not None
    return lo[0], lo[1], hi[0], hi[1]


def check_regular_pair(
    view: BipartitionView,
    params: RegularityParams,
    exhaustive_cap: int | None = None,
    trials: int | None = None,
    seed: int = 0,
) -> DiagnosticsReport:
    A, B = sorted(view.A), sorted(view.B)
    if not A or not B:
        raise PreconditionError("check_regular_pair needs |A|, |B| >= 1")
    cap = pick(exhaustive_cap, "diagnostics", "regular_exhaustive_cap")
    eps, d = as_fraction(params.epsilon), as_fraction(params.d)
    check = "super-regular-pair" if params.super_regular else "regular-pair"
    exhaustive = len(A) + len(B) <= cap
    mode = "exhaustive" if exhaustive else "sampled"

    if params.super_regular:
        for side, other in ((A, B), (B, A)):
            lo, hi = (d - eps) * len(other), (d + eps) * len(other)
            for v in side:
                deg = view.degree(v)
                if not lo <= deg <= hi:
                    return DiagnosticsReport(
                        check, FAIL, mode,
                        {"vertex": v, "degree": deg, "window": [str(lo), str(hi)]},
                    )

    # 外側は小さい方の辺。密度は対称なので入れ替えてよい。
    swapped = len(B) > len(A)
    outer_side, inner_side = (A, B) if swapped else (B, A)
    outer_floor = max(1, _ceil(eps * len(outer_side)))
    inner_floor = max(1, _ceil(eps * len(inner_side)))

    if exhaustive:
        k = len(outer_side)
        outers: Iterable[list[int]] = (
            [outer_side[i] for i in _members(mask)]
            for mask in range(1, 1 << k)
            if bin(mask).count("1") >= outer_floor
        )
    else:
        rng = random.Random(seed)
        count = pick(trials, "diagnostics", "sample_trials")
        outers = (
            sorted(rng.sample(outer_side, rng.randint(outer_floor, len(outer_side))))
            for _ in range(count)
        )
    samples = 0
    for outer in outers:
        samples += 1
        d_low, low_set, d_high, high_set = _pair_extremes(view, outer, inner_side, inner_floor)
        for density, inner in ((d_low, low_set), (d_high, high_set)):
            if abs(density - d) >= eps:
                A_prime, B_prime = (outer, inner) if swapped else (inner, outer)
                return DiagnosticsReport(
                    check, FAIL, mode,
                    {"A_prime": A_prime, "B_prime": B_prime, "density": str(density)},
                    samples,
                )
    verdict = PASS if exhaustive else NO_COUNTEREXAMPLE
    return DiagnosticsReport(check, verdict, mode, None, samples)


# ---- 頑健拡大性 ----


def robust_neighbourhood(G: HostGraph, S: Iterable[int], nu: float | Fraction) -> frozenset[int]:
    S_set = frozenset(S)
    threshold = as_fraction(nu) * G.n
    return frozenset(
        v for v in range(G.n)
        if sum(G.multiplicity(v, w) for w in G.neighbours(v) & S_set) >= threshold
    )


def check_robust_expander(
    G: HostGraph,
    params: ExpanderParams,
    exhaustive_cap: int | None = None,
    trials: int | None = None,
    seed: int = 0,
) -> DiagnosticsReport:
    n = G.n
    if n < 2:
        raise PreconditionError("check_robust_expander needs n >= 2")
    cap = pick(exhaustive_cap, "diagnostics", "expander_exhaustive_cap")
    nu, tau = as_fraction(params.nu), as_fraction(params.tau)
    lo, hi = _ceil(tau * n), _floor((1 - tau) * n)
    exhaustive = n <= cap
    mode = "exhaustive" if exhaustive else "sampled"
    if lo > hi:
        return DiagnosticsReport("robust-expander", PASS, mode)

    masks = [_mask_of(G.neighbours(v)) for v in range(n)]
    threshold = nu * n
    if exhaustive:
        subsets: Iterable[tuple[int, ...]] = (
            S for size in range(lo, hi + 1) for S in combinations(range(n), size)
        )
    else:
        rng = random.Random(seed)
        count = pick(trials, "diagnostics", "sample_trials")
        subsets = (tuple(sorted(rng.sample(range(n), rng.randint(lo, hi)))) for _ in range(count))
    samples = 0
    for S in subsets:
        samples += 1
        smask = _mask_of(S)
        rn = [v for v in range(n) if bin(masks[v] & smask).count("1") >= threshold]
        if len(rn) < len(S) + threshold:
            return DiagnosticsReport(
                "robust-expander", FAIL, mode,
                {"S": list(S), "robust_neighbourhood": rn},
                samples,
            )
    verdict = PASS if exhaustive else NO_COUNTEREXAMPLE
    return DiagnosticsReport("robust-expander", verdict, mode, None, samples)


# ---- k-独立性 ----


class _Adjacency(Protocol):
    n: int

    def neighbours(self, v: int) -> frozenset[int]: ...


def ball(G: _Adjacency, v: int, radius: int) -> frozenset[int]:
    if radius < 0:
        return frozenset()
    return frozenset(bfs_distances(G, v, limit=radius))  # type: ignore[arg-type]


def check_k_independent(G: _Adjacency, S: Iterable[int], k: int) -> tuple[int, int] | None:
    """S の2頂点で距離 < k のものがあればその組を返します。"""

    members = sorted(set(S))
    member_set = frozenset(members)
    for s in members:
        close = ball(G, s, k - 1) & member_set
        others = sorted(w for w in close if w != s)
        if others:
            return canonical(s, others[0])
    return None


def edge_distance(G: _Adjacency, e: Edge, f: Edge) -> int | None:
    best: int | None = None
    for a in e:
        dist = bfs_distances(G, a)  # type: ignore[arg-type]
        for b in f:
            if b in dist and (best is None or dist[b] < best):
                best = dist[b]
    return best


def greedy_k_independent_set(
    G: _Adjacency,
    k: int,
    X: Iterable[int] = (),
    Z: Iterable[int] | None = None,
) -> frozenset[int]:
    """X を含む k-独立集合を Z から昇順の貪欲法で作ります。"""

    X_set = frozenset(X)
    Z_list = sorted(set(range(G.n)) if Z is None else set(Z))
    if not X_set <= frozenset(Z_list):
        raise PreconditionError(f"seed set is not inside the candidates: {sorted(X_set - set(Z_list))}")
    clash = check_k_independent(G, X_set, k)
    if clash is not None:
        raise PreconditionError(f"seed set is not {k}-independent: vertices {clash[0]} and {clash[1]} are too close")

    chosen = set(X_set)
    blocked: set[int] = set()
    for x in sorted(X_set):
        blocked |= ball(G, x, k - 1)
    for z in Z_list:
        if z in chosen or z in blocked:
            continue
        chosen.add(z)
        blocked |= ball(G, z, k - 1)
    result = frozenset(chosen)
    if check_k_independent(G, result, k) is not None:
        raise ConstructionFailure("greedy independent set failed re-verification", {"k": k})
    return result


def greedy_k_independent_matching(
    G: _Adjacency,
    k: int,
    candidates: Iterable[tuple[int, int]] | None = None,
) -> list[Edge]:
    """辺同士の距離が k 以上のマッチングを正準辺順の貪欲法で作ります。"""

    if candidates is None:
        pool = sorted({canonical(u, w) for u in range(G.n) for w in G.neighbours(u)})
        if not pool:
            raise PreconditionError("greedy_k_independent_matching needs at least one edge")
    else:
        pool = sorted({canonical(u, w) for u, w in candidates})
    chosen: list[Edge] = []
    blocked: set[int] = set()
    for u, v in pool:
        if u in blocked or v in blocked:
            continue
        chosen.append((u, v))
        blocked |= ball(G, u, k - 1) | ball(G, v, k - 1)
    for i, e in enumerate(chosen):
        for f in chosen[i + 1:]:
            dist = edge_distance(G, e, f)
            if dist is not None and dist < k:
                raise ConstructionFailure(
                    "greedy independent matching failed re-verification",
                    {"k": k, "edges": [list(e), list(f)], "distance": dist},
                )
    return chosen


def degree_window_deviation(
    G: HostGraph,
    X: Iterable[int],
    target: Fraction,
    tolerance: Fraction,
    codegree: bool = False,
) -> tuple[Fraction, dict[str, Any] | None]:
    """d_X(u) (または codegree) が target ± tolerance からはみ出す最大量と、その頂点 (組)。"""

    X_set = frozenset(X)
    worst = Fraction(0)
    witness: dict[str, Any] | None = None
    if codegree:
        for u in range(G.n):
            nu = G.neighbours(u) & X_set
            for v in range(u + 1, G.n):
                value = len(nu & G.neighbours(v))
                excess = abs(value - target) - tolerance
                if excess > worst:
                    worst, witness = excess, {"pair": [u, v], "codegree": value}
    else:
        for u in range(G.n):
            value = len(G.neighbours(u) & X_set)
            excess = abs(value - target) - tolerance
            if excess > worst:
                worst, witness = excess, {"vertex": u, "degree": value}
    return worst, witness
