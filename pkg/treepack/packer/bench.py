"""卓上規模の検証実験。インスタンスごとに seed + index で決定的に生成し、並列に解いて行を集める。"""

from __future__ import annotations

import logging
import random
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any

import pandas as pd

from ..exceptions import PreconditionError, TreePackError
from ..graph_core import SimpleGraph, complete_graph, random_regular_graph
from ..orientation import OrientParams, check_orientation, orient_exact_oracle, orient_out_regular
from ..tree_tools import RootedForest, enumerate_tree_classes, gen_gl_sequence, gen_random_tree
from ..walk_embedder import CycleBlowup, WalkEmbedParams, walk_embed_tree
from .certificate import verify_certificate
from .exact import pack_exact
from .heuristic import HeuristicConfig, pack_heuristic


logger = logging.getLogger(__name__)

KINDS = ("gl", "ringel", "orient", "walk", "heuristic")
COLUMNS = ["instance", "seed", "n", "trees", "verdict", "nodes", "reason", "seconds"]

GL_DELTA = 4
GL_UNBOUNDED_BELOW = 4


def gl_instance(
    n: int, seed: int, delta: int = GL_DELTA, unbounded_below: int = GL_UNBOUNDED_BELOW
) -> tuple[SimpleGraph, dict[int, RootedForest]]:
    """K_n と位数 1..n の木の列 (id は位数)。"""

    trees = gen_gl_sequence(n, delta, seed, unbounded_below)
    return complete_graph(n), {T.n: T for T in trees}


def ringel_instances(n: int) -> list[tuple[str, SimpleGraph, dict[int, RootedForest]]]:
    """位数 n+1 の木の同型類ごとに、K_{2n+1} と 2n+1 個のコピー。"""

    if n < 1:
        raise PreconditionError(f"Ringel instances need n >= 1, got {n}")
    host = complete_graph(2 * n + 1)
    return [
        (f"ringel-{n}-{index}", host, {i: T for i, T in enumerate([T] * (2 * n + 1), start=1)})
        for index, T in enumerate(enumerate_tree_classes(n + 1))
    ]


def _row(index: int, seed: int, n: int, trees: int, verdict: str, nodes: int = 0, reason: str = "") -> dict[str, Any]:
    return {
        "instance": index,
        "seed": seed,
        "n": n,
        "trees": trees,
        "verdict": verdict,
        "nodes": nodes,
        "reason": reason,
    }


def _solve_exact(index: int, seed: int, G: SimpleGraph, trees: dict[int, RootedForest], budget: int | None) -> dict[str, Any]:
    outcome = pack_exact(G, trees, "decompose", budget)
    if outcome.certificate is None:
        return _row(index, seed, G.n, len(trees), outcome.status, outcome.nodes, outcome.reason)
    result = verify_certificate(G, trees, outcome.certificate)
    return _row(index, seed, G.n, len(trees), result.verdict, outcome.nodes, result.reason)


def _run_instance(task: dict[str, Any]) -> dict[str, Any]:
    """ワーカープロセスで1インスタンスを解きます (トップレベル関数でないと pickle できない)。"""

    kind, index, seed, n = task["kind"], task["index"], task["seed"], task["n"]
    started = time.perf_counter()
    try:
        if kind == "gl":
            G, trees = gl_instance(n, seed)
            row = _solve_exact(index, seed, G, trees, task.get("budget"))
        elif kind == "ringel":
            name, G, trees = ringel_instances(n)[index]
            row = _solve_exact(index, seed, G, trees, task.get("budget"))
            row["reason"] = row["reason"] or name
        elif kind == "orient":
            rng = random.Random(seed)
            size = rng.randint(10, 50)
            d = rng.randint(1, min(5, (size - 1) // 2))
            G = random_regular_graph(size, 2 * d, seed)
            feasible = orient_exact_oracle(G, d).feasible
            result = orient_out_regular(G, OrientParams(dbar=d, seed=seed))
            ok = feasible and check_orientation(G, result.orientation, d)
            row = _row(index, seed, size, d, "pass" if ok else "fail", len(result.layers), result.method)
        elif kind == "walk":
            ell = task.get("ell", 5)
            T = gen_random_tree(n, 3, seed)
            params = WalkEmbedParams.with_slack(n, ell, task.get("slack"), seed)
            outcome = walk_embed_tree(T, CycleBlowup.complete(ell, params.m), params, task.get("retries"))
            row = _row(index, seed, n, 1, "pass" if outcome.ok else "fail", len(outcome.attempts))
        elif kind == "heuristic":
            G, trees = gl_instance(n, seed, delta=3, unbounded_below=3)
            outcome = pack_heuristic(G, trees, HeuristicConfig(seed=seed))
            if outcome.certificate is None:
                row = _row(index, seed, n, len(trees), "fail", 0, str(outcome.report.get("phase")))
            else:
                verdict = verify_certificate(G, trees, outcome.certificate).verdict
                row = _row(index, seed, n, len(trees), verdict, len(outcome.report["attempts"]))
        else:
            raise PreconditionError(f"unknown bench kind {kind!r}")
    except TreePackError as exc:
        row = _row(index, seed, n, 0, "error", 0, str(exc))
    row["seconds"] = round(time.perf_counter() - started, 6)
    return row


def run_bench(
    kind: str,
    n: int,
    instances: int | None = None,
    seed: int = 0,
    budget: int | None = None,
    workers: int = 1,
    **options: Any,
) -> pd.DataFrame:
    """instances 個のインスタンス (seed + index) を解き、instance 順に並べた表を返します。

    ringel は n に対する同型類をすべて解き、instances は無視する。
    """

    if kind not in KINDS:
        raise PreconditionError(f"bench kind must be one of {KINDS}, got {kind!r}")
    count = len(enumerate_tree_classes(n + 1)) if kind == "ringel" else instances
    if count is None or count < 1:
        raise PreconditionError(f"instance count must be >= 1, got {count}")
    tasks = [
        {"kind": kind, "index": i, "seed": seed + i, "n": n, "budget": budget, **options}
        for i in range(count)
    ]

    rows: list[dict[str, Any]] = []
    if workers <= 1:
        for task in tasks:
            rows.append(_run_instance(task))
            logger.info("bench %s: instance %d -> %s", kind, task["index"], rows[-1]["verdict"])
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(_run_instance, task): task["index"] for task in tasks}
            for future in as_completed(futures):
                row = future.result()
                rows.append(row)
                logger.info("bench %s: instance %d -> %s", kind, futures[future], row["verdict"])
    return pd.DataFrame(sorted(rows, key=lambda r: r["instance"]), columns=COLUMNS)
