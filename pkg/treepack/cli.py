"""コマンドライン入口。各サブコマンドは結果を stdout (または --out) に書き、ログは stderr に出す。

終了コード: 0 = 成功 / pass、1 = 検証された失敗 / fail / 実行時エラー、2 = 使い方の誤り。
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import pandas as pd

from . import __version__
from .cycle_machinery import CycleDecompParams, decompose_long_cycles, make_eulerian
from .diagnostics import (
    DenseParams,
    ExpanderParams,
    QuasiRandomParams,
    RegularityParams,
    check_dense,
    check_quasi_random,
    check_regular_pair,
    check_robust_expander,
)
from .exceptions import InfeasibleError, TreePackError
from .graph_core import BipartitionView, complete_graph, format_graph, gnp_graph, random_regular_graph, read_graph
from .orientation import OrientParams, layer_table, orient_out_regular
from .packer import (
    HeuristicConfig,
    PackingCertificate,
    certificate_dot,
    coverage,
    gl_instance,
    load_certificate,
    pack_exact,
    pack_heuristic,
    ringel_instances,
    run_bench,
    verify_certificate,
)
from .packer.bench import KINDS
from .settings import DEBUG_MODE, pick
from .tree_tools import dump_forests, gen_random_tree, load_forests
from .walk_embedder import CycleBlowup, WalkEmbedParams, mixing_rate, simulate_walk, walk_embed_tree


if sys.platform == "win32":
    sys.stdout.reconfigure(encoding="utf-8", errors="replace")
    sys.stderr.reconfigure(encoding="utf-8", errors="replace")

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv", "dot")


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose or DEBUG_MODE else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _meta(args: argparse.Namespace) -> dict[str, Any]:
    return {"version": __version__, "seed": args.seed, "argv": list(args.argv)}


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_json(args: argparse.Namespace, payload: dict[str, Any]) -> None:
    _emit(args, json.dumps({"meta": _meta(args), **payload}, ensure_ascii=False, indent=2) + "\n")


def _write_csv(args: argparse.Namespace, frame: pd.DataFrame) -> None:
    header = "# " + json.dumps(_meta(args), ensure_ascii=False) + "\n"
    _emit(args, header + frame.to_csv(index=False, lineterminator="\n"))


def _require_format(args: argparse.Namespace, allowed: Sequence[str]) -> None:
    if args.format not in allowed:
        args.parser.error(f"--format {args.format} is not supported here (choose from {', '.join(allowed)})")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# ---- サブコマンド ----


def cmd_gen_graph(args: argparse.Namespace) -> int:
    _require_format(args, ("json",))
    if args.kind == "complete":
        G = complete_graph(args.n)
    elif args.kind == "gnp":
        if args.p is None:
            args.parser.error("gnp needs --p")
        G = gnp_graph(args.n, args.p, args.seed)
    else:
        if args.d is None:
            args.parser.error("regular needs --d")
        G = random_regular_graph(args.n, args.d, args.seed)
    _emit(args, "# " + json.dumps(_meta(args), ensure_ascii=False) + "\n" + format_graph(G))
    return 0


def cmd_gen_trees(args: argparse.Namespace) -> int:
    _require_format(args, ("json",))
    if args.kind == "gl":
        _, trees = gl_instance(args.n, args.seed, args.delta, args.unbounded_below)
    elif args.kind == "random":
        trees = {1: gen_random_tree(args.n, args.delta, args.seed)}
    else:
        instances = ringel_instances(args.n)
        if not 0 <= args.index < len(instances):
            args.parser.error(f"--index must lie in [0, {len(instances)}) for n={args.n}")
        _, _, trees = instances[args.index]
    _write_json(args, dump_forests(trees, args.delta if args.kind == "random" else None))
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    _require_format(args, ("json",))
    G = read_graph(args.graph, multigraph=args.multigraph and args.check != "regular-pair")
    if args.check == "quasi-random":
        report = check_quasi_random(G, QuasiRandomParams(args.epsilon, args.p))
    elif args.check == "dense":
        report = check_dense(G, DenseParams(args.beta, args.alpha), seed=args.seed)
    elif args.check == "regular-pair":
        if args.A is None or args.B is None:
            args.parser.error("regular-pair needs --A and --B")
        view = BipartitionView(G, frozenset(args.A), frozenset(args.B))
        report = check_regular_pair(view, RegularityParams(args.epsilon, args.d, args.super_regular), seed=args.seed)
    else:
        report = check_robust_expander(G, ExpanderParams(args.nu, args.tau), seed=args.seed)
    _write_json(args, report.to_dict())
    return 0 if report.passed else 1


def cmd_walk_embed(args: argparse.Namespace) -> int:
    _require_format(args, ("json", "csv"))
    T = gen_random_tree(args.n, args.delta, args.seed)
    params = WalkEmbedParams.with_slack(args.n, args.ell, args.slack, args.seed)
    outcome = walk_embed_tree(T, CycleBlowup.complete(args.ell, params.m), params, args.retries)
    if args.format == "csv":
        _write_csv(args, outcome.attempts_frame())
    else:
        payload: dict[str, Any] = {
            "ok": outcome.ok,
            "n": args.n,
            "ell": args.ell,
            "capacity": params.m,
            "max_cluster_load": outcome.assignment.max_load,
            "max_pair_load": outcome.assignment.max_pair_load,
            "attempts": len(outcome.attempts),
        }
        if outcome.embedding is not None and args.emit_map:
            payload["map"] = outcome.embedding.as_list(T.n)
        _write_json(args, payload)
    return 0 if outcome.ok else 1


def _plot_mixing(table: Any, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = list(table.steps)
    gamma = mixing_rate(table.ell)
    plt.figure(figsize=(8, 5))
    plt.plot(steps, table.max_deviation_from_uniform(), marker="o", linewidth=2, label="observed")
    plt.plot(steps, [gamma**t for t in steps], linestyle="--", label=f"bound {gamma:.3f}^t")
    plt.yscale("log")
    plt.xlabel("t")
    plt.ylabel("max |Pr[X_t = i] - 1/ell|")
    plt.title(f"Symmetric walk on C_{table.ell} ({table.trials} trials)")
    plt.grid(True, alpha=0.3)
    plt.legend()
    plt.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    plt.savefig(path, dpi=150)
    plt.close()


def cmd_walk_mix(args: argparse.Namespace) -> int:
    _require_format(args, ("json", "csv"))
    steps = args.steps if args.steps is not None else pick(None, "walk", "mix_steps")
    trials = pick(args.trials, "walk", "mix_trials")
    table = simulate_walk(args.ell, steps, trials, args.seed)
    if args.plot:
        _plot_mixing(table, args.plot)
    ok = table.within_standard_errors()
    if args.format == "csv":
        _write_csv(args, table.to_frame())
    else:
        _write_json(
            args,
            {
                "ell": args.ell,
                "trials": trials,
                "mixing_rate": mixing_rate(args.ell),
                "within_4_stderr": ok,
                "max_deviation": dict(zip(map(str, table.steps), table.max_deviation_from_uniform().tolist())),
            },
        )
    return 0 if ok else 1


def cmd_cycle_decomp(args: argparse.Namespace) -> int:
    _require_format(args, ("json",))
    G = read_graph(args.graph)
    removed: list[Any] = []
    if args.eulerize:
        G, removed = make_eulerian(G)
    result = decompose_long_cycles(
        G, CycleDecompParams(r=args.r, hamilton_restarts=args.retries, seed=args.seed, slack=args.slack)
    )
    _write_json(args, {"removed": [list(e) for e in removed], **result.to_dict()})
    return 0


def cmd_orient(args: argparse.Namespace) -> int:
    _require_format(args, ("json",))
    G = read_graph(args.graph)
    try:
        result = orient_out_regular(
            G, OrientParams(dbar=args.dbar, seed=args.seed, restarts=args.retries), use_oracle=not args.no_oracle
        )
    except InfeasibleError as exc:
        _write_json(args, {"feasible": False, "certificate": exc.details})
        return 1
    _write_json(
        args,
        {**result.summary(), "layers": layer_table(result), "arcs": [list(a) for a in sorted(result.orientation.arcs)]},
    )
    return 0


def _emit_certificate(args: argparse.Namespace, G: Any, trees: Any, cert: PackingCertificate, extra: dict[str, Any]) -> None:
    if args.format == "dot":
        _emit(args, certificate_dot(G, trees, cert, json.dumps(_meta(args), ensure_ascii=False)))
    else:
        _write_json(args, {**cert.to_dict(), **extra})


def cmd_pack_exact(args: argparse.Namespace) -> int:
    _require_format(args, ("json", "dot"))
    G = read_graph(args.graph)
    trees = load_forests(args.trees)
    outcome = pack_exact(G, trees, args.mode, args.budget)
    if outcome.certificate is None:
        total = sum(T.m for T in trees.values())
        if outcome.reason == "edge-count" and args.mode == "decompose" and total < G.m:
            logger.warning("edge counts differ (%d trees vs %d host); rerun with --mode pack", total, G.m)
        _write_json(args, outcome.to_dict())
        return 1
    extra: dict[str, Any] = {"nodes": outcome.nodes}
    if args.mode == "pack":
        extra["coverage"] = coverage(G, trees, outcome.certificate)
    _emit_certificate(args, G, trees, outcome.certificate, extra)
    return 0


def cmd_pack_heuristic(args: argparse.Namespace) -> int:
    _require_format(args, ("json", "dot"))
    G = read_graph(args.graph)
    trees = load_forests(args.trees)
    overrides = {
        key: value
        for key, value in {
            "restarts": args.retries,
            "vortex_levels": args.levels,
            "reserve_fraction": args.reserve,
            "vortex_slack": args.slack,
            "exact_finish_budget": args.budget,
        }.items()
        if value is not None
    }
    outcome = pack_heuristic(G, trees, HeuristicConfig(seed=args.seed, covering=not args.no_cover, **overrides))
    if outcome.certificate is None:
        _write_json(args, {"status": "failed", "report": outcome.report})
        return 1
    _emit_certificate(args, G, trees, outcome.certificate, {"report": outcome.report})
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    _require_format(args, ("json",))
    G = read_graph(args.graph)
    trees = load_forests(args.trees)
    result = verify_certificate(G, trees, load_certificate(args.certificate))
    _write_json(args, result.to_dict())
    return 0 if result.ok else 1


def cmd_bench(args: argparse.Namespace) -> int:
    _require_format(args, ("json", "csv"))
    options: dict[str, Any] = {}
    if args.kind == "walk":
        options = {"ell": args.ell, "slack": args.slack, "retries": args.retries}
    frame = run_bench(args.kind, args.n, args.instances, args.seed, args.budget, args.workers, **options)
    if not args.timings:
        frame = frame.drop(columns=["seconds"])
    if args.format == "csv":
        _write_csv(args, frame)
    else:
        _write_json(args, {"rows": frame.to_dict(orient="records")})
    return 0 if (frame["verdict"] == "pass").all() else 1


# ---- 引数 ----


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="乱数シード (出力のメタデータに記録される)。")
    common.add_argument("--out", help="出力先ファイル。省略時は標準出力。")
    common.add_argument("--format", choices=FORMATS, default="json", help="出力形式。")
    common.add_argument("--verbose", action="store_true", help="DEBUG ログを出す。")

    parser = argparse.ArgumentParser(prog="treepack", description="木の詰め込み・分解の構成と検証")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable[[argparse.Namespace], int], help_text: str, **kwargs: Any) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, **kwargs)
        p.set_defaults(handler=handler, parser=p)
        return p

    p = add("gen-graph", cmd_gen_graph, "ホストグラフを生成する。")
    p.add_argument("kind", choices=["complete", "gnp", "regular"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, help="gnp の辺確率。")
    p.add_argument("--d", type=int, help="regular の次数。")

    p = add("gen-trees", cmd_gen_trees, "木の列を生成する。")
    p.add_argument("kind", choices=["gl", "random", "ringel"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=int, default=4, help="最大次数の上限。")
    p.add_argument("--unbounded-below", type=int, default=4, help="この位数以下の木は次数制限なし (gl)。")
    p.add_argument("--index", type=int, default=0, help="ringel の同型類の番号。")

    p = add("diagnose", cmd_diagnose, "擬似ランダム性・稠密性・正則対・拡大性を調べる。")
    p.add_argument("graph")
    p.add_argument("--check", choices=["quasi-random", "dense", "regular-pair", "expander"], required=True)
    p.add_argument("--multigraph", action="store_true", help="多重辺を許して読む。")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--d", type=float, default=0.5)
    p.add_argument("--A", type=_int_list, help="正則対の片側 (カンマ区切り)。")
    p.add_argument("--B", type=_int_list, help="正則対のもう片側 (カンマ区切り)。")
    p.add_argument("--super-regular", action="store_true")
    p.add_argument("--nu", type=float, default=0.05)
    p.add_argument("--tau", type=float, default=0.25)

    p = add("walk-embed", cmd_walk_embed, "ランダムな木をサイクルのブローアップに埋め込む。")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ell", type=int, default=5)
    p.add_argument("--delta", type=int, default=3)
    p.add_argument("--slack", type=float, help="容量 m = (1+slack) n / ell。")
    p.add_argument("--retries", type=int, help="ウォークの引き直し回数の上限。")
    p.add_argument("--emit-map", action="store_true", help="埋め込み写像も出力する。")

    p = add("walk-mix", cmd_walk_mix, "サイクル上の対称ウォークの混合を測る。")
    p.add_argument("--ell", type=int, default=5)
    p.add_argument("--trials", type=int)
    p.add_argument("--steps", type=_int_list, help="記録する時刻 (カンマ区切り)。")
    p.add_argument("--plot", help="最大偏差の推移を描いた PNG の出力先。")

    p = add("cycle-decomp", cmd_cycle_decomp, "長い閉路への分解。")
    p.add_argument("graph")
    p.add_argument("--r", type=int)
    p.add_argument("--retries", type=int, help="ハミルトン閉路探索の再試行回数。")
    p.add_argument("--slack", type=float, help="公平分割の許容幅。")
    p.add_argument("--eulerize", action="store_true", help="先に奇数次数を解消する。")

    p = add("orient", cmd_orient, "出次数一定の向き付け。")
    p.add_argument("graph")
    p.add_argument("--dbar", type=int)
    p.add_argument("--retries", type=int, help="層を剥がすループの再試行回数。")
    p.add_argument("--no-oracle", action="store_true", help="流れによる判定を使わない。")

    for name, handler, help_text in (
        ("pack-exact", cmd_pack_exact, "厳密探索で詰め込み・分解を求める。"),
        ("pack-heuristic", cmd_pack_heuristic, "発見的パイプラインで分解を求める。"),
    ):
        p = add(name, handler, help_text)
        p.add_argument("graph")
        p.add_argument("trees")
        p.add_argument("--budget", type=int, help="探索ノード数の上限。")
        if name == "pack-exact":
            p.add_argument("--mode", choices=["decompose", "pack"], default="decompose")
        else:
            p.add_argument("--retries", type=int, help="再始動の回数。")
            p.add_argument("--levels", type=int, help="渦の段数。")
            p.add_argument("--reserve", type=float, help="取り置く木の割合。")
            p.add_argument("--slack", type=int, help="渦の次数窓の余裕。")
            p.add_argument("--no-cover", action="store_true", help="被覆の段階を省く。")

    p = add("verify", cmd_verify, "証明書を検証する。")
    p.add_argument("graph")
    p.add_argument("trees")
    p.add_argument("certificate")

    p = add("bench", cmd_bench, "卓上規模の検証実験を流す。")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--budget", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ell", type=int, default=5)
    p.add_argument("--slack", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--timings", action="store_true", help="所要秒数の列を残す (出力が実行ごとに変わる)。")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    arguments = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(arguments)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = arguments
    _configure_logging(args.verbose)
    try:
        return args.handler(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except TreePackError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    except OSError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
