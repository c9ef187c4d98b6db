"""詰め込み・分解の証明書と、その独立な検証器。"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..exceptions import GraphFormatError, PreconditionError
from ..graph_core import Edge, SimpleGraph, canonical, content_hash
from ..tree_tools import RootedForest


logger = logging.getLogger(__name__)

MODES = ("decompose", "pack")

DOT_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class PackingCertificate:
    """木ごとの頂点写像 (map[i] = 木の頂点 i の像) の列。graph_hash でホストに結び付く。"""

    graph_hash: str
    mode: str
    assignments: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise PreconditionError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def build(
        cls,
        G: SimpleGraph,
        mode: str,
        assignments: Mapping[int, Sequence[int]] | Sequence[tuple[int, Sequence[int]]],
    ) -> "PackingCertificate":
        items = assignments.items() if isinstance(assignments, Mapping) else assignments
        ordered = sorted((int(tree_id), tuple(int(x) for x in image)) for tree_id, image in items)
        return cls(content_hash(G), mode, tuple(ordered))

    def as_dict(self) -> dict[int, tuple[int, ...]]:
        return dict(self.assignments)

    def to_dict(self) -> dict[str, Any]:
        return {
            "graph_hash": self.graph_hash,
            "mode": self.mode,
            "assignments": [{"tree_id": tree_id, "map": list(image)} for tree_id, image in self.assignments],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], source: str = "<json>") -> "PackingCertificate":
        try:
            graph_hash = str(payload["graph_hash"])
            mode = str(payload["mode"])
            assignments = tuple(
                (int(entry["tree_id"]), tuple(int(x) for x in entry["map"]))
                for entry in payload["assignments"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFormatError(f"{source}: malformed certificate ({exc})") from exc
        if mode not in MODES:
            raise GraphFormatError(f"{source}: unknown certificate mode {mode!r}")
        return cls(graph_hash, mode, assignments)


def load_certificate(path: str | Path) -> PackingCertificate:
    cert_path = Path(path)
    if not cert_path.exists():
        raise FileNotFoundError(f"certificate file not found: {cert_path}")
    try:
        payload = json.loads(cert_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{cert_path}: invalid JSON ({exc})") from exc
    return PackingCertificate.from_dict(payload, str(cert_path))


@dataclass(frozen=True)
class VerificationResult:
    ok: bool
    reason: str = ""
    witness: dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.ok else "fail"

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"verdict": self.verdict}
        if not self.ok:
            payload["reason"] = self.reason
            payload["witness"] = self.witness
        return payload


def _fail(reason: str, **witness: Any) -> VerificationResult:
    return VerificationResult(False, reason, witness)


def verify_certificate(
    G: SimpleGraph,
    trees: Mapping[int, RootedForest],
    cert: PackingCertificate,
    check_hash: bool = True,
) -> VerificationResult:
    """単射性・隣接保存・辺素性と (decompose なら) 被覆を調べ、最初の違反を証拠付きで返します。"""

    if check_hash and cert.graph_hash != content_hash(G):
        return _fail("graph-hash", expected=content_hash(G), found=cert.graph_hash)
    if cert.mode not in MODES:
        return _fail("mode", mode=cert.mode)

    seen: set[int] = set()
    for tree_id, _ in cert.assignments:
        if tree_id not in trees:
            return _fail("unknown-tree", tree_id=tree_id)
        if tree_id in seen:
            return _fail("duplicate-tree", tree_id=tree_id)
        seen.add(tree_id)
    missing = sorted(set(trees) - seen)
    if missing:
        return _fail("missing-tree", tree_id=missing[0])

    owner: dict[Edge, int] = {}
    for tree_id, image in cert.assignments:
        T = trees[tree_id]
        if len(image) != T.n:
            return _fail("map-length", tree_id=tree_id, expected=T.n, found=len(image))
        placed: dict[int, int] = {}
        for v, w in enumerate(image):
            if not 0 <= w < G.n:
                return _fail("vertex-range", tree_id=tree_id, vertex=v, image=w)
            if w in placed:
                return _fail("not-injective", tree_id=tree_id, vertices=[placed[w], v], image=w)
            placed[w] = v
        for u, v in T.edge_list():
            e = canonical(image[u], image[v])
            if not G.has_edge(*e):
                return _fail("non-edge", tree_id=tree_id, tree_edge=[u, v], edge=list(e))
            if e in owner:
                return _fail("edge-reuse", tree_id=tree_id, other_tree=owner[e], edge=list(e))
            owner[e] = tree_id

    if cert.mode == "decompose" and len(owner) != G.m:
        uncovered = min(G.edges - owner.keys())
        return _fail("uncovered", edge=list(uncovered))
    return VerificationResult(True)


def coverage(G: SimpleGraph, trees: Mapping[int, RootedForest], cert: PackingCertificate) -> dict[str, int]:
    """pack モードの被覆統計。"""

    covered = set()
    for tree_id, image in cert.assignments:
        T = trees.get(tree_id)
        if T is None or len(image) != T.n:
            continue
        covered.update(canonical(image[u], image[v]) for u, v in T.edge_list())
    return {"edges": G.m, "covered": len(covered & G.edges), "uncovered": G.m - len(covered & G.edges)}


def certificate_dot(
    G: SimpleGraph,
    trees: Mapping[int, RootedForest],
    cert: PackingCertificate,
    header: str | None = None,
) -> str:
    """木ごとに色を変えた DOT。どの木にも使われていない辺は灰色の破線。"""

    colour_of: dict[Edge, tuple[int, str]] = {}
    for index, (tree_id, image) in enumerate(cert.assignments):
        colour = DOT_PALETTE[index % len(DOT_PALETTE)]
        T = trees[tree_id]
        for u, v in T.edge_list():
            colour_of[canonical(image[u], image[v])] = (tree_id, colour)
    lines = []
    if header:
        lines.append(f"// {header}")
    lines.append("graph packing {")
    lines.append("  node [shape=circle];")
    for v in range(G.n):
        lines.append(f"  {v};")
    for u, v in G.edge_list():
        if (u, v) in colour_of:
            tree_id, colour = colour_of[(u, v)]
            lines.append(f'  {u} -- {v} [color="{colour}", label="T{tree_id}"];')
        else:
            lines.append(f'  {u} -- {v} [color="#cccccc", style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"
