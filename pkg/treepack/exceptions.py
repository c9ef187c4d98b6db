"""treepack 全体で共有する例外クラス。"""

from __future__ import annotations

from typing import Any


class TreePackError(Exception):
    """treepack が送出する例外の基底クラス。"""


class PreconditionError(TreePackError, ValueError):
    """呼び出し側が前提条件を満たしていない。"""


class GraphFormatError(PreconditionError):
    """グラフ・森・証明書ファイルの書式エラー。"""


class ConstructionFailure(TreePackError, RuntimeError):
    """構成アルゴリズムが完了できなかった。details にループ状態を保持する。"""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.details: dict[str, Any] = dict(details or {})

    def to_dict(self) -> dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self), "details": self.details}


class InfeasibleError(ConstructionFailure):
    """実行不能であることが証明された (辺数の不一致やカット)。"""
