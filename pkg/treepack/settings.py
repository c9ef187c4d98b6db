"""パッケージ同梱の既定値 (defaults.json) とデバッグ設定を読み込む。"""

from __future__ import annotations

import json
import os
from functools import lru_cache
from pathlib import Path
from typing import Any


DEFAULTS_PATH = Path(__file__).resolve().with_name("defaults.json")
DEBUG_MODE = os.getenv("TREEPACK_DEBUG", "false").lower() == "true"


def load_defaults(path: str | Path | None = None) -> dict[str, Any]:
    defaults_path = Path(path) if path else DEFAULTS_PATH
    with defaults_path.open("r", encoding="utf-8") as handle:
        return json.load(handle)


@lru_cache(maxsize=1)
def _cached_defaults() -> dict[str, Any]:
    return load_defaults()


def default(section: str, key: str) -> Any:
    """defaults.json の section.key を返します。"""

    try:
        return _cached_defaults()[section][key]
    except KeyError as exc:
        raise KeyError(f"unknown default {section}.{key}") from exc


def pick(value: Any, section: str, key: str) -> Any:
    """明示値があればそれを、無ければ既定値を返します。"""

    return default(section, key) if value is None else value
