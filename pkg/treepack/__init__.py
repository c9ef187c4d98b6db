"""木の詰め込み・分解のための構成アルゴリズムと検証器。"""

from .exceptions import (
    ConstructionFailure,
    GraphFormatError,
    InfeasibleError,
    PreconditionError,
    TreePackError,
)

__version__ = "0.1.0"

__all__ = [
    "ConstructionFailure",
    "GraphFormatError",
    "InfeasibleError",
    "PreconditionError",
    "TreePackError",
    "__version__",
]
