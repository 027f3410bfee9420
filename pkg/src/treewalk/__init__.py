"""Anisotropic quantum walks on the homogeneous tree of degree 3."""

__version__ = "0.1.0"

from .coins import CoinConfigError, CoinField, make_coin_field
from .states import TripleState, WalkState
from .tree import BallIndex, CapacityError, TreeWord, ball

__all__ = [
    "__version__",
    "BallIndex",
    "CapacityError",
    "CoinConfigError",
    "CoinField",
    "TreeWord",
    "TripleState",
    "WalkState",
    "ball",
    "make_coin_field",
]
