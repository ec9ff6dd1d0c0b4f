"""Deterministic (1 + eps)-approximate minimum-cost bipartite matching of point sets."""

from .conditioner import (
    CoarseEstimate,
    ConditionedInstance,
    RawInstance,
    SolveResult,
    build_spanner,
    coarse_estimate,
    condition,
    solve,
)
from .hierarchy import ConstantsConfig, Params, derive_params
from .matcher import BudgetExhausted, Matcher, Matching
from .oracle import hungarian

__all__ = [
    "BudgetExhausted",
    "CoarseEstimate",
    "ConditionedInstance",
    "ConstantsConfig",
    "Matcher",
    "Matching",
    "Params",
    "RawInstance",
    "SolveResult",
    "build_spanner",
    "coarse_estimate",
    "condition",
    "derive_params",
    "hungarian",
    "solve",
]
