"""Priority-aware rule-based reranking of multi-modal trajectory candidates."""

from .catalog import Rulebook, RuleSpec, Tier, builtin_catalog, with_overrides
from .estimators import RuleAwareReranker, RuleScorer
from .proxies import ApplicabilityMask, EvaluationResult, ViolationMatrix, applicability, evaluate, normalize
from .scenario import CandidateSet, Scenario, Trajectory, load_scenario, save_scenario
from .selection import (
    SelectionResult,
    SelectorConfig,
    confidence_select,
    lexicographic_select,
    scalarized_select,
    select,
    weighted_sum_select,
)

__all__ = [
    "ApplicabilityMask",
    "CandidateSet",
    "EvaluationResult",
    "RuleAwareReranker",
    "RuleScorer",
    "RuleSpec",
    "Rulebook",
    "Scenario",
    "SelectionResult",
    "SelectorConfig",
    "Tier",
    "Trajectory",
    "ViolationMatrix",
    "applicability",
    "builtin_catalog",
    "confidence_select",
    "evaluate",
    "lexicographic_select",
    "load_scenario",
    "normalize",
    "save_scenario",
    "scalarized_select",
    "select",
    "weighted_sum_select",
    "with_overrides",
]
