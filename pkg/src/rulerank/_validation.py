"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

from typing import Iterable

import numpy as np
from sklearn.utils.validation import check_array

from .catalog import NUM_TIERS
from .scenario import SIMPLEX_TOL, Scenario


def check_scenarios(X, require_candidates: bool = True) -> list[Scenario]:
    """Accept a scenario or an iterable of scenarios; returns a list."""
    if isinstance(X, Scenario):
        X = [X]
    if isinstance(X, (str, bytes)) or not isinstance(X, Iterable):
        raise TypeError("expected a Scenario or an iterable of Scenario objects")
    out = list(X)
    if not out:
        raise ValueError("at least one scenario is required")
    for i, s in enumerate(out):
        if not isinstance(s, Scenario):
            raise TypeError(f"item {i} is {type(s).__name__}, not Scenario")
        if require_candidates and s.candidates is None:
            raise ValueError(f"scenario {s.id!r} has no candidate set")
    return out


def check_tier_scores(scores) -> np.ndarray:
    """Finite (K, 4) tier-score matrix with entries in [0, 1]."""
    s = check_array(scores, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if s.shape[1] != NUM_TIERS:
        raise ValueError(f"tier scores need {NUM_TIERS} columns, got {s.shape[1]}")
    if np.any(s < 0) or np.any(s > 1):
        raise ValueError("tier scores must lie in [0, 1]")
    return s


def check_simplex(p, k: int | None = None) -> np.ndarray:
    arr = check_array(p, dtype=np.float64, ensure_2d=False, ensure_all_finite=True)
    if arr.ndim != 1:
        raise ValueError("confidences must be 1-d")
    if k is not None and arr.shape[0] != k:
        raise ValueError(f"expected {k} confidences, got {arr.shape[0]}")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("confidences must be non-negative and sum to 1")
    return arr
