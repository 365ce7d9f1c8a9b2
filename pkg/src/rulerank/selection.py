"""Deterministic selection strategies over a fixed candidate set."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .catalog import NUM_TIERS
from .scenario import SIMPLEX_TOL


class SelectionError(ValueError):
    pass


class ConfigError(SelectionError):
    pass


class Tiebreak(str, enum.Enum):
    SINGLE_SURVIVOR = "single_survivor"
    CONFIDENCE = "confidence"
    LOWEST_INDEX = "lowest_index"


class Strategy(str, enum.Enum):
    LEXICOGRAPHIC = "lexicographic"
    SCALARIZED = "scalarized"
    WEIGHTED_SUM = "weighted_sum"
    CONFIDENCE = "confidence"


STRATEGY_ALIASES = {
    "lex": Strategy.LEXICOGRAPHIC,
    "scalar": Strategy.SCALARIZED,
    "wsum": Strategy.WEIGHTED_SUM,
    "conf": Strategy.CONFIDENCE,
}


def parse_strategy(name: str) -> Strategy:
    if name in STRATEGY_ALIASES:
        return STRATEGY_ALIASES[name]
    try:
        return Strategy(name)
    except ValueError:
        raise SelectionError(f"unknown strategy {name!r}") from None


@dataclass(frozen=True)
class SelectorConfig:
    epsilons: tuple[float, ...] = (1e-3,) * NUM_TIERS
    scalarization_base: int = 1001
    weighted_sum_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if len(eps) != NUM_TIERS:
            raise ConfigError(f"need {NUM_TIERS} tolerances, got {len(eps)}")
        if any(not math.isfinite(e) or e < 0 for e in eps):
            raise ConfigError("tolerances must be finite and >= 0")
        object.__setattr__(self, "epsilons", eps)
        if int(self.scalarization_base) != self.scalarization_base or self.scalarization_base < 2:
            raise ConfigError("scalarization base must be an integer >= 2")
        object.__setattr__(self, "scalarization_base", int(self.scalarization_base))
        if self.weighted_sum_weights is not None:
            w = tuple(float(x) for x in self.weighted_sum_weights)
            if any(not math.isfinite(x) or x < 0 for x in w):
                raise ConfigError("weighted-sum weights must be finite and >= 0")
            object.__setattr__(self, "weighted_sum_weights", w)

    def min_base(self) -> int | None:
        """Smallest base preserving tier priority; None when a tolerance is zero."""
        e = min(self.epsilons)
        if e <= 0:
            return None
        return math.ceil(1.0 / e) + 1

    def check_scalarization(self) -> None:
        need = self.min_base()
        if need is None:
            raise ConfigError("scalarization needs strictly positive tolerances")
        if self.scalarization_base < need:
            raise ConfigError(
                f"scalarization base {self.scalarization_base} is below ceil(1/eps)+1 = {need}"
            )


@dataclass(frozen=True, eq=False)
class SelectionResult:
    selected_index: int
    tier_scores: np.ndarray
    infeasible: bool
    survivors: tuple[tuple[int, ...], ...]
    tiebreak: Tiebreak
    strategy: Strategy
    objective: float | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "selected_index": self.selected_index,
            "tier_scores": [float(x) for x in self.tier_scores],
            "survivors": [list(s) for s in self.survivors],
            "tiebreak": self.tiebreak.value,
            "infeasible": self.infeasible,
        }


def _check_inputs(scores, confidences) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[1] != NUM_TIERS:
        raise SelectionError(f"tier scores must be (K, {NUM_TIERS}), got {s.shape}")
    if s.shape[0] == 0:
        raise SelectionError("empty candidate set")
    if not np.all(np.isfinite(s)):
        raise SelectionError("tier scores must be finite")
    p = np.asarray(confidences, dtype=float)
    if p.shape != (s.shape[0],):
        raise SelectionError("one confidence per candidate required")
    _check_simplex(p)
    return s, p


def _check_simplex(p: np.ndarray) -> None:
    if not np.all(np.isfinite(p)) or np.any(p < 0) or abs(float(p.sum()) - 1.0) > SIMPLEX_TOL:
        raise SelectionError("confidences must be non-negative and sum to 1")


def _confidence_tiebreak(pool: Sequence[int], p: np.ndarray) -> tuple[int, Tiebreak]:
    if len(pool) == 1:
        return pool[0], Tiebreak.SINGLE_SURVIVOR
    best = max(p[k] for k in pool)
    top = [k for k in pool if p[k] == best]
    if len(top) == 1:
        return top[0], Tiebreak.CONFIDENCE
    return min(top), Tiebreak.LOWEST_INDEX


def _result(k: int, s: np.ndarray, survivors, tiebreak, strategy, objective=None) -> SelectionResult:
    row = np.array(s[k], dtype=float)
    row.setflags(write=False)
    return SelectionResult(int(k), row, bool(row[0] > 0), tuple(tuple(c) for c in survivors),
                           tiebreak, strategy, objective)


def lexicographic_select(scores, confidences, cfg: SelectorConfig | None = None) -> SelectionResult:
    """Tolerance-based lexicographic selection.

    Per tier keep candidates with score <= pool minimum + tolerance, then take
    the most confident survivor, then the lowest index.
    """
    cfg = cfg or SelectorConfig()
    s, p = _check_inputs(scores, confidences)
    pool = list(range(s.shape[0]))
    survivors = []
    for tier in range(NUM_TIERS):
        col = s[:, tier]
        bound = min(col[k] for k in pool) + cfg.epsilons[tier]
        pool = [k for k in pool if col[k] <= bound]
        survivors.append(pool)
    k, tb = _confidence_tiebreak(pool, p)
    return _result(k, s, survivors, tb, Strategy.LEXICOGRAPHIC)


def scalarize(scores, base: int) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    powers = np.array([float(base) ** (NUM_TIERS - t) for t in range(NUM_TIERS)])
    return s @ powers


def scalarized_select(scores, confidences, cfg: SelectorConfig | None = None) -> SelectionResult:
    """Argmin of ``sum_l B^(4-l) S_l``; exact ties fall back to confidence, then index."""
    cfg = cfg or SelectorConfig()
    cfg.check_scalarization()
    s, p = _check_inputs(scores, confidences)
    score = scalarize(s, cfg.scalarization_base)
    best = score.min()
    pool = [int(k) for k in np.nonzero(score == best)[0]]
    k, tb = _confidence_tiebreak(pool, p)
    return _result(k, s, [pool] * NUM_TIERS, tb, Strategy.SCALARIZED, float(score[k]))


def weighted_sum_select(normalized, applicable, confidences, cfg: SelectorConfig | None = None,
                        tier_scores=None) -> SelectionResult:
    """Argmin of ``sum_r w_r a_r Vbar_r`` with the lowest index winning exact ties.

    ``normalized`` is the (K, R) severity matrix, already zero where a rule is
    not active; ``applicable`` the R-vector mask.
    """
    cfg = cfg or SelectorConfig()
    v = np.asarray(normalized, dtype=float)
    if v.ndim != 2 or v.shape[0] == 0:
        raise SelectionError("severity matrix must be non-empty (K, R)")
    a = np.asarray(applicable, dtype=float)
    if a.shape != (v.shape[1],):
        raise SelectionError("mask length must match the number of rules")
    w = np.ones(v.shape[1]) if cfg.weighted_sum_weights is None else np.asarray(cfg.weighted_sum_weights)
    if w.shape != (v.shape[1],):
        raise SelectionError("weighted-sum weights must match the number of rules")
    total = v @ (w * a)
    best = total.min()
    pool = [int(k) for k in np.nonzero(total == best)[0]]
    k = pool[0]
    s = np.zeros((v.shape[0], NUM_TIERS)) if tier_scores is None else np.asarray(tier_scores, dtype=float)
    tb = Tiebreak.SINGLE_SURVIVOR if len(pool) == 1 else Tiebreak.LOWEST_INDEX
    return _result(k, s, [pool] * NUM_TIERS, tb, Strategy.WEIGHTED_SUM, float(total[k]))


def confidence_select(confidences, tier_scores=None) -> SelectionResult:
    """Most confident candidate; lowest index on exact ties."""
    p = np.asarray(confidences, dtype=float)
    if p.ndim != 1 or p.shape[0] == 0:
        raise SelectionError("empty candidate set")
    _check_simplex(p)
    best = p.max()
    pool = [int(k) for k in np.nonzero(p == best)[0]]
    s = np.zeros((p.shape[0], NUM_TIERS)) if tier_scores is None else np.asarray(tier_scores, dtype=float)
    tb = Tiebreak.SINGLE_SURVIVOR if len(pool) == 1 else Tiebreak.LOWEST_INDEX
    return _result(pool[0], s, [pool] * NUM_TIERS, tb, Strategy.CONFIDENCE)


def select(strategy: str | Strategy, tier_scores, confidences, cfg: SelectorConfig | None = None,
           normalized=None, applicable=None) -> SelectionResult:
    strategy = parse_strategy(strategy) if isinstance(strategy, str) else strategy
    if strategy is Strategy.LEXICOGRAPHIC:
        return lexicographic_select(tier_scores, confidences, cfg)
    if strategy is Strategy.SCALARIZED:
        return scalarized_select(tier_scores, confidences, cfg)
    if strategy is Strategy.WEIGHTED_SUM:
        if normalized is None or applicable is None:
            raise SelectionError("weighted-sum selection needs the severity matrix and mask")
        return weighted_sum_select(normalized, applicable, confidences, cfg, tier_scores)
    return confidence_select(confidences, tier_scores)
