"""Seeded property suite for the selector, the aggregation and the proxy stack.

Every instance is generated from ``(seed, property, index)`` so any reported
counterexample can be replayed on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .catalog import NUM_TIERS, Rulebook, builtin_catalog
from .proxies import evaluate, tier_scores_from
from .selection import (
    SelectorConfig,
    confidence_select,
    lexicographic_select,
    scalarized_select,
    weighted_sum_select,
)
from .synth import degenerate_instance

MAX_COUNTEREXAMPLES = 20
PERMUTATIONS = 5
DEGENERATE_CASES = 320
PROPERTY_CODES = {
    "order_invariance": 1,
    "brute_force_oracle": 2,
    "scalarization_agreement": 3,
    "degenerate_finiteness": 4,
    "mask_monotonicity": 5,
    "tier_score_bounds": 6,
}


@dataclass
class PropertyResult:
    name: str
    trials: int = 0
    passed: int = 0
    skipped: int = 0
    counterexamples: list = field(default_factory=list)

    @property
    def failed(self) -> int:
        return self.trials - self.passed - self.skipped

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "passed": self.passed,
            "skipped": self.skipped,
            "failed": self.failed,
            "counterexamples": list(self.counterexamples),
        }


def instance_rng(seed: int, prop: str, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), PROPERTY_CODES[prop], int(index)])


def random_instance(rng: np.random.Generator, uniform_only: bool = False):
    """Tier scores (K, 4) and a confidence simplex, K in 1..8.

    Besides plain uniform scores, some instances duplicate rows, tie
    confidences or snap scores to a coarse grid so the tolerance band and
    the tiebreak paths are exercised.
    """
    K = int(rng.integers(1, 9))
    s = rng.uniform(0.0, 1.0, size=(K, NUM_TIERS))
    p = rng.dirichlet(np.ones(K))
    if not uniform_only:
        u = rng.random()
        if u < 0.15:
            s = np.round(s * 200.0) / 200.0
        elif u < 0.30:
            s = np.round(s * 1000.0) / 1000.0 * (rng.random((K, NUM_TIERS)) < 0.3)
        elif u < 0.40 and K > 1:
            j = int(rng.integers(1, K))
            s[j] = s[0]
            p[j] = p[0]
            p = p / p.sum()
        elif u < 0.50:
            p = np.full(K, 1.0 / K)
    return s, p


def brute_force_lexicographic(scores, confidences, epsilons) -> int:
    """Independent re-execution of tolerance-based lexicographic selection."""
    s = np.asarray(scores, dtype=float)
    p = np.asarray(confidences, dtype=float)
    alive = np.ones(s.shape[0], dtype=bool)
    for tier in range(NUM_TIERS):
        best = np.min(s[alive, tier])
        alive = alive & (s[:, tier] <= best + epsilons[tier])
    idx = np.flatnonzero(alive)
    # highest confidence, then lowest index
    order = np.lexsort((idx, -p[idx]))
    return int(idx[order[0]])


def _content(s: np.ndarray, p: np.ndarray, k: int) -> tuple:
    return tuple(s[k].tolist()) + (float(p[k]),)


def _top_confidence(r, p: np.ndarray) -> list[int]:
    pool = list(r.survivors[-1])
    best = max(p[k] for k in pool)
    return [k for k in pool if p[k] == best]


def check_order_invariance(seed: int, index: int, cfg: SelectorConfig) -> tuple[bool, dict]:
    """Same content under permutation; tied survivors must resolve to the lowest index.

    An instance is degenerate when survivors with different content share the
    top confidence; only the lowest-index rule is checked there.
    """
    rng = instance_rng(seed, "order_invariance", index)
    s, p = random_instance(rng)
    r0 = lexicographic_select(s, p, cfg)
    ref = r0.selected_index
    want = _content(s, p, ref)
    degenerate = len({_content(s, p, k) for k in _top_confidence(r0, p)}) > 1
    for _ in range(PERMUTATIONS):
        perm = rng.permutation(s.shape[0])
        sp, pp = s[perm], p[perm]
        r = lexicographic_select(sp, pp, cfg)
        top = _top_confidence(r, pp)
        if r.selected_index != min(top):
            return False, {"permutation": perm.tolist(), "selected": r.selected_index, "ties": top}
        got = _content(s, p, int(perm[r.selected_index]))
        if not degenerate and got != want:
            return False, {"reference": ref, "permutation": perm.tolist(), "selected": int(perm[r.selected_index])}
    return True, {}


def check_brute_force(seed: int, index: int, cfg: SelectorConfig) -> tuple[bool, dict]:
    s, p = random_instance(instance_rng(seed, "brute_force_oracle", index))
    got = lexicographic_select(s, p, cfg).selected_index
    want = brute_force_lexicographic(s, p, cfg.epsilons)
    return got == want, {"selected": got, "oracle": want}


def first_differing_gap(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.nonzero(a != b)[0]
    if diff.size == 0:
        return 0.0
    return float(abs(a[diff[0]] - b[diff[0]]))


def check_scalarization(seed: int, index: int, cfg: SelectorConfig) -> tuple[bool | None, dict]:
    """True/False on instances where the gap condition holds; None when it does not apply."""
    s, p = random_instance(instance_rng(seed, "scalarization_agreement", index), uniform_only=True)
    lex = lexicographic_select(s, p, cfg).selected_index
    sca = scalarized_select(s, p, cfg).selected_index
    if lex == sca:
        return True, {}
    gap = first_differing_gap(s[lex], s[sca])
    if gap < min(cfg.epsilons):
        return None, {"gap": gap}
    return False, {"lexicographic": lex, "scalarized": sca, "gap": gap}


def check_degenerate(seed: int, index: int, cfg: SelectorConfig, book: Rulebook) -> tuple[bool, dict]:
    category, scenario = degenerate_instance(seed, index)
    try:
        res = evaluate(scenario.candidates, scenario, rulebook=book)
    except Exception as exc:  # any raise is a failure of the suite
        return False, {"category": category, "error": f"{type(exc).__name__}: {exc}"}
    v = res.violations
    ok = (np.all(np.isfinite(v.raw)) and np.all(v.raw >= 0) and np.all(np.isfinite(v.normalized))
          and np.all((v.normalized >= 0) & (v.normalized <= 1))
          and np.all(np.isfinite(res.tier_scores)) and np.all((res.tier_scores >= 0) & (res.tier_scores <= 1)))
    if not ok:
        return False, {"category": category, "error": "non-finite or out-of-range severity"}
    K = len(scenario.candidates)
    p = scenario.candidates.confidences
    for r in (lexicographic_select(res.tier_scores, p, cfg),
              weighted_sum_select(v.normalized, v.applicable, p, cfg, res.tier_scores),
              confidence_select(p, res.tier_scores)):
        if not 0 <= r.selected_index < K:
            return False, {"category": category, "error": f"{r.strategy.value} picked {r.selected_index}"}
    return True, {"category": category}


def _random_severities(rng: np.random.Generator, R: int):
    K = int(rng.integers(1, 9))
    v = rng.uniform(0.0, 1.0, size=(K, R))
    u = rng.random()
    if u < 0.2:
        v = np.where(rng.random((K, R)) < 0.5, 1.0, v)
    elif u < 0.4:
        v = np.where(rng.random((K, R)) < 0.5, 0.0, v)
    return v


def check_mask_monotonicity(seed: int, index: int, book: Rulebook) -> tuple[bool, dict]:
    rng = instance_rng(seed, "mask_monotonicity", index)
    R = len(book)
    v = _random_severities(rng, R)
    low = rng.random(R) < rng.random()
    high = low | (rng.random(R) < rng.random())
    s_low = tier_scores_from(np.where(low & book.proxied, v, 0.0), book)
    s_high = tier_scores_from(np.where(high & book.proxied, v, 0.0), book)
    bad = np.argwhere(s_high < s_low)
    if bad.size:
        return False, {"candidate_tier": bad[0].tolist()}
    return True, {}


def check_bounds(seed: int, index: int, book: Rulebook) -> tuple[bool, dict]:
    rng = instance_rng(seed, "tier_score_bounds", index)
    R = len(book)
    v = _random_severities(rng, R)
    mask = rng.random(R) < rng.random()
    s = tier_scores_from(np.where(mask & book.proxied, v, 0.0), book)
    if np.all(np.isfinite(s)) and np.all((s >= 0) & (s <= 1)):
        return True, {}
    return False, {"min": float(np.min(s)), "max": float(np.max(s))}


def _run(result: PropertyResult, n: int, check: Callable[[int], tuple]) -> PropertyResult:
    for i in range(n):
        ok, info = check(i)
        result.trials += 1
        if ok is None:
            result.skipped += 1
        elif ok:
            result.passed += 1
        elif len(result.counterexamples) < MAX_COUNTEREXAMPLES:
            result.counterexamples.append({"index": i, **info})
    return result


def verify(seed: int = 0, n: int = 10_000, cfg: SelectorConfig | None = None,
           rulebook: Rulebook | None = None, degenerate_cases: int = DEGENERATE_CASES) -> dict:
    """Run properties (a)-(f); failures are reported, never raised."""
    cfg = cfg or SelectorConfig()
    cfg.check_scalarization()
    book = rulebook or builtin_catalog()
    props = [
        _run(PropertyResult("order_invariance"), n, lambda i: check_order_invariance(seed, i, cfg)),
        _run(PropertyResult("brute_force_oracle"), n, lambda i: check_brute_force(seed, i, cfg)),
        _run(PropertyResult("scalarization_agreement"), n, lambda i: check_scalarization(seed, i, cfg)),
        _run(PropertyResult("degenerate_finiteness"), degenerate_cases,
             lambda i: check_degenerate(seed, i, cfg, book)),
        _run(PropertyResult("mask_monotonicity"), n, lambda i: check_mask_monotonicity(seed, i, book)),
        _run(PropertyResult("tier_score_bounds"), n, lambda i: check_bounds(seed, i, book)),
    ]
    return {
        "seed": int(seed),
        "n": int(n),
        "epsilons": list(cfg.epsilons),
        "scalarization_base": cfg.scalarization_base,
        "properties": [p.to_dict() for p in props],
        "all_passed": all(p.failed == 0 for p in props),
    }


def replay(prop: str, seed: int, index: int, cfg: SelectorConfig | None = None,
           rulebook: Rulebook | None = None) -> tuple[bool | None, dict]:
    """Re-run a single instance of one property."""
    cfg = cfg or SelectorConfig()
    book = rulebook or builtin_catalog()
    checks = {
        "order_invariance": lambda: check_order_invariance(seed, index, cfg),
        "brute_force_oracle": lambda: check_brute_force(seed, index, cfg),
        "scalarization_agreement": lambda: check_scalarization(seed, index, cfg),
        "degenerate_finiteness": lambda: check_degenerate(seed, index, cfg, book),
        "mask_monotonicity": lambda: check_mask_monotonicity(seed, index, book),
        "tier_score_bounds": lambda: check_bounds(seed, index, book),
    }
    if prop not in checks:
        raise ValueError(f"unknown property {prop!r}")
    return checks[prop]()
