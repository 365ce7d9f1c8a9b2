"""Paired significance tests, bootstrap intervals and rank correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

ALPHA = 0.05
EXACT_BELOW = 25


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class McNemarResult:
    statistic: float
    p_value: float
    method: str
    b: int
    c: int


def mcnemar_counts(b: int, c: int) -> McNemarResult:
    """Continuity-corrected chi-square for b + c >= 25, exact binomial otherwise."""
    b, c = int(b), int(c)
    n = b + c
    if n == 0:
        return McNemarResult(0.0, 1.0, "degenerate", b, c)
    stat = (abs(b - c) - 1) ** 2 / n
    if n >= EXACT_BELOW:
        return McNemarResult(float(stat), float(sps.chi2.sf(stat, 1)), "chi2", b, c)
    p = min(1.0, 2.0 * float(sps.binom.cdf(min(b, c), n, 0.5)))
    return McNemarResult(float(stat), p, "exact", b, c)


def mcnemar(a_flags: Sequence[bool], b_flags: Sequence[bool]) -> McNemarResult:
    """Paired test on per-scenario violation flags of two selectors.

    b counts scenarios where only the first selector violates, c where only
    the second does.
    """
    a = np.asarray(a_flags, dtype=bool)
    o = np.asarray(b_flags, dtype=bool)
    if a.shape != o.shape:
        raise StatsError("paired flag vectors must have equal length")
    return mcnemar_counts(int(np.sum(a & ~o)), int(np.sum(~a & o)))


@dataclass(frozen=True)
class WilcoxonResult:
    w_plus: float
    p_value: float
    n: int
    z: float


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    n = len(x)
    while i < n:
        j = i
        while j + 1 < n and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Two-sided signed-rank test, zero differences dropped, normal approximation with tie correction."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise StatsError("paired samples must have equal length")
    d = x - y
    d = d[d != 0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, 0.0)
    r = average_ranks(np.abs(d))
    w_plus = float(r[d > 0].sum())
    mean = n * (n + 1) / 4.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(counts**3 - counts)) / 48.0
    if var <= 0:
        return WilcoxonResult(w_plus, 1.0, n, 0.0)
    z = (w_plus - mean) / math.sqrt(var)
    p = float(min(1.0, 2.0 * sps.norm.sf(abs(z))))
    return WilcoxonResult(w_plus, p, n, float(z))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float


def ks_two_sample(x: Sequence[float], y: Sequence[float]) -> KSResult:
    """Sup-norm distance between empirical CDFs with the asymptotic Kolmogorov p-value."""
    a = np.sort(np.asarray(x, dtype=float))
    b = np.sort(np.asarray(y, dtype=float))
    if a.size == 0 or b.size == 0:
        raise StatsError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    p = float(sps.kstwobign.sf(d * en)) if d > 0 else 1.0
    return KSResult(d, min(1.0, p))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    estimate: float


def bootstrap_ci(values: Sequence[float], statistic: str = "mean", resamples: int = 10_000,
                 seed: int = 0, level: float = 0.95) -> Interval:
    """Percentile bootstrap interval from seeded resampling."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise StatsError("bootstrap needs a non-empty 1-d sample")
    if statistic not in ("mean", "rate"):
        raise StatsError(f"unsupported statistic {statistic!r}")
    if statistic == "rate" and not np.all((v == 0) | (v == 1)):
        raise StatsError("rate statistic needs 0/1 values")
    rng = np.random.default_rng(seed)
    means = np.empty(resamples)
    chunk = max(1, 2_000_000 // v.size)
    for start in range(0, resamples, chunk):
        stop = min(resamples, start + chunk)
        idx = rng.integers(0, v.size, size=(stop - start, v.size))
        means[start:stop] = v[idx].mean(axis=1)
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [tail, 100.0 - tail])
    return Interval(float(lo), float(hi), float(v.mean()))


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Rank correlation; None when either input has zero variance."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape:
        raise StatsError("inputs must have equal length")
    if a.size < 2:
        raise StatsError("need at least 2 pairs")
    ra, rb = average_ranks(a), average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    den = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if den == 0:
        return None
    return float(np.clip((ra @ rb) / den, -1.0, 1.0))


def bonferroni(alpha: float, comparisons: int) -> float:
    """Informational family-wise threshold; never applied automatically."""
    return alpha / max(1, comparisons)
