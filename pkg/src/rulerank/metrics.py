"""Trajectory accuracy and rule-compliance aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import NUM_TIERS, Rulebook, Tier, builtin_catalog
from .proxies import ViolationMatrix
from .scenario import CandidateSet, Trajectory
from .selection import SelectionResult

MISS_THRESHOLD = 2.0


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class AccuracyReport:
    ade: float
    fde: float
    min_ade: float
    min_fde: float
    min_fde_any: float
    sel_ade: float
    sel_fde: float
    miss_rate: float
    miss_threshold: float
    best_index: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def displacement_errors(candidates, gt) -> tuple[np.ndarray, np.ndarray]:
    """Per-candidate ADE and FDE arrays."""
    c = candidates.stacked() if isinstance(candidates, CandidateSet) else np.asarray(candidates, dtype=float)
    g = gt.array if isinstance(gt, Trajectory) else np.asarray(gt, dtype=float)
    if c.shape[1] != g.shape[0]:
        raise MetricsError(f"ground truth has {g.shape[0]} steps, candidates have {c.shape[1]}")
    d = np.linalg.norm(c[..., :2] - g[None, :, :2], axis=-1)
    return d.mean(axis=1), d[:, -1]


def accuracy(candidates, selected: int, gt, miss_threshold: float = MISS_THRESHOLD) -> AccuracyReport:
    """Accuracy of the selected candidate and of the best-of-K.

    ``ade``/``fde`` are averaged over all K; ``min_fde`` is the FDE of the
    ADE-best mode, ``min_fde_any`` the independent minimum over FDEs.
    """
    ade, fde = displacement_errors(candidates, gt)
    if not 0 <= selected < ade.shape[0]:
        raise MetricsError("selected index out of range")
    best = int(np.argmin(ade))
    return AccuracyReport(
        ade=float(ade.mean()),
        fde=float(fde.mean()),
        min_ade=float(ade[best]),
        min_fde=float(fde[best]),
        min_fde_any=float(fde.min()),
        sel_ade=float(ade[selected]),
        sel_fde=float(fde[selected]),
        miss_rate=float(fde[best] > miss_threshold),
        miss_threshold=float(miss_threshold),
        best_index=best,
    )


@dataclass(frozen=True)
class ComplianceReport:
    n: int
    tier_rates: tuple[float, ...]
    s_plus_l: float
    total: float
    rule_counts: dict
    tier_flags: np.ndarray
    total_flags: np.ndarray
    s_plus_l_flags: np.ndarray

    def to_dict(self) -> dict:
        names = [t.name.capitalize() for t in Tier]
        return {
            "n": self.n,
            **{names[i]: self.tier_rates[i] for i in range(NUM_TIERS)},
            "S+L": self.s_plus_l,
            "Total": self.total,
            "rule_counts": dict(self.rule_counts),
        }


def selected_violations(result: SelectionResult, vm: ViolationMatrix) -> np.ndarray:
    """Boolean R-vector of rules the selected candidate violates."""
    k = result.selected_index
    return vm.active[k] & (vm.normalized[k] > 0)


def compliance(results: Sequence[tuple[SelectionResult, ViolationMatrix]],
               rulebook: Rulebook | None = None) -> ComplianceReport:
    """Scenario-level violation rates with union semantics per tier and overall."""
    if len(results) == 0:
        raise MetricsError("compliance needs at least one scenario")
    book = rulebook or builtin_catalog()
    tiers = book.tiers
    flags = np.array([selected_violations(r, vm) for r, vm in results], dtype=bool)
    if flags.shape[1] != len(book):
        raise MetricsError("violation matrices do not match the rulebook")
    tier_flags = np.stack([flags[:, tiers == t].any(axis=1) for t in range(NUM_TIERS)], axis=1)
    sl = tier_flags[:, 0] | tier_flags[:, 1]
    total = flags.any(axis=1)
    counts = {rid: int(c) for rid, c in zip(book.ids, flags.sum(axis=0))}
    return ComplianceReport(
        n=len(results),
        tier_rates=tuple(float(x) for x in tier_flags.mean(axis=0)),
        s_plus_l=float(sl.mean()),
        total=float(total.mean()),
        rule_counts=counts,
        tier_flags=tier_flags,
        total_flags=total,
        s_plus_l_flags=sl,
    )
