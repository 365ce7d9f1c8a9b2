"""Fixed-candidate-set comparison of selection strategies."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import stats
from .catalog import Rulebook, builtin_catalog
from .metrics import accuracy, compliance
from .proxies import ApplicabilityMask, EvaluationResult, MaskSource, applicability, evaluate
from .scenario import Scenario
from .selection import SelectorConfig, Strategy, parse_strategy, select


class BenchmarkError(ValueError):
    pass


@dataclass
class ScenarioRun:
    scenario_id: str
    evaluation: EvaluationResult
    selections: dict  # strategy value -> SelectionResult
    accuracy: dict = field(default_factory=dict)  # strategy value -> AccuracyReport


def _mask_for(policy: MaskSource, scenario: Scenario, book: Rulebook, info: Mapping | None) -> ApplicabilityMask:
    info = info or {}
    if policy is MaskSource.ORACLE and "labels" not in info:
        raise BenchmarkError(f"{scenario.id}: oracle mask needs labels")
    if policy in (MaskSource.HYBRID, MaskSource.THRESHOLDED) and "scores" not in info:
        raise BenchmarkError(f"{scenario.id}: {policy.value} mask needs applicability scores")
    return applicability(policy, book, labels=info.get("labels"), scores=info.get("scores"), scenario=scenario)


def run_scenarios(scenarios: Sequence[Scenario], strategies: Sequence[str | Strategy],
                  mask_policy: str | MaskSource = "always_on", rulebook: Rulebook | None = None,
                  cfg: SelectorConfig | None = None, labels: Mapping | None = None,
                  normalization: str = "exponential") -> list[ScenarioRun]:
    """Evaluate each scenario once and run every strategy on that same result."""
    if len(scenarios) == 0:
        raise BenchmarkError("no scenarios")
    book = rulebook or builtin_catalog()
    cfg = cfg or SelectorConfig()
    strats = [parse_strategy(s) if isinstance(s, str) else Strategy(s) for s in strategies]
    if not strats:
        raise BenchmarkError("no strategies")
    if Strategy.SCALARIZED in strats:
        cfg.check_scalarization()
    policy = MaskSource(mask_policy)
    runs = []
    for s in sorted(scenarios, key=lambda x: x.id):
        if s.candidates is None:
            raise BenchmarkError(f"{s.id}: scenario has no candidates")
        mask = _mask_for(policy, s, book, (labels or {}).get(s.id))
        ev = evaluate(s.candidates, s, mask, book, normalization)
        v = ev.violations
        p = s.candidates.confidences
        sel = {}
        for st in strats:
            sel[st.value] = select(st, ev.tier_scores, p, cfg, v.normalized, v.applicable)
        acc = {}
        if s.ground_truth is not None:
            for name, r in sel.items():
                acc[name] = accuracy(s.candidates, r.selected_index, s.ground_truth)
        runs.append(ScenarioRun(s.id, ev, sel, acc))
    return runs


def _rate_ci(flags: np.ndarray, seed: int, resamples: int) -> dict:
    ci = stats.bootstrap_ci(flags.astype(float), "rate", resamples=resamples, seed=seed)
    return {"rate": ci.estimate, "lo": ci.lo, "hi": ci.hi}


def summarize(runs: Sequence[ScenarioRun], rulebook: Rulebook | None = None, with_stats: bool = True,
              seed: int = 0, resamples: int = 10_000) -> dict:
    """JSON-ready comparison report over completed runs."""
    book = rulebook or builtin_catalog()
    names = list(runs[0].selections)
    per = {}
    flags = {}
    sel_ade = {}
    for name in names:
        rep = compliance([(r.selections[name], r.evaluation.violations) for r in runs], book)
        entry = {"compliance": rep.to_dict()}
        flags[name] = rep
        accs = [r.accuracy[name] for r in runs if name in r.accuracy]
        if accs:
            fields = ("sel_ade", "sel_fde", "min_ade", "min_fde", "ade", "fde", "miss_rate")
            entry["accuracy"] = {f: float(np.mean([getattr(a, f) for a in accs])) for f in fields}
            entry["accuracy"]["n"] = len(accs)
            sel_ade[name] = np.array([a.sel_ade for a in accs])
        entry["infeasible_rate"] = float(np.mean([r.selections[name].infeasible for r in runs]))
        if with_stats:
            entry["ci"] = {
                "S+L": _rate_ci(rep.s_plus_l_flags, seed, resamples),
                "Total": _rate_ci(rep.total_flags, seed, resamples),
            }
        per[name] = entry
    report = {"n_scenarios": len(runs), "strategies": per}
    if with_stats and len(names) > 1:
        pairs = {}
        for a, b in itertools.combinations(names, 2):
            key = f"{a}|{b}"
            m_total = stats.mcnemar(flags[a].total_flags, flags[b].total_flags)
            m_sl = stats.mcnemar(flags[a].s_plus_l_flags, flags[b].s_plus_l_flags)
            entry = {
                "mcnemar_total": _mcnemar_dict(m_total),
                "mcnemar_s_plus_l": _mcnemar_dict(m_sl),
            }
            if a in sel_ade and b in sel_ade and len(sel_ade[a]) == len(sel_ade[b]):
                w = stats.wilcoxon_signed_rank(sel_ade[a], sel_ade[b])
                entry["wilcoxon_sel_ade"] = {"w_plus": w.w_plus, "z": w.z, "p_value": w.p_value, "n": w.n}
            pairs[key] = entry
        report["pairs"] = pairs
        report["bonferroni_alpha"] = stats.bonferroni(stats.ALPHA, len(pairs))
    report["selections"] = {r.scenario_id: {n: r.selections[n].selected_index for n in names} for r in runs}
    return report


def _mcnemar_dict(m: stats.McNemarResult) -> dict:
    return {"b": m.b, "c": m.c, "statistic": m.statistic, "p_value": m.p_value, "method": m.method}


def run_benchmark(scenarios: Sequence[Scenario], strategies: Sequence[str | Strategy],
                  mask_policy: str | MaskSource = "always_on", rulebook: Rulebook | None = None,
                  cfg: SelectorConfig | None = None, labels: Mapping | None = None,
                  normalization: str = "exponential", with_stats: bool = True, seed: int = 0,
                  resamples: int = 10_000) -> dict:
    """Run all strategies on identical candidate sets and compare them."""
    runs = run_scenarios(scenarios, strategies, mask_policy, rulebook, cfg, labels, normalization)
    return summarize(runs, rulebook, with_stats, seed, resamples)

