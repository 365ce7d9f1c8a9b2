"""scikit-learn style wrappers around evaluation and selection.

Samples are scenarios (each carrying its own candidate set), so ``X`` is a
sequence of ``Scenario`` objects rather than a numeric matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_scenarios
from .catalog import NUM_TIERS, Rulebook, builtin_catalog, with_overrides
from .metrics import compliance
from .proxies import MaskSource, Normalization, applicability, evaluate
from .selection import SelectorConfig, parse_strategy, select


class RuleScorer(TransformerMixin, BaseEstimator):
    """Map scenarios to per-candidate tier scores.

    ``transform`` returns an array of shape (n_scenarios, max_K, 4); rows
    beyond a scenario's own K are NaN.
    """

    def __init__(self, mask_policy="always_on", normalization="exponential", overrides=None):
        self.mask_policy = mask_policy
        self.normalization = normalization
        self.overrides = overrides

    def _build(self):
        Normalization(self.normalization)
        if MaskSource(self.mask_policy) not in (MaskSource.ALWAYS_ON, MaskSource.ACTIVATION_DERIVED):
            raise ValueError("estimators support the always_on and activation_derived mask policies")
        book = builtin_catalog()
        return with_overrides(book, self.overrides) if self.overrides else book

    def fit(self, X=None, y=None):
        self.rulebook_: Rulebook = self._build()
        self.n_rules_ = len(self.rulebook_)
        return self

    def _evaluate(self, s):
        mask = applicability(self.mask_policy, self.rulebook_, scenario=s)
        return evaluate(s.candidates, s, mask, self.rulebook_, self.normalization)

    def transform(self, X):
        check_is_fitted(self, "rulebook_")
        scenarios = check_scenarios(X)
        results = [self._evaluate(s) for s in scenarios]
        k_max = max(r.tier_scores.shape[0] for r in results)
        out = np.full((len(results), k_max, NUM_TIERS), np.nan)
        for i, r in enumerate(results):
            out[i, : r.tier_scores.shape[0]] = r.tier_scores
        return out


class RuleAwareReranker(BaseEstimator):
    """Select one candidate per scenario with a configurable strategy.

    ``fit`` only validates the configuration; nothing is learned. ``score``
    returns the fraction of scenarios whose selection violates no rule.
    """

    def __init__(self, strategy="lexicographic", epsilons=(1e-3,) * NUM_TIERS, scalarization_base=1001,
                 weighted_sum_weights=None, mask_policy="always_on", normalization="exponential",
                 overrides=None):
        self.strategy = strategy
        self.epsilons = epsilons
        self.scalarization_base = scalarization_base
        self.weighted_sum_weights = weighted_sum_weights
        self.mask_policy = mask_policy
        self.normalization = normalization
        self.overrides = overrides

    def fit(self, X=None, y=None):
        self.strategy_ = parse_strategy(self.strategy)
        self.config_ = SelectorConfig(tuple(self.epsilons), self.scalarization_base, self.weighted_sum_weights)
        if self.strategy_.value == "scalarized":
            self.config_.check_scalarization()
        self.scorer_ = RuleScorer(self.mask_policy, self.normalization, self.overrides).fit()
        return self

    def _run(self, X):
        check_is_fitted(self, "config_")
        out = []
        for s in check_scenarios(X):
            ev = self.scorer_._evaluate(s)
            v = ev.violations
            r = select(self.strategy_, ev.tier_scores, s.candidates.confidences, self.config_,
                       v.normalized, v.applicable)
            out.append((r, v))
        return out

    def predict(self, X) -> np.ndarray:
        """Selected candidate index per scenario."""
        return np.array([r.selected_index for r, _ in self._run(X)], dtype=int)

    def decision_trace(self, X) -> list[dict]:
        return [r.to_dict() for r, _ in self._run(X)]

    def score(self, X, y=None) -> float:
        rep = compliance(self._run(X), self.scorer_.rulebook_)
        return 1.0 - rep.total
