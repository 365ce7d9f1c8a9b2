import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from rulerank import stats
from rulerank.catalog import builtin_catalog
from rulerank.metrics import MetricsError, accuracy, compliance
from rulerank.proxies import ViolationMatrix
from rulerank.scenario import CandidateSet, Trajectory
from rulerank.selection import confidence_select


def line(offset_y: float, T: int = 50) -> np.ndarray:
    x = np.arange(T, dtype=float)
    return np.column_stack([x, np.full(T, offset_y), np.zeros(T), np.full(T, 10.0)])


# ---------------------------------------------------------------------------
# accuracy


def test_perfect_candidate_has_zero_error():
    gt = Trajectory(line(0.0))
    rep = accuracy(CandidateSet((gt,), np.array([1.0])), 0, gt)
    assert rep.min_ade == rep.min_fde == rep.sel_ade == rep.sel_fde == 0.0
    assert rep.miss_rate == 0.0


def test_constant_offsets():
    cs = CandidateSet((Trajectory(line(0.5)), Trajectory(line(1.0))), np.array([0.5, 0.5]))
    rep = accuracy(cs, 1, Trajectory(line(0.0)))
    assert rep.min_ade == pytest.approx(0.5)
    assert rep.sel_ade == pytest.approx(1.0)
    assert rep.ade == pytest.approx(0.75)
    assert rep.best_index == 0


def test_miss_threshold():
    cs = CandidateSet((Trajectory(line(2.5)),), np.array([1.0]))
    rep = accuracy(cs, 0, Trajectory(line(0.0)))
    assert rep.min_fde == pytest.approx(2.5) and rep.miss_rate == 1.0
    assert accuracy(cs, 0, Trajectory(line(0.0)), miss_threshold=3.0).miss_rate == 0.0


def test_min_fde_follows_the_ade_best_mode():
    # mode 0 is best on average, mode 1 ends closer
    a = line(0.5)
    b = line(3.0)
    b[-1, 1] = 0.1
    rep = accuracy(CandidateSet((Trajectory(a), Trajectory(b)), np.array([0.5, 0.5])), 0, Trajectory(line(0.0)))
    assert rep.min_fde == pytest.approx(0.5)
    assert rep.min_fde_any == pytest.approx(0.1)


def test_accuracy_validation():
    cs = CandidateSet((Trajectory(line(0.0)),), np.array([1.0]))
    with pytest.raises(MetricsError):
        accuracy(cs, 3, Trajectory(line(0.0)))
    with pytest.raises(MetricsError):
        accuracy(cs, 0, Trajectory(line(0.0, 40)))


# ---------------------------------------------------------------------------
# compliance


def matrix(k: int, hits: dict) -> ViolationMatrix:
    book = builtin_catalog()
    norm = np.zeros((k, len(book)))
    for (cand, rid), val in hits.items():
        norm[cand, book.index(rid)] = val
    active = norm > 0
    return ViolationMatrix(tuple(book.ids), norm.copy(), norm, active, active, np.ones(len(book), dtype=bool))


def test_total_rate_counts_scenarios():
    runs = []
    for i in range(10):
        vm = matrix(1, {(0, "L3.R0"): 0.2} if i < 2 else {})
        runs.append((confidence_select([1.0]), vm))
    rep = compliance(runs)
    assert rep.total == pytest.approx(0.2)
    assert rep.tier_rates == (0.0, 0.0, 0.0, 0.2)
    assert rep.s_plus_l == 0.0


def test_multi_tier_violation_counts_once_in_total():
    vm = matrix(1, {(0, "L0.R0"): 0.1, (0, "L3.R10"): 0.3, (0, "L3.R0"): 0.1})
    rep = compliance([(confidence_select([1.0]), vm), (confidence_select([1.0]), matrix(1, {}))])
    assert rep.total == 0.5
    assert rep.tier_rates == (0.5, 0.0, 0.0, 0.5)
    assert rep.s_plus_l == 0.5
    assert rep.rule_counts["L3.R10"] == 1
    d = rep.to_dict()
    assert d["Safety"] == 0.5 and d["S+L"] == 0.5 and d["Total"] == 0.5


def test_only_the_selected_candidate_counts():
    vm = matrix(2, {(1, "L0.R0"): 0.5})
    assert compliance([(confidence_select([0.6, 0.4]), vm)]).total == 0.0
    assert compliance([(confidence_select([0.4, 0.6]), vm)]).total == 1.0


def test_all_zero_rates():
    rep = compliance([(confidence_select([0.5, 0.5]), matrix(2, {}))] * 5)
    assert rep.total == 0 and rep.s_plus_l == 0 and set(rep.tier_rates) == {0.0}


# ---------------------------------------------------------------------------
# McNemar


def flags(b: int, c: int, same: int = 7):
    a = [True] * b + [False] * c + [True] * same
    o = [False] * b + [True] * c + [True] * same
    return a, o


def test_mcnemar_chi_square_example():
    r = stats.mcnemar(*flags(15, 5))
    assert (r.b, r.c) == (15, 5)
    assert r.statistic == 4.05
    assert r.statistic > sps.chi2.ppf(0.95, 1)
    # 20 discordant pairs is below the large-sample cut, so the p-value is exact
    assert r.method == "exact"
    assert r.p_value == pytest.approx(sps.binomtest(15, 20, 0.5).pvalue)
    assert r.p_value < 0.05


def test_mcnemar_large_uses_chi_square_with_continuity():
    r = stats.mcnemar_counts(20, 20)
    assert r.method == "chi2"
    assert r.statistic == pytest.approx(1 / 40)
    assert r.p_value > 0.8


def test_mcnemar_small_uses_exact_binomial():
    r = stats.mcnemar_counts(3, 2)
    assert r.method == "exact"
    assert r.p_value == pytest.approx(min(1.0, 2 * sps.binom.cdf(2, 5, 0.5)))
    assert r.p_value == pytest.approx(sps.binomtest(3, 5, 0.5).pvalue)


def test_mcnemar_no_discordant_pairs():
    r = stats.mcnemar_counts(0, 0)
    assert r.p_value == 1.0


def test_mcnemar_length_mismatch():
    with pytest.raises(stats.StatsError):
        stats.mcnemar([True], [True, False])


# ---------------------------------------------------------------------------
# Wilcoxon


def test_wilcoxon_identical_samples():
    assert stats.wilcoxon_signed_rank([1, 2, 3], [1, 2, 3]).p_value == 1.0


def test_wilcoxon_constant_shift():
    rng = np.random.default_rng(0)
    b = rng.normal(size=50)
    r = stats.wilcoxon_signed_rank(b + 0.5, b)
    assert r.w_plus == 50 * 51 / 2
    assert r.p_value < 1e-6


def test_wilcoxon_textbook_pairs_against_scipy():
    a = np.array([125, 115, 130, 140, 140, 115, 140, 125, 140, 135], dtype=float)
    b = np.array([110, 122, 125, 120, 140, 124, 123, 137, 135, 145], dtype=float)
    r = stats.wilcoxon_signed_rank(a, b)
    ref = sps.wilcoxon(a, b, zero_method="wilcox", correction=False, method="approx")
    assert r.n == 9
    assert r.w_plus == pytest.approx(27.0)
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=12, max_size=60))
def test_wilcoxon_matches_scipy_with_ties(diffs):
    d = np.array(diffs, dtype=float)
    if np.count_nonzero(d) < 10 or np.all(np.abs(d[d != 0]) == np.abs(d[d != 0])[0]):
        return
    r = stats.wilcoxon_signed_rank(d, np.zeros_like(d))
    ref = sps.wilcoxon(d, zero_method="wilcox", correction=False, method="approx")
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-12)


# ---------------------------------------------------------------------------
# KS


def test_ks_identical_and_disjoint():
    x = np.arange(10.0)
    assert stats.ks_two_sample(x, x).statistic == 0.0
    assert stats.ks_two_sample(x, x + 100).statistic == 1.0


def grid_scan_ks(x, y):
    grid = np.linspace(min(x.min(), y.min()) - 1, max(x.max(), y.max()) + 1, 20001)
    grid = np.union1d(grid, np.concatenate([x, y]))
    fx = np.array([np.mean(x <= g) for g in grid])
    fy = np.array([np.mean(y <= g) for g in grid])
    return np.max(np.abs(fx - fy))


@pytest.mark.parametrize("shift", [0.0, 0.1, 0.3, 0.7])
def test_ks_matches_grid_scan_and_scipy(shift):
    rng = np.random.default_rng(3)
    x, y = rng.uniform(size=200), rng.uniform(size=150) + shift
    r = stats.ks_two_sample(x, y)
    assert r.statistic == pytest.approx(grid_scan_ks(x, y), abs=1e-12)
    assert r.statistic == pytest.approx(sps.ks_2samp(x, y).statistic, abs=1e-12)
    lam = r.statistic * np.sqrt(200 * 150 / 350)
    if lam > 0:
        k = np.arange(1, 101)
        series = 2 * np.sum((-1.0) ** (k - 1) * np.exp(-2 * k**2 * lam**2))
        assert r.p_value == pytest.approx(min(1.0, series), rel=1e-9, abs=1e-15)


# ---------------------------------------------------------------------------
# bootstrap


def test_bootstrap_constant_and_deterministic():
    ci = stats.bootstrap_ci([2.0] * 30, resamples=500, seed=1)
    assert (ci.lo, ci.hi) == (2.0, 2.0)
    v = np.random.default_rng(0).random(100)
    assert stats.bootstrap_ci(v, seed=9, resamples=2000) == stats.bootstrap_ci(v, seed=9, resamples=2000)
    assert stats.bootstrap_ci(v, seed=9, resamples=2000) != stats.bootstrap_ci(v, seed=10, resamples=2000)


def test_bootstrap_validation():
    with pytest.raises(stats.StatsError):
        stats.bootstrap_ci([])
    with pytest.raises(stats.StatsError):
        stats.bootstrap_ci([0.5, 1.0], "rate")
    with pytest.raises(stats.StatsError):
        stats.bootstrap_ci([0.5, 1.0], "median")


def bernoulli_coverage(trials: int = 100, n: int = 1000, p: float = 0.3, resamples: int = 2000) -> int:
    hits = 0
    for t in range(trials):
        sample = (np.random.default_rng([77, t]).random(n) < p).astype(float)
        ci = stats.bootstrap_ci(sample, "rate", resamples=resamples, seed=t)
        hits += ci.lo <= p <= ci.hi
    return hits


def test_bootstrap_coverage():
    assert bernoulli_coverage() >= 93


# ---------------------------------------------------------------------------
# Spearman


def test_spearman_extremes_and_undefined():
    x = np.arange(10.0)
    assert stats.spearman(x, x) == pytest.approx(1.0)
    assert stats.spearman(x, -x) == pytest.approx(-1.0)
    assert stats.spearman(x, np.ones(10)) is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=3, max_size=30))
def test_spearman_matches_scipy(pairs):
    x, y = np.array(pairs, dtype=float).T
    got = stats.spearman(x, y)
    if np.all(x == x[0]) or np.all(y == y[0]):
        assert got is None
    else:
        assert got == pytest.approx(sps.spearmanr(x, y).statistic, abs=1e-12)


def test_bonferroni_is_informational():
    assert stats.bonferroni(0.05, 3) == pytest.approx(0.05 / 3)
    assert stats.bonferroni(0.05, 0) == 0.05
