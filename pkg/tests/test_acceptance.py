"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line; the lines are
also collected into the terminal summary.
"""

import json
import time

import numpy as np

import severity_cases
from conftest import ACCEPTANCE_LINES
from rulerank import stats, synth
from rulerank.catalog import builtin_catalog
from rulerank.cli import main
from rulerank.proxies import evaluate, normalize
from rulerank.selection import (
    ConfigError,
    SelectorConfig,
    confidence_select,
    lexicographic_select,
    scalarized_select,
    weighted_sum_select,
)
from rulerank.verify import (
    check_bounds,
    check_degenerate,
    check_mask_monotonicity,
    check_order_invariance,
    check_scalarization,
    verify,
)

N = 10_000
CFG = SelectorConfig()


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def loop_oracle(scores, conf, eps) -> int:
    """Plain-Python tier filter, written without numpy."""
    k = len(conf)
    alive = list(range(k))
    for tier in range(4):
        best = min(scores[i][tier] for i in alive)
        alive = [i for i in alive if scores[i][tier] <= best + eps[tier]]
    top = max(conf[i] for i in alive)
    return min(i for i in alive if conf[i] == top)


def uniform_instance(rng):
    k = int(rng.integers(1, 9))
    return rng.uniform(0, 1, (k, 4)), rng.dirichlet(np.ones(k))


def test_criterion_01_selector_matches_oracle():
    rng = np.random.default_rng(101)
    cases = [uniform_instance(rng) for _ in range(N)]
    t0 = time.perf_counter()
    picks = [lexicographic_select(s, p, CFG).selected_index for s, p in cases]
    elapsed = time.perf_counter() - t0
    agree = sum(a == loop_oracle(s.tolist(), p.tolist(), CFG.epsilons) for a, (s, p) in zip(picks, cases))
    report(1, agree == N and elapsed < 5.0, f"{agree}/{N} agree with oracle, {elapsed:.2f}s")


def test_criterion_02_order_invariance():
    failures = [i for i in range(N) if not check_order_invariance(2, i, CFG)[0]]
    # the duplicate-row / equal-confidence variants must resolve to the lowest index every time
    tied = np.zeros((4, 4))
    same = [lexicographic_select(tied, [0.25] * 4, CFG).selected_index for _ in range(5)]
    ok = not failures and same == [0] * 5
    report(2, ok, f"{N - len(failures)}/{N} instances x 5 permutations, tie index {same[0]}")


def test_criterion_03_scalarization():
    results = [check_scalarization(3, i, CFG)[0] for i in range(N)]
    bad = sum(r is False for r in results)
    skipped = sum(r is None for r in results)
    try:
        SelectorConfig(scalarization_base=100).check_scalarization()
        rejected = False
    except ConfigError:
        rejected = True
    try:
        scalarized_select(np.zeros((2, 4)), [0.5, 0.5], SelectorConfig(scalarization_base=100))
        rejected = False
    except ConfigError:
        pass
    report(3, bad == 0 and rejected, f"{bad} disagreements ({skipped} below gap), B=100 rejected={rejected}")


def test_criterion_04_proxy_fixtures():
    misses = []
    for name, build in severity_cases.CASES.items():
        got, want, tol = build()
        assert tol <= 1e-6
        if not abs(got - want) <= tol:
            misses.append(f"{name}: {got} vs {want}")
    n = len(severity_cases.CASES)
    report(4, not misses and n >= 12, f"{n - len(misses)}/{n} fixtures" + (f" {misses}" if misses else ""))


def test_criterion_05_normalization():
    rng = np.random.default_rng(5)
    n = 100_000
    kappa = rng.uniform(0.05, 20.0, n)
    a = rng.exponential(2.0, n) * (rng.random(n) < 0.9)
    b = a + rng.exponential(1.0, n) * (rng.random(n) < 0.9)
    ok = True
    for mode in ("exponential", "linear"):
        fa = normalize(a, mode=mode, kappa=kappa, alpha=kappa)
        fb = normalize(b, mode=mode, kappa=kappa, alpha=kappa)
        ok &= bool(np.all((fa >= 0) & (fa <= 1) & (fb >= 0) & (fb <= 1)) and np.all(fa <= fb))
        ok &= bool(np.all(normalize(np.zeros(n), mode=mode, kappa=kappa, alpha=kappa) == 0))
    anchor = normalize(0.5, kappa=2.0)
    ok &= abs(anchor - (1 - np.exp(-1))) <= 1e-12
    report(5, ok, f"{n} pairs x 2 modes, c(0.5; 2) = {anchor:.15f}")


def test_criterion_06_tier_bounds_and_mask_monotonicity():
    book = builtin_catalog()
    mono = sum(not check_mask_monotonicity(6, i, book)[0] for i in range(N))
    bounds = sum(not check_bounds(6, i, book)[0] for i in range(N))
    report(6, mono == 0 and bounds == 0, f"{mono} monotonicity and {bounds} bound violations in {N} trials")


def corrupted_cases(target: int = 1000):
    families = [f.value for f in synth.CorruptionFamily]
    per = {f: target // 3 + (i < target % 3) for i, f in enumerate(families)}
    for i, fam in enumerate(families):
        kw = {"template_weights": {"intersection_signal": 1.0}} if fam == "signal_violating" else {}
        done = seed = 0
        while done < per[fam]:
            s = synth.synthesize(synth.SynthConfig(seed=7000 + 1000 * i + seed, count=1, **kw))[0]
            seed += 1
            try:
                cs = synth.inject_adversarial(s, None, synth.CorruptionSpec(fam))
            except synth.CorruptionError:
                continue
            done += 1
            yield fam, s.replace(candidates=cs)


def test_criterion_07_adversarial_corruption():
    n = conf_hits = clean = lex_rej = ws_rej = flag_ok = 0
    for fam, s in corrupted_cases():
        cs = s.candidates
        inj = len(cs) - 1
        res = evaluate(cs, s)
        v, S = res.violations, res.tier_scores
        n += 1
        conf_hits += confidence_select(cs.confidences).selected_index == inj
        lex = lexicographic_select(S, cs.confidences, CFG)
        ws = weighted_sum_select(v.normalized, v.applicable, cs.confidences, CFG, S)
        has_clean = bool(np.any(S[:, 0] == 0))
        if has_clean:
            clean += 1
            lex_rej += lex.selected_index != inj
            ws_rej += ws.selected_index != inj
        flag_ok += lex.infeasible == (not has_clean)
    ok = n == 1000 and conf_hits == n and lex_rej == clean and ws_rej == clean and flag_ok == n
    report(7, ok, f"confidence picks injected {conf_hits}/{n}; lex rejects {lex_rej}/{clean}, "
                  f"wsum rejects {ws_rej}/{clean}; infeasible flag correct {flag_ok}/{n}")


def test_criterion_08_degenerate_inputs():
    book = builtin_catalog()
    count = 320
    results = [check_degenerate(8, i, CFG, book) for i in range(count)]
    cats = {info["category"] for _, info in results}
    good = sum(ok for ok, _ in results)
    ok = count >= 300 and good == count and cats == set(synth.DEGENERATE_CATEGORIES)
    report(8, ok, f"{good}/{count} finite and valid across {len(cats)} categories")


def test_criterion_09_statistics():
    m = stats.mcnemar_counts(15, 5)
    det = stats.bootstrap_ci(np.arange(50.0), resamples=2000, seed=4) == stats.bootstrap_ci(
        np.arange(50.0), resamples=2000, seed=4)
    covered = 0
    for t in range(100):
        sample = (np.random.default_rng([909, t]).random(1000) < 0.3).astype(float)
        ci = stats.bootstrap_ci(sample, "rate", resamples=2000, seed=t)
        covered += ci.lo <= 0.3 <= ci.hi
    undefined = stats.spearman(np.arange(5.0), np.ones(5)) is None
    ok = m.statistic == 4.05 and m.p_value < 0.05 and det and covered >= 93 and undefined
    report(9, ok, f"McNemar stat {m.statistic} p={m.p_value:.4f} ({m.method}), bootstrap deterministic={det}, "
                  f"coverage {covered}/100, spearman undefined={undefined}")


def test_criterion_10_performance():
    scenarios = synth.synthesize(synth.SynthConfig(seed=10, count=30))
    for s in scenarios[:3]:
        evaluate(s.candidates, s)
    best = []
    for s in scenarios:
        assert s.candidates.stacked().shape == (6, 50, 4)
        runs = []
        for _ in range(5):
            t0 = time.perf_counter()
            evaluate(s.candidates, s)
            runs.append(time.perf_counter() - t0)
        best.append(min(runs))
    median_ms = 1e3 * float(np.median(best))
    t0 = time.perf_counter()
    rep = verify(seed=10)
    verify_s = time.perf_counter() - t0
    ok = median_ms <= 5.0 and verify_s < 60.0 and rep["all_passed"]
    report(10, ok, f"evaluate median {median_ms:.2f} ms, verify {verify_s:.1f} s (all passed={rep['all_passed']})")


def test_criterion_11_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["synth", "--seed", "42", "--out", str(a)])
    main(["synth", "--seed", "42", "--out", str(b)])
    files_a = {p.name: p.read_bytes() for p in sorted(a.iterdir())}
    files_b = {p.name: p.read_bytes() for p in sorted(b.iterdir())}
    ra, rb = tmp_path / "va.json", tmp_path / "vb.json"
    codes = (main(["verify", "--seed", "7", "--out", str(ra)]), main(["verify", "--seed", "7", "--out", str(rb)]))
    same_verify = ra.read_bytes() == rb.read_bytes()
    ok = files_a == files_b and len(files_a) > 1 and same_verify and codes == (0, 0)
    report(11, ok, f"synth identical={files_a == files_b} ({len(files_a)} files), verify identical={same_verify}, "
                   f"exit codes {codes}, {json.loads(ra.read_text())['n']} trials each")
