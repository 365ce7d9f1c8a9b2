"""Command-line interface; every report is JSON."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import benchmark, synth
from .catalog import CatalogError, Rulebook, builtin_catalog, load_overrides, with_overrides
from .proxies import MaskSource, Normalization, applicability, evaluate
from .scenario import ScenarioError, dump_json, load_scenario, save_scenario
from .selection import SelectionError, SelectorConfig, Strategy, parse_strategy, select
from .verify import verify

CONFIG_ENV = "RULERANK_CONFIG"
MANIFEST = "manifest.json"


class CLIError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    selector: SelectorConfig
    normalization: str
    rulebook: Rulebook


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(obj, out: str | None) -> None:
    data = dump_json(_jsonable(obj))
    if out in (None, "-"):
        sys.stdout.write(data.decode("utf-8"))
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_bytes(data)


def load_config(path: str | None) -> RunConfig:
    """Read the JSON run config; falls back to ``$RULERANK_CONFIG`` and then to defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    doc = {}
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise CLIError("config must be a JSON object")
    unknown = set(doc) - {"epsilons", "scalarization_base", "weights", "normalization", "overrides"}
    if unknown:
        raise CLIError(f"unknown config keys {sorted(unknown)}")
    book = builtin_catalog()
    overrides = doc.get("overrides")
    if overrides:
        if isinstance(overrides, str):
            base = Path(path).parent if path else Path(".")
            overrides = load_overrides(base / overrides)
        book = with_overrides(book, overrides)
    weights = doc.get("weights")
    if isinstance(weights, dict):
        w = np.ones(len(book))
        for rid, val in weights.items():
            w[book.index(rid)] = float(val)
        weights = tuple(w)
    normalization = Normalization(doc.get("normalization", "exponential")).value
    selector = SelectorConfig(
        epsilons=tuple(doc.get("epsilons", (1e-3,) * 4)),
        scalarization_base=doc.get("scalarization_base", 1001),
        weighted_sum_weights=None if weights is None else tuple(weights),
    )
    return RunConfig(selector, normalization, book)


def read_scenarios(directory: str) -> list:
    d = Path(directory)
    if not d.is_dir():
        raise CLIError(f"{directory} is not a directory")
    files = sorted(p for p in d.glob("*.json") if p.name != MANIFEST)
    if not files:
        raise CLIError(f"no scenario files in {directory}")
    out = []
    for p in files:
        try:
            out.append(load_scenario(p.read_bytes()))
        except ScenarioError as exc:
            raise CLIError(f"{p.name}: {exc}") from None
    return out


def write_scenarios(scenarios, directory: str, meta: dict) -> list[str]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for s in scenarios:
        name = f"{s.id.replace('/', '_')}.json"
        (d / name).write_bytes(save_scenario(s))
        names.append(name)
    (d / MANIFEST).write_bytes(dump_json({**meta, "files": names}))
    return names


def read_labels(path: str | None) -> dict | None:
    if not path:
        return None
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise CLIError("labels file must map scenario ids to {labels, scores}")
    return doc


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    templates = json.loads(args.templates) if args.templates else None
    families = json.loads(args.families) if args.families else None
    kw = {}
    if templates:
        kw["template_weights"] = templates
    if families:
        kw["family_weights"] = families
    cfg = synth.SynthConfig(seed=args.seed, count=args.count, k=args.k, **kw)
    scenarios = synth.synthesize(cfg)
    write_scenarios(scenarios, args.out, {"seed": args.seed, "count": args.count, "k": args.k})
    return 0


def _mask(policy: str, scenario, book, labels):
    info = (labels or {}).get(scenario.id, {})
    return applicability(policy, book, labels=info.get("labels"), scores=info.get("scores"), scenario=scenario)


def cmd_evaluate(args) -> int:
    rc = load_config(args.config)
    labels = read_labels(args.labels)
    book = rc.rulebook
    rows = []
    for s in read_scenarios(args.scenarios):
        res = evaluate(s.candidates, s, _mask(args.mask, s, book, labels), book, rc.normalization)
        v = res.violations
        hits = [
            {"candidate": int(k), "rule": v.rule_ids[r], "raw": float(v.raw[k, r]),
             "normalized": float(v.normalized[k, r])}
            for k, r in zip(*np.nonzero(v.normalized > 0))
        ]
        rows.append({
            "id": s.id,
            "tier_scores": res.tier_scores,
            "applicable": [rid for rid, a in zip(v.rule_ids, v.applicable) if a],
            "violations": hits,
            "trace": {rid: t["reason"] for rid, t in res.trace.items()},
        })
    write_json({"mask": args.mask, "normalization": rc.normalization, "scenarios": rows}, args.out)
    return 0


def cmd_select(args) -> int:
    rc = load_config(args.config)
    strategy = parse_strategy(args.strategy)
    if strategy is Strategy.SCALARIZED:
        rc.selector.check_scalarization()
    labels = read_labels(args.labels)
    decisions = []
    for s in read_scenarios(args.scenarios):
        res = evaluate(s.candidates, s, _mask(args.mask, s, rc.rulebook, labels), rc.rulebook, rc.normalization)
        v = res.violations
        r = select(strategy, res.tier_scores, s.candidates.confidences, rc.selector, v.normalized, v.applicable)
        decisions.append({"id": s.id, **r.to_dict()})
    write_json({"strategy": strategy.value, "decisions": decisions}, args.out)
    return 0


def cmd_compare(args) -> int:
    rc = load_config(args.config)
    names = [n for item in args.strategies for n in item.split(",") if n]
    report = benchmark.run_benchmark(
        read_scenarios(args.scenarios), names, args.mask, rc.rulebook, rc.selector, read_labels(args.labels),
        rc.normalization, with_stats=args.stats, seed=args.seed, resamples=args.resamples,
    )
    write_json(report, args.out)
    return 0


def cmd_corrupt(args) -> int:
    spec = synth.CorruptionSpec(args.family, args.margin, args.replace)
    done, skipped = [], []
    injected = {}
    for s in read_scenarios(args.scenarios):
        try:
            cs = synth.inject_adversarial(s, None, spec)
        except synth.CorruptionError as exc:
            skipped.append({"id": s.id, "reason": str(exc)})
            continue
        done.append(s.replace(candidates=cs))
        injected[s.id] = len(cs) - 1
    write_scenarios(done, args.out, {"family": spec.family.value, "margin": spec.confidence_margin})
    write_json({"family": spec.family.value, "injected_index": injected, "skipped": skipped}, args.report)
    return 0


def cmd_perturb(args) -> int:
    out = []
    for s in read_scenarios(args.scenarios):
        copies = synth.perturb(s, args.kind, args.level, args.repetitions, args.seed)
        out.extend(c.replace(id=f"{s.id}/{args.kind}{args.level}/{i:02d}") for i, c in enumerate(copies))
    write_scenarios(out, args.out, {"kind": args.kind, "level": args.level, "repetitions": args.repetitions,
                                    "seed": args.seed})
    return 0


def cmd_verify(args) -> int:
    rc = load_config(args.config)
    report = verify(args.seed, args.n, rc.selector, rc.rulebook)
    write_json(report, args.out)
    return 0 if report["all_passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rulerank", description=__doc__)
    ap.add_argument("--config", help=f"JSON run config (default: ${CONFIG_ENV})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate seeded synthetic scenarios")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--templates", help="JSON template weights")
    p.add_argument("--families", help="JSON candidate family weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    masks = [m.value for m in MaskSource]

    def common(p):
        p.add_argument("--scenarios", required=True)
        p.add_argument("--mask", choices=masks, default="always_on")
        p.add_argument("--labels", help="JSON {scenario id: {labels: [...], scores: [...]}}")
        p.add_argument("--out", default="-")

    p = sub.add_parser("evaluate", help="severities and tier scores per candidate")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("select", help="decision traces of one strategy")
    p.add_argument("--strategy", required=True, choices=["lex", "scalar", "wsum", "conf"] + [s.value for s in Strategy])
    common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("compare", help="compare strategies on identical candidate sets")
    p.add_argument("--strategies", nargs="+", default=["lex", "wsum", "conf"])
    p.add_argument("--stats", action="store_true", help="add paired tests and bootstrap intervals")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resamples", type=int, default=10_000)
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("corrupt", help="inject a max-confidence violating mode")
    p.add_argument("--family", required=True, choices=[f.value for f in synth.CorruptionFamily])
    p.add_argument("--margin", type=float, default=0.01)
    p.add_argument("--replace", action="store_true", help="replace the least confident mode instead of appending")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("perturb", help="noisy copies of scenarios")
    p.add_argument("--kind", required=True, choices=[k.value for k in synth.PerturbKind])
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("verify", help="run the property suite; exit 0 only if everything passes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CLIError, CatalogError, ScenarioError, SelectionError, synth.SynthError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
