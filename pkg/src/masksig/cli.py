"""Command-line interface.

Subcommands:

    test        run the sign test on every feature of a prediction bundle
    power       exact power of the randomized test at a given alternative
    samplesize  smallest N achieving a target power
    crossfit    aggregate per-fold bundles (min-p or pooled scheme)
    bench       known-truth synthetic benchmark with the oracle model

The default seed comes from the MASKSIG_SEED environment variable when set.
Exit status is 0 on success and 2 on any fatal error; warnings (including
per-feature failures, which do not abort the run) go to standard error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from masksig.bundle import BundleError, parse_bundle
from masksig.crossfit import FoldResult, crossfit_minp, crossfit_pooled
from masksig.effects import LossKind, compute_effects
from masksig.power import power, required_sample_size
from masksig.report import REPORT_FORMATS, emit_report, run_test
from masksig.sign_test import TIE_MODES, TestConfig, critical_value, decide, gamma
from masksig.synth import TASKS, bench_run

__all__ = ["main", "build_parser"]

SEED_ENV = "MASKSIG_SEED"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"error: {SEED_ENV} must be an integer, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="masksig",
        description="Exact randomized sign tests for feature significance from prediction bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="test every feature in a bundle")
    p_test.add_argument("bundle", help="bundle directory")
    p_test.add_argument("--alpha", type=float, default=None, help="level (default: manifest)")
    p_test.add_argument("--m0", type=float, default=None, help="null median threshold (default: manifest)")
    p_test.add_argument("--seed", type=int, default=None, help=f"randomization seed (default: ${SEED_ENV} or 0)")
    p_test.add_argument("--loss", default=None, help="loss override, e.g. squared or pinball:0.5")
    p_test.add_argument("--adjust", choices=("none", "bonferroni"), default="none")
    p_test.add_argument("--tie-mode", choices=TIE_MODES, default="strict")
    p_test.add_argument("--out", default=None, help="write the report here instead of stdout")
    p_test.add_argument("--format", choices=REPORT_FORMATS, default="text")

    p_power = sub.add_parser("power", help="exact power H(N, alpha, s)")
    p_power.add_argument("--n", type=int, required=True)
    p_power.add_argument("--alpha", type=float, required=True)
    p_power.add_argument("--s", type=float, required=True, help="P(effect > m0) under the alternative")

    p_size = sub.add_parser("samplesize", help="smallest N with power >= target")
    p_size.add_argument("--s", type=float, required=True)
    p_size.add_argument("--alpha", type=float, required=True)
    p_size.add_argument("--power", type=float, required=True, dest="target_power")

    p_cf = sub.add_parser("crossfit", help="aggregate per-fold bundles")
    p_cf.add_argument("bundles", nargs="+", help="one bundle directory per fold (>= 2)")
    p_cf.add_argument("--scheme", choices=("minp", "pooled"), default="minp")
    p_cf.add_argument("--alpha", type=float, default=None, help="level (default: first manifest)")
    p_cf.add_argument("--m0", type=float, default=None)
    p_cf.add_argument("--seed", type=int, default=None)

    p_bench = sub.add_parser("bench", help="known-truth synthetic benchmark")
    p_bench.add_argument("task", choices=TASKS)
    p_bench.add_argument("--n-test", type=int, required=True)
    p_bench.add_argument("--trials", type=int, required=True)
    p_bench.add_argument("--alpha", type=float, required=True)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--out", default=None, help="directory for per-trial reports and the summary")
    p_bench.add_argument("--n-train", type=int, default=20000)
    return parser


def _cmd_test(args) -> int:
    bundle = parse_bundle(args.bundle)
    config = TestConfig(
        alpha=args.alpha if args.alpha is not None else bundle.manifest.alpha,
        m0=args.m0 if args.m0 is not None else bundle.manifest.m0,
        tie_mode=args.tie_mode,
        seed=args.seed if args.seed is not None else _default_seed(),
    )
    loss_kind = LossKind.parse(args.loss) if args.loss else None
    reports = run_test(bundle, config=config, adjust=args.adjust, loss_kind=loss_kind)
    for r in reports:
        if r.error is not None:
            print(f"warning: feature {r.feature}: {r.error}", file=sys.stderr)
        for w in r.warnings:
            print(f"warning: feature {r.feature}: {w}", file=sys.stderr)
    text = emit_report(reports, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_power(args) -> int:
    value = power(args.n, args.alpha, args.s)
    out = {
        "n": args.n,
        "alpha": args.alpha,
        "s": args.s,
        "critical": critical_value(args.n, args.alpha),
        "gamma": gamma(args.n, critical_value(args.n, args.alpha), args.alpha),
        "power": value,
    }
    print(json.dumps(out))
    return 0


def _cmd_samplesize(args) -> int:
    n = required_sample_size(args.s, args.alpha, args.target_power)
    out = {
        "s": args.s,
        "alpha": args.alpha,
        "target_power": args.target_power,
        "required_n": n,
        "achieved_power": power(n, args.alpha, args.s),
    }
    print(json.dumps(out))
    return 0


def _cmd_crossfit(args) -> int:
    bundles = [parse_bundle(p) for p in args.bundles]
    if len(bundles) < 2:
        raise ValueError("crossfit needs at least 2 fold bundles")
    names = bundles[0].feature_names
    for path, b in zip(args.bundles[1:], bundles[1:]):
        if b.feature_names != names:
            raise ValueError(f"{path}: fold features differ from the first fold")
    alpha = args.alpha if args.alpha is not None else bundles[0].manifest.alpha
    m0 = args.m0 if args.m0 is not None else bundles[0].manifest.m0
    seed = args.seed if args.seed is not None else _default_seed()
    config = TestConfig(alpha=alpha, m0=m0, seed=seed)

    rows = []
    for feature in names:
        folds = []
        for i, b in enumerate(bundles, start=1):
            effects = compute_effects(b, feature)
            folds.append(FoldResult(fold_index=i, effects=effects, test=decide(effects, config)))
        if args.scheme == "minp":
            res = crossfit_minp(folds, alpha, seed)
            rows.append(
                {
                    "feature": feature,
                    "decision": res.decision,
                    "aggregate_p": res.aggregate_p,
                    "realized_p": list(res.realized_p),
                    "heuristic": res.heuristic,
                }
            )
        else:
            res = crossfit_pooled(folds, config)
            rows.append(
                {
                    "feature": feature,
                    "decision": res.decision,
                    "n_plus": res.pooled.n_plus,
                    "n_effective": res.pooled.n_effective,
                    "p_lower": res.pooled.p_lower,
                    "p_upper": res.pooled.p_upper,
                    "heuristic": res.heuristic,
                }
            )
    print(
        json.dumps(
            {"schema": "masksig-crossfit/1", "scheme": args.scheme, "alpha": alpha, "m0": m0, "k": len(bundles), "features": rows},
            indent=2,
        )
    )
    return 0


def _cmd_bench(args) -> int:
    summary = bench_run(
        task=args.task,
        n_test=args.n_test,
        trials=args.trials,
        alpha=args.alpha,
        seed=args.seed if args.seed is not None else _default_seed(),
        out_dir=args.out,
        n_train=args.n_train,
    )
    print(json.dumps(summary, indent=2))
    return 0


_COMMANDS = {
    "test": _cmd_test,
    "power": _cmd_power,
    "samplesize": _cmd_samplesize,
    "crossfit": _cmd_crossfit,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (BundleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
