"""Tabulate exact sign-test power over a sweep of sample sizes.

Prints one CSV row per (N, s) pair with the exact rejection probability of
the level-alpha randomized sign test when each effect is positive with
probability s. Optionally appends the minimal N reaching a target power for
each s, which is where the curve is most useful for planning.

Usage:
    python3 scripts/power_curve.py --alpha 0.05 --s 0.55 0.6 0.7 --n-max 400
    python3 scripts/power_curve.py --alpha 0.01 --s 0.6 --target-power 0.9
"""

import argparse
import sys

from masksig.power import power, required_sample_size


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--alpha", type=float, default=0.05, help="test level")
    parser.add_argument(
        "--s", type=float, nargs="+", default=[0.55, 0.6, 0.7, 0.8],
        help="success probabilities under the alternative",
    )
    parser.add_argument("--n-min", type=int, default=5)
    parser.add_argument("--n-max", type=int, default=300)
    parser.add_argument("--n-step", type=int, default=5)
    parser.add_argument(
        "--target-power", type=float, default=None,
        help="also report the minimal N reaching this power for each s",
    )
    args = parser.parse_args(argv)

    print("n,s,power")
    for n in range(args.n_min, args.n_max + 1, args.n_step):
        for s in args.s:
            print(f"{n},{s},{power(n, args.alpha, s):.10f}")

    if args.target_power is not None:
        for s in args.s:
            n_req = required_sample_size(s, args.alpha, args.target_power)
            print(
                f"# minimal N for power >= {args.target_power} at s = {s}: "
                f"{n_req} (power {power(n_req, args.alpha, s):.6f})",
                file=sys.stderr,
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
