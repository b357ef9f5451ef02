"""Monte Carlo check that the randomized sign test has exactly its nominal size.

Draws independent effect vectors from a continuous null (median zero, so the
test sits at its least favorable configuration), runs the full decision path
per replication, and compares the rejection frequency with alpha. Also runs a
Kolmogorov-Smirnov uniformity check on the realized p-values, which under the
null should be exactly uniform on (0, 1).

Usage:
    python3 scripts/size_simulation.py --alpha 0.05 --n 101 --reps 20000
"""

import argparse
import math

import numpy as np
from scipy.stats import kstest

from masksig.effects import EffectVector
from masksig.sign_test import TestConfig, decide, realize_p


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--n", type=int, default=101, help="effects per replication")
    parser.add_argument("--reps", type=int, default=20000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    gen = np.random.Generator(np.random.Philox(args.seed))
    draws = gen.standard_normal((args.reps, args.n))
    ids = tuple(range(args.n))
    config = TestConfig(alpha=args.alpha, seed=args.seed + 1)

    rejects = 0
    ps = np.empty(args.reps)
    for i in range(args.reps):
        result = decide(EffectVector(f"r{i}", draws[i], ids), config)
        rejects += result.decision == "reject"
        ps[i] = realize_p(result)

    freq = rejects / args.reps
    se = math.sqrt(args.alpha * (1.0 - args.alpha) / args.reps)
    ks = kstest(ps, "uniform")
    print(f"replications      {args.reps}")
    print(f"nominal size      {args.alpha}")
    print(f"rejection freq    {freq:.5f}  ({(freq - args.alpha) / se:+.2f} SE)")
    print(f"3 SE band         [{args.alpha - 3 * se:.5f}, {args.alpha + 3 * se:.5f}]")
    print(f"KS uniformity p   {ks.pvalue:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
