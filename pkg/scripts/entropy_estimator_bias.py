"""Bias of the k-nearest-neighbour entropy estimate against exact values.

Repeats the estimate on independent samples of a Maxwellian and of a
uniform ball and reports the mean error, its spread across repetitions and
the mean bootstrap standard error.

    python scripts/entropy_estimator_bias.py --reps 8
"""

import argparse
import math

import numpy as np

from granular_cooling.entropy import entropy_knn


def sample(kind, N, rng):
    if kind == "maxwellian":
        return rng.normal(size=(N, 3)), -1.5 * math.log(2 * math.pi) - 1.5
    d = rng.normal(size=(N, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    return d * rng.random(N)[:, None] ** (1 / 3), -math.log(4 * math.pi / 3)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10**3, 10**4, 10**5])
    ap.add_argument("--reps", type=int, default=8)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'family':>10} {'N':>8} {'mean error':>11} {'sd error':>9} {'bootstrap se':>13} {'error/se':>9}")
    for kind in ("maxwellian", "ball"):
        for N in args.sizes:
            errs, ses = [], []
            for _ in range(args.reps):
                v, exact = sample(kind, N, rng)
                est = entropy_knn(v, k=args.k, rng=rng)
                errs.append(est.H_signed - exact)
                ses.append(est.stderr)
            me, se = float(np.mean(errs)), float(np.mean(ses))
            print(f"{kind:>10} {N:8d} {me:11.5f} {np.std(errs, ddof=1):9.5f} {se:13.5f} {me / se:9.2f}")


if __name__ == "__main__":
    main()
