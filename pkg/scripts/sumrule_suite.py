"""Residuals of the Szego-Verblunsky and strong Gross-Witten rules on random Bernstein-Szego measures."""

import argparse

import numpy as np

from opuc_sumrules import CoefficientSequence
from opuc_sumrules.sumrules import verify_gw_strong, verify_szego_verblunsky


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cases", type=int, default=50)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--g", type=float, nargs="*", default=[0.5, 1.0])
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'m':>3} {'szego':>10} " + " ".join(f"{'gw ' + str(g):>10}" for g in args.g))
    for _ in range(args.cases):
        m = rng.integers(1, 9)
        seq = CoefficientSequence("plain", rng.uniform(0, 0.8, m) * np.exp(2j * np.pi * rng.uniform(size=m)))
        row = [verify_szego_verblunsky(seq).residual] + [verify_gw_strong(seq, g).residual for g in args.g]
        print(f"{m:>3} " + " ".join(f"{r:10.2e}" for r in row))


if __name__ == "__main__":
    main()
