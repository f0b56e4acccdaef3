"""Finite-n convergence of (1/np) log K_{n,0} for matrix Hua-Pickrell coefficients.

The Stirling limit with delta = n p d is
2(p+pd) log(p+pd) - p log p - (p+2pd) log(p+2pd), which equals -p H_d(0).
"""

import argparse

import numpy as np

from opuc_sumrules.mopuc import log_normalizer
from opuc_sumrules.rates import H_d


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p", type=int, default=2)
    parser.add_argument("--d", type=float, default=1.0)
    args = parser.parse_args()
    p, d = args.p, args.d

    limit = 2 * (p + p * d) * np.log(p + p * d) - p * np.log(p) - (p + 2 * p * d) * np.log(p + 2 * p * d)
    target = p * H_d(0.0, d)
    print(f"p H_d(0) = {target:.6f}   Stirling limit = {limit:.6f}")
    print(f"{'n':>7} {'(1/np) log K':>14} {'rel gap to -pH':>15}")
    for n in (50, 100, 200, 400, 800, 1600, 6400, 25600):
        val = log_normalizer(n, 0, p, n * p * d) / (n * p)
        print(f"{n:>7} {val:14.6f} {abs(val + target) / target:15.4%}")


if __name__ == "__main__":
    main()
