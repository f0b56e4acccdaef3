"""Compare Metropolis GW and HP samples with the exact finite-n one-point density.

The exact density is n^{-1} sum_k |q_k|^2 where q_k are the orthonormal
polynomials of the weight, computed by Arnoldi on a fine grid.
"""

import argparse

import numpy as np

from opuc_sumrules.sampling import RngStream, eigenangles, sample_gw_alphas, sample_hp_gammas


def one_point_density(n, log_weight, points=8192):
    theta = 2 * np.pi * (np.arange(points) + 0.5) / points
    lw = log_weight(theta)
    w = np.exp(lw - lw.max())
    basis = np.zeros((points, n), dtype=complex)
    basis[:, 0] = np.sqrt(w / w.sum())
    for k in range(1, n):
        v = np.exp(1j * theta) * basis[:, k - 1]
        for _ in range(2):
            v -= basis[:, :k] @ (basis[:, :k].conj().T @ v)
        basis[:, k] = v / np.linalg.norm(v)
    return theta, np.sum(np.abs(basis) ** 2, axis=1) / n


def compare(label, n, log_weight, draws):
    theta, rho = one_point_density(n, log_weight)
    exact = float(np.sum(rho * np.cos(theta)))
    per_rep = np.cos(eigenangles(draws)).mean(axis=1)
    se = per_rep.std() / np.sqrt(per_rep.size)
    print(f"{label:14s} exact={exact:+.5f} sampled={per_rep.mean():+.5f} +- {se:.5f} "
          f"({(per_rep.mean() - exact) / se:+.2f} SE)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=200)
    parser.add_argument("--seed", type=int, default=45)
    args = parser.parse_args()

    for i, (n, g) in enumerate([(60, -2.0), (20, 0.5), (60, 2.0)]):
        draws = sample_gw_alphas(n, g, RngStream(args.seed, i), reps=args.reps)
        compare(f"GW n={n} g={g}", n, lambda t: n * g * np.cos(t), draws)
    for i, (n, d) in enumerate([(60, 1.0), (100, 2.0)]):
        draws = sample_hp_gammas(n, d, RngStream(args.seed, 10 + i), reps=args.reps)
        compare(f"HP n={n} d={d}", n, lambda t: n * d * np.log(2 - 2 * np.cos(t)), draws)


if __name__ == "__main__":
    main()
