"""Tabulate the chi-squared stability ratio of the noisy threshold.

For each copy count the script reports the worst ratio
lhs / (Pr[B] sigma / E[X])^2 over a small grid; the maximum over the whole
grid is the empirical constant used by the acceptance check.

    python3 demos/classical_stability.py
"""
import numpy as np

from qda import classical_stats as cs


def main():
    ns = [2, 5, 10, 20, 35, 50]
    grid, c_test = cs.chi2_stability_sweep(ns, np.linspace(0.05, 0.95, 19), [0.5, 2 / 3, 0.8],
                                           [2.0, 4.0, 8.0, 16.0])
    print(f"{len(grid)} valid points, empirical constant {c_test:.3f}")
    print("   n  points  worst ratio")
    for n in ns:
        ratios = [cert.ratio for params, cert in grid if params.n == n]
        if ratios:
            print(f"  {n:2d}  {len(ratios):6d}  {max(ratios):.3f}")


if __name__ == "__main__":
    main()
