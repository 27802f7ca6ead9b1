"""Path relative entropy grows linearly in time, with slope equal to the RER.

For a finite Markov chain we can list every path of length M and compute
the relative entropy between the path laws under two transition matrices
directly. It equals M times the relative entropy rate plus the relative
entropy of the two stationary laws, exactly, for every M.

Run:  python3 demos/decomposition_identity.py
"""

import numpy as np

from pathsens import exact


def main():
    rng = np.random.default_rng(0)
    P = rng.random((3, 3)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    Pe = rng.random((3, 3)) + 0.05
    Pe /= Pe.sum(axis=1, keepdims=True)
    rer = exact.exact_rer_chain(P, Pe)
    r0 = exact.stationary_relative_entropy(exact.finite_stationary(P), exact.finite_stationary(Pe))
    print(f"RER = {rer:.12f}, stationary relative entropy = {r0:.12f}")
    print(f"{'M':>3} {'enumerated':>18} {'M*RER + R0':>18} {'difference':>12}")
    for M in range(1, 9):
        brute = exact.brute_force_path_re(P, Pe, M)
        print(f"{M:3d} {brute:18.12f} {M * rer + r0:18.12f} {brute - (M * rer + r0):12.1e}")


if __name__ == "__main__":
    main()
