"""Linesearch DRS on a box-constrained MPC problem (strongly convex smooth part).

In this regime the envelope is maximized, so the merit column increases.
"""

import numpy as np

from splitls.drs import DrsConfig, drs_ls_solve, drs_solve
from splitls.problems import build_mpc, generate_synthetic


def main():
    prob = build_mpc(generate_synthetic("mpc", {"N": 10}, seed=0))
    s0 = np.zeros(prob.dim)
    ls = drs_ls_solve(prob, s0, DrsConfig(epsilon=1e-8, max_iters=20000), "lbfgs(5)")
    print(f"linesearch: {ls.status} in {ls.iterations} iterations, "
          f"{ls.counters.prox1} prox calls on the smooth part")
    merit = ls.column("merit")
    # increases up to roundoff relative to the merit size
    slack = 1e-12 * np.maximum(1.0, np.abs(merit[:-1]))
    print(f"merit: first {merit[0]:.6f} last {merit[-1]:.6f} "
          f"(nondecreasing: {bool(np.all(np.diff(merit) >= -slack))})")
    for gamma in (0.05, 0.2, 1.0):
        plain = drs_solve(prob, s0, gamma, 1.0, 1e-8, 20000)
        print(f"plain DRS gamma={gamma:<5} {plain.status:<12} {plain.iterations} iterations")


if __name__ == "__main__":
    main()
