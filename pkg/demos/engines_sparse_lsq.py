"""Compare direction engines on a synthetic l1/2-regularized least squares."""

import numpy as np

from splitls.drs import DrsConfig, drs_ls_solve, drs_solve
from splitls.problems import build_sparse_lsq, generate_synthetic


def main():
    spec = generate_synthetic("sparse_lsq", {"m": 50, "n": 150, "k": 10}, seed=1)
    prob = build_sparse_lsq(spec)
    s0 = np.zeros(prob.dim)
    cfg = DrsConfig(epsilon=1e-6, max_iters=20000)

    print(f"{'engine':<14}{'status':<12}{'iters':>7}{'prox1':>8}{'objective':>14}")
    ref = drs_solve(prob, s0, epsilon=1e-6, max_iters=20000)
    rows = [("plain DRS", ref)]
    for engine in ["nominal", "nesterov", "lbfgs(5)", "broyden", "anderson(5)"]:
        rows.append((engine, drs_ls_solve(prob, s0, cfg, engine)))
    for name, rep in rows:
        x = rep.state.u
        print(f"{name:<14}{rep.status:<12}{rep.iterations:>7}{rep.counters.prox1:>8}"
              f"{prob.phi(x):>14.6f}")


if __name__ == "__main__":
    main()
