"""Independent oracles and cross-checks used by the test suite.

Nothing here is used by the solvers. The functions re-derive quantities
the library computes in closed form (scalar proxes, conjugate problems,
the ADMM/DRS correspondence) through separate, slower routes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (ConfigError, ProxOracle, Smooth, SplitProblem,
                   StronglyConvex, dre_eval, drs_oracle, moreau_envelope,
                   self_dual_transform)

__all__ = [
    "bruteforce_scalar_prox", "ScalarProxOracle", "SelfDualPair",
    "quadratic_box_pair", "run_selfdual_check", "dual_problem",
    "dual_dre_moreau", "run_equivalence_check", "EquivalenceReport",
    "sweep_invariants", "InvariantReport", "box_qp_minimizer",
    "exhaustive_sparse_sphere",
]

_GOLD = (np.sqrt(5.0) - 1.0) / 2.0


def _golden(fun, a, b, tol):
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = fun(d)
    return a, b


def _refine(fun, a, b, tol):
    """Golden section down to ``1e-6`` relative, then bisection on the sign
    of a central difference.

    Comparing function values alone cannot resolve a minimizer below about
    ``sqrt(eps)``; the derivative sign stays reliable much further.
    """
    a, b = _golden(fun, a, b, max(tol, 1e-6 * (1.0 + abs(a) + abs(b))))
    for _ in range(200):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        h = 1e-6 * (1.0 + abs(m))
        slope = fun(m + h) - fun(m - h)
        if not np.isfinite(slope) or slope == 0.0:
            break
        if slope > 0:
            b = m
        else:
            a = m
    return 0.5 * (a + b)


@dataclass
class ScalarProxOracle:
    """Grid plus golden-section minimizer of ``h(w) + (w - x)^2/(2 gamma)``.

    The bracket is ``x +- width * gamma * (1 + |x|)``, widened by the same
    margin around the outermost of ``kinks``. Every local minimum of the
    grid is refined and the best refined point returned. ``kinks`` are
    points where ``h`` may be nonsmooth (golden section cannot land on a
    cusp exactly); they are always evaluated.
    """

    h: Callable
    width: float = 10.0
    grid: int = 10_000
    tol: float = 1e-10
    kinks: tuple = (0.0,)

    def _grid_values(self, w):
        try:
            hv = np.asarray(self.h(w), dtype=float)
            if hv.shape == w.shape:
                return hv
        except (TypeError, ValueError):
            pass
        return np.vectorize(self.h, otypes=[float])(w)

    def bracket(self, x, gamma):
        half = self.width * gamma * (1.0 + abs(x))
        lo, hi = x - half, x + half
        if self.kinks:
            # a far-away domain boundary must stay reachable
            lo = min(lo, min(self.kinks) - half)
            hi = max(hi, max(self.kinks) + half)
        return lo, hi

    def __call__(self, x, gamma):
        x = float(x)
        lo, hi = self.bracket(x, gamma)
        w = np.linspace(lo, hi, self.grid)
        hv = self._grid_values(w)
        obj = hv + (w - x) ** 2 / (2 * gamma)

        def f(t):
            return float(self.h(t)) + (t - x) ** 2 / (2 * gamma)

        # interior local minima plus both ends
        left = np.r_[np.inf, obj[:-1]]
        right = np.r_[obj[1:], np.inf]
        cand = np.flatnonzero((obj <= left) & (obj <= right) & np.isfinite(obj))
        best_w, best_f = None, np.inf
        for i in cand:
            a = w[max(i - 1, 0)]
            b = w[min(i + 1, self.grid - 1)]
            t = _refine(f, a, b, self.tol)
            for p in (t, w[i]):
                fp = f(p)
                if fp < best_f:
                    best_w, best_f = p, fp
        for p in self.kinks:
            fp = f(p)
            if fp < best_f:
                best_w, best_f = float(p), fp
        if best_w is None:
            raise ValueError(f"no finite objective value near x = {x}")
        return best_w


def bruteforce_scalar_prox(h, x, gamma, grid=10_000, tol=1e-10, width=10.0,
                           kinks=(0.0,)):
    """Minimize ``h(w) + (w - x)^2/(2 gamma)`` over a wide bracket by brute force."""
    return ScalarProxOracle(h, width, grid, tol, tuple(kinks))(x, gamma)


def exhaustive_sparse_sphere(x, k):
    """Projection onto k-sparse unit vectors by enumerating supports.

    Among supports of size ``k`` the one maximizing ``||x_S||`` wins; ties go
    to the lexicographically smallest support in sorted-magnitude order,
    matching the lowest-index rule.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    best, best_val = None, -1.0
    for S in itertools.combinations(range(n), k):
        val = float(np.sum(x[list(S)] ** 2))
        if val > best_val:
            best, best_val = S, val
    out = np.zeros(n)
    if best_val == 0.0:
        out[0] = 1.0
        return out
    out[list(best)] = x[list(best)]
    # same normalization arithmetic as the closed form, so results compare exactly
    return out / np.linalg.norm(out)


# ---------------------------------------------------------------- self-duality

@dataclass
class SelfDualPair:
    """A convex pair with phi1 strongly convex and, optionally, closed-form
    conjugate values ``conj1(y) = phi1*(y)`` and ``conj2(y) = phi2*(y)``."""

    problem: SplitProblem
    conj1: Optional[Callable] = None
    conj2: Optional[Callable] = None


def quadratic_box_pair(H, a, lo, hi) -> SelfDualPair:
    """``phi1 = 0.5 (x-a)^T H (x-a)`` and ``phi2`` the indicator of a box."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    a = np.asarray(a, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = a.size
    Hinv = np.linalg.inv(H)
    mu = float(np.linalg.eigvalsh(H).min())

    def prox1(x, g):
        return np.linalg.solve(H + np.eye(n) / g, H @ a + x / g)

    def f1(x):
        d = x - a
        return 0.5 * float(d @ H @ d)

    def f2(x):
        return 0.0 if np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12) else np.inf

    prob = SplitProblem(
        ProxOracle(f1, prox1, is_generalized_quadratic=True,
                   grad=lambda x: H @ (x - a), name="quadratic"),
        ProxOracle(f2, lambda x, g: np.clip(x, lo, hi), name="box"),
        StronglyConvex(mu), n)
    return SelfDualPair(prob,
                        conj1=lambda y: float(a @ y + 0.5 * y @ Hinv @ y),
                        conj2=lambda y: float(np.sum(np.maximum(lo * y, hi * y))))


def dual_problem(pair: SelfDualPair) -> SplitProblem:
    """Dual pair ``(phi1*(-.), phi2*)`` with proxes from the Moreau identity.

    Needs closed-form conjugate values.
    """
    if pair.conj1 is None or pair.conj2 is None:
        raise ConfigError("closed-form conjugates required")
    p = pair.problem

    def prox1(y, d):
        return y + d * p.phi1.prox(-y / d, 1.0 / d)

    def prox2(y, d):
        return y - d * p.phi2.prox(y / d, 1.0 / d)

    return SplitProblem(
        ProxOracle(lambda y: pair.conj1(-y), prox1, name="phi1*-mirrored"),
        ProxOracle(pair.conj2, prox2, name="phi2*"),
        Smooth(1.0 / p.regime.modulus, convex=True), p.dim)


def dual_dre_moreau(pair: SelfDualPair, s_star, gamma_star):
    """DRE of the dual problem through Moreau envelopes of conjugates.

    Uses ``(h*)^d(y) = ||y||^2/(2d) - h^{1/d}(y/d)`` so no conjugate value is
    ever evaluated.
    """
    p = pair.problem
    d = gamma_star
    y = np.asarray(s_star, dtype=float)

    def env1(t):  # envelope of phi1*(-.) at t
        return t @ t / (2 * d) - moreau_envelope(p.phi1, -t / d, 1.0 / d)

    def env2(t):
        return t @ t / (2 * d) - moreau_envelope(p.phi2, t / d, 1.0 / d)

    u = y + d * p.phi1.prox(-y / d, 1.0 / d)
    diff = y - u
    return env1(y) - diff @ diff / d + env2(2 * u - y)


def run_selfdual_check(pair: SelfDualPair, gamma, samples=100, rng=None,
                       scale=3.0, method="closed"):
    """Max over random ``s`` of ``|DRE*_{1/gamma}(-s/gamma) + DRE_gamma(s)|``.

    ``method`` selects the dual evaluation: ``"closed"`` (conjugate values
    and Moreau-identity proxes) or ``"moreau"`` (envelopes only).
    """
    p = pair.problem
    mu = p.regime.modulus
    if not gamma * mu > 1:
        raise ConfigError(f"need gamma*mu > 1, got {gamma * mu}")
    rng = np.random.default_rng(rng)
    dual = dual_problem(pair) if method == "closed" else None
    worst = 0.0
    for _ in range(samples):
        s = scale * rng.standard_normal(p.dim)
        u, v = drs_oracle(p, s, gamma)
        primal = dre_eval(p, s, u, v, gamma)
        s_, u_, v_, g_ = self_dual_transform(s, u, v, gamma)
        if dual is not None:
            ud, vd = drs_oracle(dual, s_, g_)
            dval = dre_eval(dual, s_, ud, vd, g_)
        else:
            dval = dual_dre_moreau(pair, s_, g_)
        worst = max(worst, abs(dval + primal))
    return worst


# ---------------------------------------------------------------- equivalence

@dataclass
class EquivalenceReport:
    res_dev: float
    tau_dev: float
    merit_dev: float
    iterations: int

    @property
    def max_dev(self):
        return max(self.res_dev, self.tau_dev, self.merit_dev)


def run_equivalence_check(spec, beta, engine="nominal", iters=100, lam=1.0,
                          init=None, c=None, i_max=10, quadcache=True):
    """Run the linesearch ADMM and the linesearch DRS on the mapped problem.

    ``spec`` is a :class:`~splitls.problems.ConsensusSpcaSpec`. The DRS run
    uses ``gamma = 1/beta`` and ``s0 = b - B z^{-1} - y^{-1/2}/beta``.
    Returns the largest deviations of ``||r^k||``, ``tau_k`` and the merit
    over the common iterations.
    """
    from .admm import AdmmConfig, admm_ls_solve, default_penalty
    from .drs import DrsConfig, drs_ls_solve, admissible_C
    from .problems import build_consensus_spca, consensus_spca_as_drs

    if iters == 0:
        return EquivalenceReport(0.0, 0.0, 0.0, 0)
    if beta is None:
        beta = default_penalty(build_consensus_spca(spec, None, lam).regime, lam)
    ap = build_consensus_spca(spec, beta, lam)
    dp = consensus_spca_as_drs(spec)
    N, n = spec.N, spec.spca.W.shape[1]
    if init is None:
        z = np.full(n, 1.0 / np.sqrt(n))
        init = (np.tile(z, N), np.zeros(N * n), z)
    x_1, y_1, z_1 = (np.asarray(a, dtype=float) for a in init)
    if c is None:
        c = 0.5 * admissible_C(ap.regime, 1.0 / beta, lam)
    acfg = AdmmConfig(lam=lam, beta=beta, c=c, epsilon=0.0, max_iters=iters,
                      i_max=i_max, quadcache=quadcache)
    arep = admm_ls_solve(ap, (x_1, y_1, z_1), acfg, engine)
    r_1 = ap.residual(x_1, z_1)
    y_half = y_1 - beta * (1 - lam) * r_1
    s0 = ap.b - ap.B(z_1) - y_half / beta
    dcfg = DrsConfig(lam=lam, gamma=1.0 / beta, c=c, epsilon=0.0,
                     max_iters=iters, i_max=i_max, quadcache=quadcache)
    drep = drs_ls_solve(dp, s0, dcfg, engine)
    K = min(len(arep.trace), len(drep.trace))
    ta = arep.trace[:K]
    td = drep.trace[:K]
    res = max(abs(a.res_norm - d.res_norm) for a, d in zip(ta, td))
    taus = [(a.tau, d.tau) for a, d in zip(ta, td) if np.isfinite(a.tau) or np.isfinite(d.tau)]
    tdev = max((abs(a - d) for a, d in taus), default=0.0)
    mdev = max(abs(a.merit - d.merit) / (1 + abs(a.merit)) for a, d in zip(ta, td))
    return EquivalenceReport(res, tdev, mdev, K - 1)


# ---------------------------------------------------------------- invariants

@dataclass
class InvariantReport:
    sandwich: float = 0.0
    qg: float = 0.0
    qlb: float = 0.0
    samples: int = 0

    @property
    def worst(self):
        return max(self.sandwich, self.qg, self.qlb)


def box_qp_minimizer(H, a, lo, hi):
    """Exact minimizer of ``0.5 (x-a)^T H (x-a)`` over a box, by enumerating
    active sets (3^n systems, small n only)."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    a = np.asarray(a, dtype=float)
    n = a.size
    best, best_f = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        x = np.empty(n)
        fixed = np.array([p != 0 for p in pattern])
        x[fixed] = [lo[i] if pattern[i] == 1 else hi[i] for i in np.flatnonzero(fixed)]
        free = ~fixed
        if free.any():
            Hff = H[np.ix_(free, free)]
            rhs = H[free] @ a - H[np.ix_(free, fixed)] @ x[fixed]
            x[free] = np.linalg.solve(Hff, rhs)
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            continue
        d = x - a
        f = 0.5 * d @ H @ d
        if f < best_f:
            best, best_f = x, f
    return best, best_f


def sweep_invariants(problem: SplitProblem, gamma, n_samples=1000, rng=None,
                     scale=3.0, x_star=None, inf_phi=None):
    """Worst relative violations of the envelope bounds over random ``s``.

    Smooth regime: the sandwich ``phi(v) + (1-gamma L)/(2 gamma)||v-u||^2
    <= DRE <= phi(u)`` (upper bound only where ``phi(u)`` is finite) and the
    quadratic upper bound ``DRE - phi(w) <= (1+gamma L)/(2 gamma)||u-w||^2``
    for random ``w`` in ``dom phi2``. Strongly convex regime with a known
    minimizer: ``||x*-v||^2/(2 gamma) + (gamma mu - 1)/(2 gamma)||x*-u||^2
    <= inf phi - DRE``. Violations are divided by ``1 + |DRE|``.
    """
    rng = np.random.default_rng(rng)
    rep = InvariantReport(samples=n_samples)
    reg = problem.regime
    for _ in range(n_samples):
        s = scale * rng.standard_normal(problem.dim)
        u, v = drs_oracle(problem, s, gamma)
        dre = dre_eval(problem, s, u, v, gamma)
        den = 1.0 + abs(dre)
        if isinstance(reg, Smooth):
            L = reg.L
            lower = problem.phi(v) + (1 - gamma * L) / (2 * gamma) * np.sum((v - u) ** 2)
            rep.sandwich = max(rep.sandwich, (lower - dre) / den)
            phi_u = problem.phi(u)
            if np.isfinite(phi_u):
                rep.sandwich = max(rep.sandwich, (dre - phi_u) / den)
            w = problem.phi2.prox(scale * rng.standard_normal(problem.dim), gamma)
            phi_w = problem.phi(w)
            if np.isfinite(phi_w):
                bound = (1 + gamma * L) / (2 * gamma) * np.sum((u - w) ** 2)
                rep.qg = max(rep.qg, (dre - phi_w - bound) / den)
        elif x_star is not None and inf_phi is not None:
            mu = reg.modulus
            lhs = (np.sum((x_star - v) ** 2) / (2 * gamma)
                   + (gamma * mu - 1) / (2 * gamma) * np.sum((x_star - u) ** 2))
            rep.qlb = max(rep.qlb, (lhs - (inf_phi - dre)) / den)
    rep.sandwich = max(rep.sandwich, 0.0)
    return rep
