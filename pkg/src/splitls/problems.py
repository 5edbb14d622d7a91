"""Problem builders and synthetic data.

Four families are provided:

* sparse least squares with an l1/2 penalty (nonconvex phi2);
* sparse PCA over the unit sphere with a cardinality constraint
  (nonconvex quadratic phi1, nonconvex set);
* the same problem split over ``N`` agents, in ADMM form;
* linear MPC for a double integrator with input box and a soft state
  corridor (strongly convex generalized-quadratic phi1).

All linear algebra is dense. Factorizations are cached per stepsize; call
``meta["prepare"](gamma)`` before sharing a problem across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .core import (ConfigError, ProxOracle, Smooth, SplitProblem, StronglyConvex,
                   UnboundedSubproblem)
from .admm import AdmmProblem

__all__ = [
    "prox_l_half", "prox_soft_corridor", "prox_box", "project_sparse_sphere",
    "SparseLsqSpec", "SpcaSpec", "ConsensusSpcaSpec", "MpcSpec",
    "build_sparse_lsq", "build_spca", "build_consensus_spca",
    "consensus_spca_as_drs", "build_mpc", "generate_synthetic",
    "double_integrator", "prox_pseudo_huber", "build_pseudo_huber_qp",
]


# ---------------------------------------------------------------- scalar proxes

def prox_l_half(x, gamma):
    """Prox of ``gamma * sum(sqrt(|x_i|))``, coordinatewise.

    Nonzero branch for ``|x| > 1.5 gamma^(2/3)``; zero otherwise, including
    the tie at the threshold where both are minimizers.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.zeros_like(x)
    big = ax > 1.5 * gamma ** (2.0 / 3.0)
    if np.any(big):
        phi = np.arccos(gamma / 4.0 * (ax[big] / 3.0) ** -1.5)
        out[big] = 2.0 / 3.0 * (1.0 + np.cos(2.0 / 3.0 * (np.pi - phi))) * x[big]
    return out


def prox_soft_corridor(x, gamma, rho, kappa):
    """Prox of ``kappa * max(0, |x| - rho)`` with step ``gamma``.

    Inside the corridor the point is kept; within ``gamma*kappa`` outside it
    is pulled onto the boundary; further out it is shifted by
    ``gamma*kappa`` toward the corridor.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    sg = np.sign(x)
    t = gamma * np.asarray(kappa, dtype=float)
    return np.where(ax <= rho, x, np.where(ax <= rho + t, sg * rho, x - t * sg))


def prox_pseudo_huber(x, gamma, rho, tol=1e-14, max_newton=50):
    """Prox of ``rho * sum(sqrt(1 + x_i^2) - 1)`` by safeguarded Newton.

    The optimality condition ``w - x + gamma rho w / sqrt(1 + w^2) = 0`` is
    strictly increasing in ``w``; its root lies between 0 and ``x``.
    """
    x = np.asarray(x, dtype=float)
    t = gamma * rho
    lo = np.minimum(x, 0.0)
    hi = np.maximum(x, 0.0)
    w = x / (1.0 + t)
    for _ in range(max_newton):
        q = np.sqrt(1.0 + w * w)
        g = w - x + t * w / q
        lo = np.where(g < 0, w, lo)
        hi = np.where(g > 0, w, hi)
        step = g / (1.0 + t / q ** 3)
        w_new = w - step
        out = (w_new <= lo) | (w_new >= hi)
        w_new = np.where(out, 0.5 * (lo + hi), w_new)
        if np.all(np.abs(w_new - w) <= tol * (1.0 + np.abs(w))):
            return w_new
        w = w_new
    return w


def prox_box(x, gamma, lo, hi):
    """Projection onto ``[lo, hi]`` (independent of ``gamma``)."""
    return np.clip(x, lo, hi)


def project_sparse_sphere(x, k):
    """Projection onto unit vectors with at most ``k`` nonzeros.

    Keeps the ``k`` largest entries in magnitude, ties broken by lowest
    index, and normalizes. If the kept entries are all zero, the first
    canonical basis vector is returned.
    """
    x = np.asarray(x, dtype=float)
    idx = np.argsort(-np.abs(x), kind="stable")[:k]
    out = np.zeros_like(x)
    out[idx] = x[idx]
    nrm = np.linalg.norm(out)
    if nrm == 0.0:
        out[0] = 1.0
        return out
    return out / nrm


# ---------------------------------------------------------------- sparse LSQ

@dataclass
class SparseLsqSpec:
    A: np.ndarray
    b: np.ndarray
    r: float
    seed: Optional[int] = None
    x_hat: Optional[np.ndarray] = None


class _LsqProx:
    """``(A^T A + I/gamma)^{-1} (A^T b + x/gamma)`` through the smaller
    of the two normal-equation systems."""

    def __init__(self, A, b):
        self.A = A
        self.Atb = A.T @ b
        self._cache = {}

    def factor(self, gamma):
        fac = self._cache.get(gamma)
        if fac is None:
            m, n = self.A.shape
            if m < n:
                K = np.eye(m) + gamma * (self.A @ self.A.T)
            else:
                K = self.A.T @ self.A + np.eye(n) / gamma
            fac = linalg.cho_factor(K)
            self._cache[gamma] = fac
        return fac

    def __call__(self, x, gamma):
        fac = self.factor(gamma)
        rhs = self.Atb + x / gamma
        m, n = self.A.shape
        if m < n:
            # Woodbury: (I/g + A^T A)^{-1} = g I - g^2 A^T (I + g A A^T)^{-1} A
            return gamma * rhs - gamma ** 2 * (self.A.T @ linalg.cho_solve(fac, self.A @ rhs))
        return linalg.cho_solve(fac, rhs)


def build_sparse_lsq(spec: SparseLsqSpec) -> SplitProblem:
    """``phi1 = 0.5 ||Ax - b||^2``, ``phi2 = r sum(sqrt(|x_i|))``."""
    A = np.asarray(spec.A, dtype=float)
    b = np.asarray(spec.b, dtype=float)
    r = float(spec.r)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise ConfigError("inconsistent sparse least-squares dimensions")
    if not r > 0:
        raise ConfigError("regularization weight must be positive")
    prox1 = _LsqProx(A, b)

    def f1(x):
        res = A @ x - b
        return 0.5 * float(res @ res)

    phi1 = ProxOracle(f1, prox1, is_generalized_quadratic=True,
                      grad=lambda x: A.T @ (A @ x - b), name="least-squares")
    phi2 = ProxOracle(lambda x: r * float(np.sum(np.sqrt(np.abs(x)))),
                      lambda x, g: prox_l_half(x, g * r), name="l1/2")
    L = float(linalg.norm(A, 2)) ** 2
    return SplitProblem(phi1, phi2, Smooth(L, convex=True), A.shape[1],
                        meta={"spec": spec, "prepare": prox1.factor,
                              "family": "sparse_lsq"})


def build_pseudo_huber_qp(Q, q, rho) -> SplitProblem:
    """``phi1 = 0.5 x^T Q x - q^T x`` with ``Q`` positive definite and
    ``phi2 = rho sum(sqrt(1 + x_i^2) - 1)``. Both terms are smooth and
    the prox of ``phi2`` is single valued."""
    Q = np.asarray(Q, dtype=float)
    q = np.asarray(q, dtype=float)
    n = Q.shape[0]
    if Q.shape != (n, n) or q.shape != (n,):
        raise ConfigError("inconsistent quadratic dimensions")
    cache = {}

    def prox1(x, gamma):
        fac = cache.get(gamma)
        if fac is None:
            fac = cache[gamma] = linalg.cho_factor(Q + np.eye(n) / gamma)
        return linalg.cho_solve(fac, q + x / gamma)

    phi1 = ProxOracle(lambda x: 0.5 * float(x @ Q @ x) - float(q @ x), prox1,
                      is_generalized_quadratic=True,
                      grad=lambda x: Q @ x - q, name="quadratic")
    phi2 = ProxOracle(lambda x: rho * float(np.sum(np.sqrt(1 + x * x) - 1)),
                      lambda x, g: prox_pseudo_huber(x, g, rho),
                      grad=lambda x: rho * x / np.sqrt(1 + x * x),
                      name="pseudo-huber")
    L = float(np.linalg.eigvalsh(Q)[-1])
    return SplitProblem(phi1, phi2, Smooth(L, convex=True), n,
                        meta={"family": "pseudo_huber_qp"})


# ---------------------------------------------------------------- sparse PCA

@dataclass
class SpcaSpec:
    W: np.ndarray
    k: int
    seed: Optional[int] = None
    v_hat: Optional[np.ndarray] = None


@dataclass
class ConsensusSpcaSpec:
    spca: SpcaSpec
    N: int
    partition: Optional[Sequence[np.ndarray]] = None

    def blocks(self):
        m = self.spca.W.shape[0]
        parts = self.partition
        if parts is None:
            parts = np.array_split(np.arange(m), self.N)
        if len(parts) != self.N:
            raise ConfigError("partition must have N blocks")
        return [self.spca.W[np.asarray(p)] for p in parts]


class _ConcaveQuadProx:
    """Prox of ``-(1/2m)||W x||^2``: ``x + W^T((m/g) I - W W^T)^{-1} W x``.

    The smaller of the two equivalent systems is factored; it is positive
    definite exactly when ``g < m/||W||^2``.
    """

    def __init__(self, W, m):
        self.W = np.asarray(W, dtype=float)
        self.m = float(m)
        self.L = float(linalg.norm(self.W, 2)) ** 2 / self.m if self.W.size else 0.0
        self._cache = {}

    def factor(self, gamma):
        fac = self._cache.get(gamma)
        if fac is None:
            if self.L > 0 and not gamma * self.L < 1:
                raise UnboundedSubproblem(
                    f"stepsize {gamma:.6g} must be below m/||W||^2 = {1 / self.L:.6g}")
            p, n = self.W.shape
            if p <= n:
                K = self.m / gamma * np.eye(p) - self.W @ self.W.T
            else:
                K = np.eye(n) - gamma / self.m * (self.W.T @ self.W)
            fac = linalg.cho_factor(K)
            self._cache[gamma] = fac
        return fac

    def __call__(self, x, gamma):
        x = np.asarray(x, dtype=float)
        if self.W.size == 0 or self.L == 0:
            return x.copy()
        fac = self.factor(gamma)
        p, n = self.W.shape
        if p <= n:
            return x + self.W.T @ linalg.cho_solve(fac, self.W @ x)
        return linalg.cho_solve(fac, x)


def _sphere_indicator(k, tol=1e-9):
    def value(x):
        ok = abs(np.linalg.norm(x) - 1.0) <= tol and np.count_nonzero(x) <= k
        return 0.0 if ok else np.inf
    return value


def build_spca(spec: SpcaSpec, gamma_hint=None) -> SplitProblem:
    """``phi1 = -(1/2m)||Wx||^2`` and ``phi2`` the indicator of sparse unit
    vectors. ``gamma_hint`` is factored eagerly and must be below ``1/L``."""
    W = np.asarray(spec.W, dtype=float)
    m, n = W.shape
    if not 1 <= spec.k <= n:
        raise ConfigError("sparsity level must lie in [1, n]")
    prox1 = _ConcaveQuadProx(W, m)
    if gamma_hint is not None:
        prox1.factor(gamma_hint)

    def f1(x):
        Wx = W @ x
        return -0.5 / m * float(Wx @ Wx)

    phi1 = ProxOracle(f1, prox1, is_generalized_quadratic=True,
                      grad=lambda x: -(W.T @ (W @ x)) / m, name="spca-quadratic")
    k = int(spec.k)
    phi2 = ProxOracle(_sphere_indicator(k), lambda x, g: project_sparse_sphere(x, k),
                      name="sparse-sphere")
    return SplitProblem(phi1, phi2, Smooth(prox1.L, convex=False), n,
                        meta={"spec": spec, "prepare": prox1.factor,
                              "family": "spca"})


def build_consensus_spca(spec: ConsensusSpcaSpec, beta=None,
                         lam=1.0) -> AdmmProblem:
    """Sparse PCA with one copy ``x_i`` of the variable per agent.

    ``A = I``, ``B = -[I; ...; I]``, ``b = 0``. Agent ``i`` owns the rows
    ``W_i`` of the data; its x-update is the prox of its own concave
    quadratic at ``z - y_i/beta``. The z-update projects the average of
    ``x_i + y_i/beta`` onto the sparse sphere.
    """
    W = np.asarray(spec.spca.W, dtype=float)
    m, n = W.shape
    N = int(spec.N)
    k = int(spec.spca.k)
    blocks = spec.blocks()
    agents = [_ConcaveQuadProx(Wi, m) for Wi in blocks]
    L = max(a.L for a in agents)
    if beta is not None:
        bmin = 2 * L / (2 - lam)
        if not beta > bmin:
            raise ConfigError(f"penalty {beta:.6g} must exceed {bmin:.6g}")
        for a in agents:
            a.factor(1.0 / beta)

    def split(x):
        return x.reshape(N, n)

    def argmin_x(y, z, beta):
        Y = split(y)
        # agents are independent; merged in index order
        return np.concatenate([agents[i](z - Y[i] / beta, 1.0 / beta)
                               for i in range(N)])

    def argmin_z(x, y, beta):
        return project_sparse_sphere(np.mean(split(x) + split(y) / beta, axis=0), k)

    def f_value(x):
        X = split(x)
        return sum(-0.5 / m * float(np.sum((Wi @ X[i]) ** 2))
                   for i, Wi in enumerate(blocks))

    def f_grad(x):
        X = split(x)
        return np.concatenate([-(Wi.T @ (Wi @ X[i])) / m
                               for i, Wi in enumerate(blocks)])

    return AdmmProblem(
        argmin_x=argmin_x, argmin_z=argmin_z,
        A=lambda x: x, B=lambda z: -np.tile(z, N), b=np.zeros(N * n),
        f_value=f_value, g_value=_sphere_indicator(k),
        regime=Smooth(L, convex=False), f_is_quadratic=True,
        At=lambda y: y, Bt=lambda y: -np.sum(split(y), axis=0),
        B_norm=float(np.sqrt(N)), f_grad=f_grad,
        meta={"spec": spec, "N": N, "n": n, "family": "consensus_spca"},
    )


def consensus_spca_as_drs(spec: ConsensusSpcaSpec) -> SplitProblem:
    """The consensus problem written as ``phi1 + phi2`` on ``R^{nN}``.

    ``phi1`` is the separable agent cost and ``phi2`` the indicator of
    stacked copies of one sparse unit vector; its prox projects the block
    average.
    """
    W = np.asarray(spec.spca.W, dtype=float)
    m, n = W.shape
    N, k = int(spec.N), int(spec.spca.k)
    blocks = spec.blocks()
    agents = [_ConcaveQuadProx(Wi, m) for Wi in blocks]
    L = max(a.L for a in agents)
    sphere = _sphere_indicator(k)

    def prox1(x, gamma):
        X = x.reshape(N, n)
        return np.concatenate([agents[i](X[i], gamma) for i in range(N)])

    def f1(x):
        X = x.reshape(N, n)
        return sum(-0.5 / m * float(np.sum((Wi @ X[i]) ** 2))
                   for i, Wi in enumerate(blocks))

    def prox2(x, gamma):
        return np.tile(project_sparse_sphere(x.reshape(N, n).mean(axis=0), k), N)

    def f2(x):
        X = x.reshape(N, n)
        if np.any(X != X[0]):
            return np.inf
        return sphere(X[0])

    phi1 = ProxOracle(f1, prox1, is_generalized_quadratic=True, name="agents")
    phi2 = ProxOracle(f2, prox2, name="consensus-sphere")
    return SplitProblem(phi1, phi2, Smooth(L, convex=False), N * n,
                        meta={"spec": spec, "family": "consensus_spca_drs"})


# ---------------------------------------------------------------- MPC

@dataclass
class MpcSpec:
    """Linear MPC data.

    ``Q`` and ``R`` must be diagonal positive definite so that the scaling
    to identity Hessian keeps the constraint functions separable.
    ``soft`` lists ``(state_index, rho, kappa)`` corridor penalties
    ``kappa * max(0, |x_j| - rho)``.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x_ref: np.ndarray
    N: int
    u_lo: np.ndarray
    u_hi: np.ndarray
    soft: list = field(default_factory=list)
    x0: Optional[np.ndarray] = None
    seed: Optional[int] = None


def double_integrator(dt=0.2):
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.5 * dt * dt], [dt]])
    return A, B


class _AffineSetQuadProx:
    """Prox of ``0.5||w - c||^2 + indicator{E w = e}``.

    The unconstrained minimizer is a convex combination of ``c`` and ``x``;
    the constraint is imposed by Euclidean projection, exact because the
    Hessian is a multiple of the identity.
    """

    def __init__(self, E, e, center):
        self.E, self.e, self.c = E, e, center
        self.fac = linalg.cho_factor(E @ E.T)

    def project(self, w):
        return w - self.E.T @ linalg.cho_solve(self.fac, self.E @ w - self.e)

    def __call__(self, x, gamma):
        w0 = (self.c + np.asarray(x, dtype=float) / gamma) / (1.0 + 1.0 / gamma)
        return self.project(w0)


def build_mpc(spec: MpcSpec) -> SplitProblem:
    """Condensed-free MPC in scaled variables ``zeta = D^{-1} z``.

    ``z = (u_0, ..., u_{N-1}, x_1, ..., x_N)`` and ``D`` makes the cost
    Hessian the identity, so ``phi1(zeta) = 0.5||zeta - zeta_ref||^2`` plus
    the dynamics indicator and ``mu = 1``. ``meta["unscale"]`` maps a
    scaled point back to ``z``.
    """
    Ad, Bd = np.atleast_2d(spec.A).astype(float), np.atleast_2d(spec.B).astype(float)
    nx, nu = Bd.shape
    N = int(spec.N)
    Q, R = np.atleast_2d(spec.Q).astype(float), np.atleast_2d(spec.R).astype(float)
    for M, nm in ((Q, "Q"), (R, "R")):
        if np.any(M != np.diag(np.diag(M))):
            raise ConfigError(f"{nm} must be diagonal")
        if np.any(np.diag(M) <= 0):
            raise ConfigError(f"{nm} must be positive definite")
    if Ad.shape != (nx, nx) or Q.shape != (nx, nx) or R.shape != (nu, nu):
        raise ConfigError("inconsistent MPC dimensions")
    x0 = np.zeros(nx) if spec.x0 is None else np.asarray(spec.x0, dtype=float)
    nU, nz = N * nu, N * (nu + nx)

    # cost sum ||x - xref||_Q^2 + ||u||_R^2 has Hessian 2 diag(R.., Q..)
    h = 2.0 * np.concatenate([np.tile(np.diag(R), N), np.tile(np.diag(Q), N)])
    dscale = 1.0 / np.sqrt(h)
    z_ref = np.concatenate([np.zeros(nU), np.tile(np.asarray(spec.x_ref, float), N)])

    # dynamics x_{i+1} - A x_i - B u_i = 0
    E = np.zeros((N * nx, nz))
    e = np.zeros(N * nx)
    for i in range(N):
        rows = slice(i * nx, (i + 1) * nx)
        E[rows, i * nu:(i + 1) * nu] = -Bd
        E[rows, nU + i * nx:nU + (i + 1) * nx] = np.eye(nx)
        if i == 0:
            e[rows] = Ad @ x0
        else:
            E[rows, nU + (i - 1) * nx:nU + i * nx] = -Ad
    Es = E * dscale
    center = z_ref / dscale
    prox1 = _AffineSetQuadProx(Es, e, center)
    # phi1 equals the unscaled cost on the feasible set
    feas_tol = 1e-7

    def f1(w):
        viol = np.linalg.norm(Es @ w - e)
        if viol > feas_tol * (1.0 + np.linalg.norm(e) + np.linalg.norm(w)):
            return np.inf
        d = w - center
        return 0.5 * float(d @ d)

    lo = np.full(nz, -np.inf)
    hi = np.full(nz, np.inf)
    lo[:nU] = np.tile(np.asarray(spec.u_lo, float), N) / dscale[:nU]
    hi[:nU] = np.tile(np.asarray(spec.u_hi, float), N) / dscale[:nU]
    rho = np.full(nz, np.inf)
    kap = np.zeros(nz)
    for j, rj, kj in spec.soft:
        idx = nU + np.arange(N) * nx + int(j)
        rho[idx] = rj / dscale[idx]
        kap[idx] = kj * dscale[idx]
    soft_idx = np.isfinite(rho)

    def prox2(x, gamma):
        w = np.clip(x, lo, hi)
        w[soft_idx] = prox_soft_corridor(x[soft_idx], gamma, rho[soft_idx],
                                         kap[soft_idx])
        return w

    def f2(w):
        if np.any(w < lo) or np.any(w > hi):
            return np.inf
        excess = np.maximum(0.0, np.abs(w[soft_idx]) - rho[soft_idx])
        return float(np.sum(kap[soft_idx] * excess))

    phi1 = ProxOracle(f1, prox1, is_generalized_quadratic=True, name="mpc-cost")
    phi2 = ProxOracle(f2, prox2, name="mpc-constraints")
    meta = {"spec": spec, "family": "mpc", "scale": dscale, "E": Es, "e": e,
            "center": center, "unscale": lambda w: w * dscale,
            "scale_point": lambda z: np.asarray(z) / dscale, "nU": nU,
            "nx": nx, "nu": nu, "box": (lo, hi), "corridor": (rho, kap),
            "project_dynamics": prox1.project}
    return SplitProblem(phi1, phi2, StronglyConvex(1.0), nz, meta=meta)


# ---------------------------------------------------------------- generators

def _sparse_lsq_spec(rng, seed, m=100, n=500, k=50, r=0.1):
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    x_hat = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    x_hat[support] = rng.standard_normal(k)
    return SparseLsqSpec(A, A @ x_hat, r, seed, x_hat)


def _spca_spec(rng, seed, m=200, n=40, k=5, snr=4.0):
    v = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    v[support] = rng.standard_normal(k)
    v /= np.linalg.norm(v)
    W = rng.standard_normal((m, n)) + np.sqrt(snr) * np.outer(rng.standard_normal(m), v)
    W -= W.mean(axis=0)
    return SpcaSpec(W, k, seed, v)


def _mpc_spec(rng, seed, N=10, dt=0.2, x_target=2.0, u_max=1.0, v_max=0.6,
              kappa=100.0):
    A, B = double_integrator(dt)
    x0 = np.array([0.0, 0.0]) if seed is None else np.array(
        [rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2)])
    return MpcSpec(A=A, B=B, Q=np.diag([1.0, 0.1]), R=np.diag([0.1]),
                   x_ref=np.array([x_target, 0.0]), N=N,
                   u_lo=np.array([-u_max]), u_hi=np.array([u_max]),
                   soft=[(1, v_max, kappa)], x0=x0, seed=seed)


def generate_synthetic(family, dims=None, seed=0):
    """Reproducible synthetic problem data.

    Parameters
    ----------
    family : {"sparse_lsq", "spca", "consensus_spca", "mpc"}
    dims : dict, optional
        ``sparse_lsq``: m, n, k, r. Gaussian ``A`` with variance ``1/m``,
        ``b = A x_hat`` with ``k`` standard normal nonzeros.
        ``spca``: m, n, k, snr. Gaussian noise plus a rank-one spike along
        a planted ``k``-sparse unit vector, columns centered.
        ``consensus_spca``: as ``spca`` plus N.
        ``mpc``: N, dt, x_target, u_max, v_max, kappa. Double integrator
        tracking a position target with an input box and a soft velocity
        corridor; ``seed=None`` starts from rest at the origin.
    seed : int or None
    """
    dims = dict(dims or {})
    rng = np.random.default_rng(seed)
    try:
        return _generate(family, dims, rng, seed)
    except TypeError as exc:
        raise ConfigError(f"bad dimensions for {family!r}: {exc}") from exc


def _generate(family, dims, rng, seed):
    if family == "sparse_lsq":
        return _sparse_lsq_spec(rng, seed, **dims)
    if family == "spca":
        return _spca_spec(rng, seed, **dims)
    if family == "consensus_spca":
        N = int(dims.pop("N", 4))
        return ConsensusSpcaSpec(_spca_spec(rng, seed, **dims), N)
    if family == "mpc":
        return _mpc_spec(rng, seed, **dims)
    raise ConfigError(f"unknown problem family {family!r}")
