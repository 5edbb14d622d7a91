"""Linesearch ADMM.

Solves ``minimize f(x) + g(z)  subject to  Ax + Bz = b`` with the merit
function given by the augmented Lagrangian. The linesearch acts on the
half-step multiplier passed to the x-update; through the map
``s = Ax - y/beta`` it retraces the linesearch DRS on the equivalent
composite problem with stepsize ``1/beta``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .core import (ConfigError, Smooth, UnboundedSubproblem,
                   auglag_eval, _call)
from .directions import DirectionEngine, NominalEngine, make_engine
from .drs import (GAMMA_RANGE, BacktrackOverflow, CertificateUnavailable,
                  IterRecord, StepsizeOutOfRange, admissible_C,
                  default_decrease_constant, default_stepsize)

__all__ = [
    "AdmmProblem", "AdmmConfig", "AdmmState", "AdmmSolveReport",
    "AdmmCertificate", "AdmmCounters", "admm_oracle", "admm_init",
    "admm_ls_iterate", "admm_ls_solve", "admm_solve", "admm_to_drs_image",
    "adaptive_beta_guard", "certificate_admm",
]


@dataclass(frozen=True)
class AdmmProblem:
    """Structured ADMM problem.

    Parameters
    ----------
    argmin_x : callable
        ``argmin_x(y, z, beta)`` minimizes ``L_beta(., z, y)``.
    argmin_z : callable
        ``argmin_z(x, y, beta)`` minimizes ``L_beta(x, ., y)``.
    A, B : callable
        Linear maps ``x -> Ax`` and ``z -> Bz``.
    b : ndarray
    f_value, g_value : callable
    regime : Smooth or StronglyConvex
        ``Smooth(L)`` refers to the image function ``A|>f``;
        ``StronglyConvex(mu_f, A_norm)`` to ``f`` itself.
    f_is_quadratic : bool
        f is generalized quadratic, so the x-update is affine in ``y``.
    At, Bt : callable, optional
        Adjoints, needed for certificates.
    B_norm : float
    f_grad : callable, optional
    """

    argmin_x: Callable
    argmin_z: Callable
    A: Callable
    B: Callable
    b: np.ndarray
    f_value: Callable
    g_value: Callable
    regime: object
    f_is_quadratic: bool = False
    At: Optional[Callable] = None
    Bt: Optional[Callable] = None
    B_norm: float = 1.0
    f_grad: Optional[Callable] = None
    meta: dict = field(default_factory=dict, compare=False)

    def auglag(self, x, z, y, beta, fx=None, gz=None):
        fx = self.f_value(x) if fx is None else fx
        gz = self.g_value(z) if gz is None else gz
        return auglag_eval(fx, gz, self.A, self.B, self.b, x, z, y, beta)

    def residual(self, x, z):
        return self.A(x) + self.B(z) - self.b


@dataclass
class AdmmCounters:
    xstep: int = 0
    zstep: int = 0
    fvalue: int = 0
    gvalue: int = 0


def default_penalty(regime, lam, fraction=0.95):
    """Penalty matching the default DRS stepsize (smooth case) or
    ``0.5 mu_f/||A||^2`` (strongly convex case)."""
    if isinstance(regime, Smooth):
        return 1.0 / default_stepsize(regime, lam, fraction)
    return 0.5 * regime.modulus


@dataclass
class AdmmConfig:
    """Parameters of the linesearch ADMM; mirrors :class:`DrsConfig`.

    ``epsilon`` bounds ``beta ||Ax + Bz - b||``.
    """

    lam: float = 1.0
    beta: Optional[float] = None
    c: Optional[float] = None
    epsilon: float = 1e-6
    i_max: float = 10
    max_iters: int = 1000
    adaptive: bool = False
    Phi_lb: Optional[float] = None
    quadcache: bool = True
    store_iterates: bool = False
    beta_fraction: float = 0.95
    c_fraction: float = 0.5
    merit_slack: float = 1e-12
    pi: Optional[int] = None

    def resolve(self, problem: AdmmProblem) -> "AdmmConfig":
        reg = problem.regime
        if not 0 < self.lam < 2:
            raise ConfigError(f"relaxation must lie in (0, 2), got {self.lam}")
        beta = self.beta
        if beta is None:
            beta = default_penalty(reg, self.lam, self.beta_fraction)
        c = self.c
        if c is None:
            if self.adaptive:
                c = default_decrease_constant(reg, self.lam, self.beta_fraction,
                                              self.c_fraction)
            else:
                c = self.c_fraction * admissible_C(reg, 1.0 / beta, self.lam)
        out = replace(self, beta=float(beta), c=float(c), pi=reg.pi)
        out.validate(problem)
        return out

    def validate(self, problem):
        if not (self.beta and self.beta > 0):
            raise ConfigError("penalty must be positive")
        if self.epsilon < 0 or self.i_max < 0:
            raise ConfigError("tolerance and i_max must be nonnegative")
        if not self.c > 0:
            raise ConfigError(f"decrease constant must be positive, got {self.c}")
        if self.adaptive:
            return
        Dbar = admissible_C(problem.regime, 1.0 / self.beta, self.lam)
        if not self.c < Dbar:
            raise ConfigError(f"need 0 < c < {Dbar:.6g}, got c = {self.c:.6g}")


@dataclass
class AdmmState:
    """``(x^k, y^k, z^k)`` plus the oracle inputs ``(y^{k-1/2}, z^{k-1})``."""

    k: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    r: np.ndarray
    auglag: float
    beta: float
    y_half: np.ndarray
    z_prev: np.ndarray

    @property
    def res_norm(self):
        return float(np.linalg.norm(self.r))


@dataclass
class AdmmCertificate:
    primal_residual: float
    primal_bound: float
    x_stationarity: Optional[float]
    z_stationarity_bound: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray


@dataclass
class AdmmSolveReport:
    status: str
    state: AdmmState
    trace: List[IterRecord]
    counters: AdmmCounters
    config: AdmmConfig
    engine: str
    adjustments: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    certificate: Optional[AdmmCertificate] = None

    @property
    def converged(self):
        return self.status == "Converged"

    @property
    def iterations(self):
        return self.state.k

    def column(self, name):
        return np.array([getattr(rec, name) for rec in self.trace], dtype=float)

    def summary(self):
        s = self.state
        return {
            "status": self.status,
            "iterations": s.k,
            "res_norm": s.res_norm,
            "merit": s.auglag,
            "beta": s.beta,
            "xstep_calls": self.counters.xstep,
            "zstep_calls": self.counters.zstep,
            "adjustments": len(self.adjustments),
            "engine": self.engine,
        }


class _AdmmEval:
    def __init__(self, problem: AdmmProblem, counters: AdmmCounters):
        self.p = problem
        self.n = counters

    def xstep(self, y, z, beta):
        self.n.xstep += 1
        return np.asarray(_call("x-step", self.p.argmin_x, y, z, beta), dtype=float)

    def fval(self, x):
        self.n.fvalue += 1
        return self.p.f_value(x)

    def finish(self, y_t, z_t, x, fx, beta):
        """Multiplier and z-updates after an x-step; returns the triple data."""
        p = self.p
        y = y_t + beta * (p.A(x) + p.B(z_t) - p.b)
        self.n.zstep += 1
        z = np.asarray(_call("z-step", p.argmin_z, x, y, beta), dtype=float)
        self.n.gvalue += 1
        L = p.auglag(x, z, y, beta, fx, p.g_value(z))
        return y, z, p.residual(x, z), L

    def oracle(self, y_t, z_t, beta):
        x = self.xstep(y_t, z_t, beta)
        fx = self.fval(x)
        y, z, r, L = self.finish(y_t, z_t, x, fx, beta)
        return x, y, z, r, L, fx


def admm_oracle(problem: AdmmProblem, y_tilde, z_tilde, beta):
    """One ADMM step from ``(y_tilde, z_tilde)``; returns ``(x, y, z)``."""
    if not beta > 0:
        raise ConfigError("penalty must be positive")
    ev = _AdmmEval(problem, AdmmCounters())
    x, y, z, *_ = ev.oracle(np.asarray(y_tilde, dtype=float),
                            np.asarray(z_tilde, dtype=float), beta)
    return x, y, z


def admm_to_drs_image(x, y, z, beta, A_apply, B_apply, b):
    """``(s, u, v) = (Ax - y/beta, Ax, b - Bz)``."""
    Ax = A_apply(x)
    return Ax - y / beta, Ax, b - B_apply(z)


def admm_init(problem: AdmmProblem, x_init, y_init, z_init, beta, lam,
              counters=None, ev=None):
    """Initialization: shift the multiplier and take one ADMM step."""
    ev = ev or _AdmmEval(problem, counters or AdmmCounters())
    x_init = np.asarray(x_init, dtype=float)
    y_init = np.asarray(y_init, dtype=float)
    z_init = np.array(z_init, dtype=float, copy=True)
    r = problem.residual(x_init, z_init)
    y_half = y_init - beta * (1 - lam) * r
    x, y, z, r, L, _ = ev.oracle(y_half, z_init, beta)
    return AdmmState(0, x, y, z, r, L, float(beta), y_half, z_init)


def _ok(pi, new, old, c, beta, rr, slack=0.0):
    # slack absorbs rounding once the required decrease drops below it
    return pi * new <= pi * old - beta * c * rr + slack * max(1.0, abs(old))


def adaptive_beta_guard(state: AdmmState, problem, config: AdmmConfig, ev):
    """Counterpart of :func:`adaptive_gamma_guard` with ``beta <- 2**pi beta``."""
    pi, lam, c, beta = config.pi, config.lam, config.c, state.beta
    r = state.r
    ybar = state.y - beta * (1 - lam) * r
    try:
        xb = ev.xstep(ybar, state.z, beta)
        fb = ev.fval(xb)
        yb, zb, rb, Lb = ev.finish(ybar, state.z, xb, fb, beta)
        rr = float(np.dot(r, r))
        ok = (_ok(pi, Lb, state.auglag, c, beta, rr, config.merit_slack)
              and not (config.Phi_lb is not None and pi * Lb < pi * config.Phi_lb))
    except UnboundedSubproblem:
        ok = False
    if ok:
        return False, state, (ybar, xb, fb, yb, zb, rb, Lb)
    while True:
        beta = _scale_penalty(beta, pi)
        try:
            x, y, z, r, L, _ = ev.oracle(state.y_half, state.z_prev, beta)
            break
        except UnboundedSubproblem:
            continue
    return True, AdmmState(state.k, x, y, z, r, L, beta, state.y_half,
                           state.z_prev), None


def _scale_penalty(beta, pi):
    beta = beta * 2.0 ** pi
    if not GAMMA_RANGE[0] <= beta <= GAMMA_RANGE[1]:
        raise StepsizeOutOfRange(
            f"adaptive penalty {beta:.3g} left {GAMMA_RANGE}; "
            "check the declared regime")
    return beta


def admm_ls_iterate(state: AdmmState, problem: AdmmProblem, config: AdmmConfig,
                    engine: DirectionEngine, ev: _AdmmEval, nominal=None):
    """One linesearch step; returns ``(next_state, tau, backtracks, fallback,
    next_merit)``."""
    p = problem
    pi, lam, c, beta = config.pi, config.lam, config.c, state.beta
    y, z, r = state.y, state.z, state.r
    rr = float(np.dot(r, r))
    ybar = y - beta * (1 - lam) * r
    Bz = p.B(z)
    d = np.asarray(engine.direction(r, p.b - Bz - ybar / beta, lam), dtype=float)
    if not np.all(np.isfinite(d)):
        d = -lam * r
    yd = y - beta * (r + d)
    quad = config.quadcache and p.f_is_quadratic

    if nominal is not None and np.array_equal(yd, ybar):
        x0, f0, y0, z0, r0, L0 = nominal[1:]
    else:
        x0 = ev.xstep(yd, z, beta)
        f0 = ev.fval(x0)
        y0, z0, r0, L0 = ev.finish(yd, z, x0, f0, beta)
    if engine.uses_pairs:
        engine.feed(d, r0 - r)

    def make_state(yt, xn, yn, zn, rn, Ln):
        return AdmmState(state.k + 1, xn, yn, zn, rn, Ln, beta, yt, z)

    tau, i = 1.0, 0
    cur = (yd, x0, y0, z0, r0, L0)
    coef = None
    while not _ok(pi, cur[5], state.auglag, c, beta, rr, config.merit_slack):
        if i >= config.i_max:
            if nominal is None:
                if coef is None:
                    xb = ev.xstep(ybar, z, beta)
                    fb = ev.fval(xb)
                else:
                    xb, fb = coef[0], coef[2]
                yb, zb, rb, Lb = ev.finish(ybar, z, xb, fb, beta)
                nominal = (ybar, xb, fb, yb, zb, rb, Lb)
            yb_, xb, fb, yb, zb, rb, Lb = nominal
            return make_state(ybar, xb, yb, zb, rb, Lb), 0.0, i, True, Lb
        tau *= 0.5
        i += 1
        if tau == 0.0:
            raise BacktrackOverflow("tau underflowed; c or beta violate their bounds")
        yt = (1 - tau) * ybar + tau * yd
        if quad:
            if coef is None:
                if nominal is not None:
                    xb, fb = nominal[1], nominal[2]
                else:
                    xb = ev.xstep(ybar, z, beta)
                    fb = ev.fval(xb)
                yplus = ybar + beta * (p.A(xb) + Bz - p.b)
                slope = -float(np.dot(yplus, p.A(x0 - xb)))
                coef = (xb, x0, fb, slope, f0 - fb - slope)
            xt = (1 - tau) * coef[0] + tau * coef[1]
            ft = coef[2] + tau * (coef[3] + tau * coef[4])
        else:
            xt = ev.xstep(yt, z, beta)
            ft = ev.fval(xt)
        yn, zn, rn, Ln = ev.finish(yt, z, xt, ft, beta)
        cur = (yt, xt, yn, zn, rn, Ln)
    return make_state(*cur), tau, i, False, cur[5]


def _rec(state, tau, i, counters, t0, nxt=np.nan, fallback=False, calls=0):
    return IterRecord(state.k, state.res_norm, state.auglag, tau, i,
                      state.beta, counters.xstep, counters.zstep,
                      time.perf_counter() - t0, nxt, fallback, calls)


def admm_ls_solve(problem: AdmmProblem, init, config: AdmmConfig = None,
                  engine=None) -> AdmmSolveReport:
    """Run the linesearch ADMM from ``init = (x^{-1}, y^{-1}, z^{-1})``.

    Quasi-Newton engines built from a string start from the identity.
    """
    config = (config or AdmmConfig()).resolve(problem)
    engine = make_engine(engine if engine is not None else NominalEngine())
    engine.reset()
    counters = AdmmCounters()
    ev = _AdmmEval(problem, counters)
    t0 = time.perf_counter()
    trace, adjustments, iterates = [], [], []
    beta = config.beta
    while True:
        try:
            state = admm_init(problem, *init, beta, config.lam, ev=ev)
            break
        except UnboundedSubproblem:
            if not config.adaptive:
                raise
            beta = _scale_penalty(beta, config.pi)
            adjustments.append((0, beta))
    status = "MaxIters"
    while True:
        if state.beta * state.res_norm <= config.epsilon:
            status = "Converged"
            break
        if state.k >= config.max_iters:
            break
        calls0 = counters.xstep
        nominal = None
        if config.adaptive:
            adjusted, state, nominal = adaptive_beta_guard(state, problem, config, ev)
            if adjusted:
                adjustments.append((state.k, state.beta))
                continue
        prev = state
        state, tau, i, fb, nxt = admm_ls_iterate(prev, problem, config, engine,
                                                  ev, nominal)
        trace.append(_rec(prev, tau, i, counters, t0, nxt, fb,
                          counters.xstep - calls0))
        if config.store_iterates:
            iterates.append((prev.x.copy(), prev.y.copy(), prev.z.copy()))
    trace.append(_rec(state, np.nan, 0, counters, t0))
    rep = AdmmSolveReport(status, state, trace, counters, config, repr(engine),
                          adjustments, iterates)
    if rep.converged:
        rep.certificate = certificate_admm(state, config, problem)
    return rep


def admm_solve(problem: AdmmProblem, init, beta=None, lam=1.0, epsilon=1e-6,
               max_iters=1000) -> AdmmSolveReport:
    """Plain relaxed ADMM with the same trace format."""
    if beta is None:
        beta = default_penalty(problem.regime, lam)
    cfg = AdmmConfig(lam=lam, beta=beta, c=np.nan, epsilon=epsilon,
                     max_iters=max_iters, pi=problem.regime.pi)
    counters = AdmmCounters()
    ev = _AdmmEval(problem, counters)
    t0 = time.perf_counter()
    state = admm_init(problem, *init, beta, lam, ev=ev)
    trace = []
    status = "MaxIters"
    while True:
        if beta * state.res_norm <= epsilon:
            status = "Converged"
            break
        if state.k >= max_iters:
            break
        calls0 = counters.xstep
        prev = state
        ybar = prev.y - beta * (1 - lam) * prev.r
        x, y, z, r, L, _ = ev.oracle(ybar, prev.z, beta)
        state = AdmmState(prev.k + 1, x, y, z, r, L, beta, ybar, prev.z)
        trace.append(_rec(prev, 1.0, 0, counters, t0, L, False,
                          counters.xstep - calls0))
    trace.append(_rec(state, np.nan, 0, counters, t0))
    rep = AdmmSolveReport(status, state, trace, counters, cfg, "plain-admm")
    if rep.converged:
        rep.certificate = certificate_admm(state, cfg, problem)
    return rep


def certificate_admm(state: AdmmState, config: AdmmConfig, problem: AdmmProblem,
                     require_converged=True) -> AdmmCertificate:
    """Approximate KKT data for the final triple.

    ``x_stationarity = ||grad f(x) + A^T y||`` when ``f_grad`` and ``At``
    are available; it vanishes up to the accuracy of the x-step.
    """
    eps, beta = config.epsilon, state.beta
    rn = float(np.linalg.norm(problem.residual(state.x, state.z)))
    if require_converged and not beta * rn <= eps:
        raise CertificateUnavailable("run did not converge")
    xs = None
    if problem.f_grad is not None and problem.At is not None:
        xs = float(np.linalg.norm(problem.f_grad(state.x) + problem.At(state.y)))
    return AdmmCertificate(rn, eps / beta, xs, beta * problem.B_norm * rn,
                           state.x.copy(), state.y.copy(), state.z.copy())
