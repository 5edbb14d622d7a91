"""Linesearch Douglas-Rachford splitting.

Each iteration computes the nominal DRS point ``sbar = s - lam r`` and a
candidate ``s + d`` from a direction engine, then searches the segment
between them for a point where the (signed) DRE decreases sufficiently.
The search starts at ``s + d`` and halves ``tau``; after ``i_max`` failures
the nominal point is taken without further testing.

The sign ``pi`` is +1 when phi1 is smooth (the DRE decreases) and -1 when
phi1 is strongly convex (the DRE increases).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .core import (ConfigError, SplitError, Smooth,
                   UnboundedSubproblem,
                   SplitProblem, decrease_constant_C, dre_from_values,
                   dual_decrease_constant, max_stepsize_gamma,
                   _call)
from .directions import DirectionEngine, NominalEngine, make_engine
from .quadcache import blend_prox, build_cache, quad_line_value

__all__ = [
    "DrsConfig", "DrsState", "DrsSolveReport", "IterRecord", "Counters",
    "BacktrackOverflow", "StepsizeOutOfRange", "CertificateUnavailable",
    "DrsCertificate", "drs_solve", "drs_ls_solve", "drs_ls_iterate",
    "drs_init", "adaptive_gamma_guard", "certificate_drs",
    "superlinear_diagnostics", "default_decrease_constant",
]

GAMMA_RANGE = (1e-12, 1e12)


class BacktrackOverflow(SplitError):
    """``tau`` underflowed with ``i_max = inf``: the constants are wrong."""


class StepsizeOutOfRange(SplitError):
    """The adaptive stepsize (or penalty) left ``[1e-12, 1e12]``."""


class CertificateUnavailable(SplitError):
    """Certificates are only issued for converged runs."""


@dataclass
class Counters:
    prox1: int = 0
    prox2: int = 0
    value1: int = 0
    value2: int = 0

    def snapshot(self):
        return replace(self)


@dataclass
class DrsConfig:
    """Parameters of the linesearch DRS.

    ``gamma`` and ``c`` default to ``gamma_fraction`` of the admissible
    stepsize bound and ``c_fraction`` of the decrease constant; see
    :meth:`resolve`. ``pi`` is set from the problem regime.
    """

    lam: float = 1.0
    gamma: Optional[float] = None
    c: Optional[float] = None
    epsilon: float = 1e-6
    i_max: float = 10
    max_iters: int = 1000
    adaptive: bool = False
    phi_lb: Optional[float] = None
    quadcache: bool = True
    store_iterates: bool = False
    gamma_fraction: float = 0.95
    c_fraction: float = 0.5
    merit_slack: float = 1e-12
    pi: Optional[int] = None

    def resolve(self, problem: SplitProblem) -> "DrsConfig":
        """Fill in defaults from the problem regime and validate."""
        reg = problem.regime
        if not 0 < self.lam < 2:
            raise ConfigError(f"relaxation must lie in (0, 2), got {self.lam}")
        gamma = self.gamma
        if gamma is None:
            gamma = default_stepsize(reg, self.lam, self.gamma_fraction)
        c = self.c
        if c is None:
            if self.adaptive:
                c = default_decrease_constant(reg, self.lam, self.gamma_fraction,
                                              self.c_fraction)
            else:
                c = self.c_fraction * admissible_C(reg, gamma, self.lam)
        out = replace(self, gamma=float(gamma), c=float(c), pi=reg.pi)
        out.validate(problem)
        return out

    def validate(self, problem: SplitProblem):
        reg = problem.regime
        if not (self.gamma and self.gamma > 0):
            raise ConfigError("stepsize must be positive")
        if self.epsilon < 0:
            raise ConfigError("tolerance must be nonnegative")
        if self.i_max < 0:
            raise ConfigError("i_max must be nonnegative")
        if not self.c > 0:
            raise ConfigError(f"decrease constant must be positive, got {self.c}")
        if self.adaptive:
            return
        Cbar = admissible_C(reg, self.gamma, self.lam)
        if not self.c < Cbar:
            raise ConfigError(f"need 0 < c < {Cbar:.6g}, got c = {self.c:.6g}")


def default_stepsize(regime, lam, fraction=0.95):
    if isinstance(regime, Smooth):
        return fraction * max_stepsize_gamma(regime.L, lam, regime.convex)
    return 1.0 / (fraction * regime.modulus)


def admissible_C(regime, gamma, lam):
    """Decrease constant at ``gamma``; raises if ``gamma`` is out of range."""
    if isinstance(regime, Smooth):
        gmax = max_stepsize_gamma(regime.L, lam, regime.convex)
        if not gamma < gmax:
            raise ConfigError(f"stepsize {gamma:.6g} must be below {gmax:.6g}")
        return decrease_constant_C(gamma * regime.L, lam, regime.convex)
    mu = regime.modulus
    if not gamma * mu > 1:
        raise ConfigError(f"stepsize {gamma:.6g} must exceed 1/mu = {1 / mu:.6g}")
    return dual_decrease_constant(gamma, mu, lam)


def default_decrease_constant(regime, lam, gamma_fraction=0.95, c_fraction=0.5):
    """A constant valid for every stepsize at least as safe as the default.

    Used by the adaptive variants, where the stepsize is not known in
    advance. The decrease constant is monotone in ``gamma * L`` (resp.
    ``1/(gamma mu)``), so the value at the default fraction of the bound
    remains admissible once the guard has moved the stepsize past it.
    """
    if isinstance(regime, Smooth):
        amax = 1.0 if regime.convex else (2 - lam) / 2
        return c_fraction * decrease_constant_C(gamma_fraction * amax, lam,
                                                regime.convex)
    return c_fraction * decrease_constant_C(gamma_fraction, lam, True)


@dataclass
class DrsState:
    k: int
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    dre: float
    gamma: float

    @property
    def r(self):
        return self.u - self.v

    @property
    def res_norm(self):
        return float(np.linalg.norm(self.u - self.v))


@dataclass
class IterRecord:
    """One row of a solve trace.

    ``merit`` is the merit at ``s^k`` and ``next_merit`` the merit at the
    accepted ``s^{k+1}``, both at stepsize ``gamma``. Counters are
    cumulative up to the end of the step. The terminal row has
    ``tau = nan``.
    """

    k: int
    res_norm: float
    merit: float
    tau: float
    backtracks: int
    gamma: float
    oracle_calls: int
    prox2_calls: int
    time_s: float
    next_merit: float = np.nan
    fallback: bool = False
    calls_this_step: int = 0


@dataclass
class StepInfo:
    tau: float
    backtracks: int
    fallback: bool
    d: Optional[np.ndarray]
    next_merit: float
    adjustments: int = 0


@dataclass
class DrsCertificate:
    """Termination certificate.

    Smooth regime: ``z = v`` with ``stationarity_bound >= dist(0, dphi(z))``
    and, when phi1 has a gradient, an explicit subgradient ``element``.
    Strongly convex regime: the triple ``(x, y, z)`` and its residuals.
    """

    regime: str
    z: np.ndarray
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    primal_gap: float = 0.0
    stationarity_bound: float = 0.0
    element: Optional[np.ndarray] = None
    epsilon: float = 0.0
    gamma: float = 0.0


@dataclass
class DrsSolveReport:
    status: str
    state: DrsState
    trace: List[IterRecord]
    counters: Counters
    config: DrsConfig
    engine: str
    adjustments: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    directions: list = field(default_factory=list)
    certificate: Optional[DrsCertificate] = None

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
            "merit": s.dre,
            "gamma": s.gamma,
            "prox1_calls": self.counters.prox1,
            "prox2_calls": self.counters.prox2,
            "value1_calls": self.counters.value1,
            "adjustments": len(self.adjustments),
            "engine": self.engine,
        }


class _Evaluator:
    """Counted access to the problem oracles."""

    def __init__(self, problem: SplitProblem, counters: Counters):
        self.problem = problem
        self.n = counters

    def prox1(self, s, gamma):
        self.n.prox1 += 1
        return np.asarray(_call("phi1", self.problem.phi1.prox, s, gamma), dtype=float)

    def prox2(self, x, gamma):
        self.n.prox2 += 1
        return np.asarray(_call("phi2", self.problem.phi2.prox, x, gamma), dtype=float)

    def value1(self, u):
        self.n.value1 += 1
        return self.problem.phi1.value(u)

    def value2(self, v):
        self.n.value2 += 1
        return self.problem.phi2.value(v)

    def from_u(self, s, u, f1u, gamma):
        """``(v, dre)`` given ``u`` and ``phi1(u)``."""
        v = self.prox2(2 * u - s, gamma)
        return v, dre_from_values(f1u, self.value2(v), s, u, v, gamma)

    def full_state(self, s, gamma):
        u = self.prox1(s, gamma)
        v, dre = self.from_u(s, u, self.value1(u), gamma)
        return u, v, dre


def drs_init(problem, s0, gamma, counters=None):
    """Initial state: one DRS step and the DRE at ``s0``."""
    ev = _Evaluator(problem, counters or Counters())
    s0 = np.array(s0, dtype=float, copy=True)
    u, v, dre = ev.full_state(s0, gamma)
    return DrsState(0, s0, u, v, dre, float(gamma))


def _decrease_ok(pi, new, old, c, gamma, rr, slack=0.0):
    # slack absorbs rounding once the required decrease drops below it
    return pi * new <= pi * old - c / gamma * rr + slack * max(1.0, abs(old))


def adaptive_gamma_guard(state: DrsState, problem, config: DrsConfig, ev,
                         nominal=None):
    """Check the nominal step at the current stepsize.

    Returns ``(adjusted, state, nominal)``. When the nominal DRE fails the
    sufficient-decrease test (or undershoots ``phi_lb``) the stepsize is
    scaled by ``2**(-pi)``, the step at ``s^k`` recomputed and
    ``adjusted`` is True. Otherwise ``nominal = (sbar, ubar, vbar, dre_bar,
    phi1(ubar))`` is returned for reuse by the linesearch.
    """
    pi, lam, c = config.pi, config.lam, config.c
    gamma = state.gamma
    r = state.r
    sbar = state.s - lam * r
    try:
        if nominal is None:
            ubar = ev.prox1(sbar, gamma)
            f1bar = ev.value1(ubar)
            vbar, dbar = ev.from_u(sbar, ubar, f1bar, gamma)
            nominal = (sbar, ubar, vbar, dbar, f1bar)
        dbar = nominal[3]
        rr = float(np.dot(r, r))
        ok = (_decrease_ok(pi, dbar, state.dre, c, gamma, rr, config.merit_slack)
              and not (config.phi_lb is not None and pi * dbar < pi * config.phi_lb))
    except UnboundedSubproblem:
        ok = False
    if ok:
        return False, state, nominal
    gamma, (u, v, dre) = _rescaled_state(state.s, gamma, pi, ev)
    return True, DrsState(state.k, state.s, u, v, dre, gamma), None


def _scale_step(gamma, pi):
    gamma = gamma * 2.0 ** (-pi)
    if not GAMMA_RANGE[0] <= gamma <= GAMMA_RANGE[1]:
        raise StepsizeOutOfRange(
            f"adaptive stepsize {gamma:.3g} left {GAMMA_RANGE}; "
            "check the declared regime")
    return gamma


def _rescaled_state(s, gamma, pi, ev):
    """Scale ``gamma`` until the oracle at ``s`` is well posed."""
    while True:
        gamma = _scale_step(gamma, pi)
        try:
            return gamma, ev.full_state(s, gamma)
        except UnboundedSubproblem:
            continue


def drs_ls_iterate(state: DrsState, problem: SplitProblem, config: DrsConfig,
                   engine: DirectionEngine, ev: _Evaluator, nominal=None):
    """One linesearch step from ``state``; returns ``(next_state, StepInfo)``.

    ``config`` must be resolved. ``nominal`` optionally carries the nominal
    point data already computed by the adaptive guard.
    """
    pi, lam, c, gamma = config.pi, config.lam, config.c, state.gamma
    s, r = state.s, state.r
    rr = float(np.dot(r, r))
    sbar = s - lam * r
    d = np.asarray(engine.direction(r, sbar, lam), dtype=float)
    if not np.all(np.isfinite(d)):
        d = -lam * r
    sd = s + d
    quad = config.quadcache and problem.phi1.is_generalized_quadratic

    # first trial at tau = 1
    u0 = None
    if nominal is not None and np.array_equal(sd, sbar):
        u0, f10 = nominal[1], nominal[4]
        v0, dre0 = nominal[2], nominal[3]
    else:
        u0 = ev.prox1(sd, gamma)
        f10 = ev.value1(u0)
        v0, dre0 = ev.from_u(sd, u0, f10, gamma)
    if engine.uses_pairs:
        engine.feed(d, (u0 - v0) - r)

    tau, i = 1.0, 0
    s_new, u_new, v_new, dre_new = sd, u0, v0, dre0
    cache = None
    while not _decrease_ok(pi, dre_new, state.dre, c, gamma, rr, config.merit_slack):
        if i >= config.i_max:
            if nominal is None:
                ubar = ev.prox1(sbar, gamma) if cache is None else cache.u_bar
                f1bar = ev.value1(ubar) if cache is None else cache.a
                vbar, dbar = ev.from_u(sbar, ubar, f1bar, gamma)
                nominal = (sbar, ubar, vbar, dbar, f1bar)
            nxt = DrsState(state.k + 1, sbar, nominal[1], nominal[2], nominal[3], gamma)
            return nxt, StepInfo(0.0, i, True, d, nominal[3])
        tau *= 0.5
        i += 1
        if tau == 0.0:
            raise BacktrackOverflow(
                "stepsize tau underflowed; c or gamma violate their bounds")
        s_new = (1 - tau) * sbar + tau * sd
        if quad:
            if cache is None:
                if nominal is not None:
                    ubar, f1bar = nominal[1], nominal[4]
                else:
                    ubar = ev.prox1(sbar, gamma)
                    f1bar = ev.value1(ubar)
                cache = build_cache(ubar, u0, sbar, f1bar, f10, gamma)
            u_new = blend_prox(cache.u_bar, cache.u_0, tau)
            f1 = quad_line_value(cache, tau)
        else:
            u_new = ev.prox1(s_new, gamma)
            f1 = ev.value1(u_new)
        v_new, dre_new = ev.from_u(s_new, u_new, f1, gamma)
    nxt = DrsState(state.k + 1, s_new, u_new, v_new, dre_new, gamma)
    return nxt, StepInfo(tau, i, False, d, dre_new)


def _record(state, tau, i, counters, t0, next_merit=np.nan, fallback=False,
            calls=0):
    return IterRecord(state.k, state.res_norm, state.dre, tau, i, state.gamma,
                      counters.prox1, counters.prox2, time.perf_counter() - t0,
                      next_merit, fallback, calls)


def _converged(state, eps):
    return state.res_norm / state.gamma <= eps


def drs_ls_solve(problem: SplitProblem, s0, config: DrsConfig = None,
                 engine=None) -> DrsSolveReport:
    """Run the linesearch DRS from ``s0``.

    Parameters
    ----------
    problem : SplitProblem
    s0 : array_like
    config : DrsConfig, optional
        Resolved against ``problem`` before use.
    engine : DirectionEngine or str, optional
        Defaults to the nominal engine (plain DRS behaviour).

    Returns
    -------
    DrsSolveReport
    """
    config = (config or DrsConfig()).resolve(problem)
    engine = make_engine(engine if engine is not None else NominalEngine())
    engine.reset()
    counters = Counters()
    ev = _Evaluator(problem, counters)
    t0 = time.perf_counter()
    trace, adjustments, iterates, dirs = [], [], [], []
    try:
        state = drs_init(problem, s0, config.gamma, counters)
    except UnboundedSubproblem:
        if not config.adaptive:
            raise
        gamma, (u, v, dre) = _rescaled_state(s0, config.gamma, config.pi, ev)
        s0 = np.array(s0, dtype=float, copy=True)
        state = DrsState(0, s0, u, v, dre, gamma)
        adjustments.append((0, gamma))
    status = "MaxIters"
    while True:
        if _converged(state, config.epsilon):
            status = "Converged"
            break
        if state.k >= config.max_iters:
            break
        calls0 = counters.prox1
        nominal = None
        if config.adaptive:
            adjusted, state, nominal = adaptive_gamma_guard(state, problem, config, ev)
            if adjusted:
                adjustments.append((state.k, state.gamma))
                continue
        prev = state
        state, info = drs_ls_iterate(prev, problem, config, engine, ev, nominal)
        trace.append(_record(prev, info.tau, info.backtracks, counters, t0,
                             info.next_merit, info.fallback,
                             counters.prox1 - calls0))
        if config.store_iterates:
            iterates.append(prev.s.copy())
            dirs.append(info.d)
    trace.append(_record(state, np.nan, 0, counters, t0))
    if config.store_iterates:
        iterates.append(state.s.copy())
    rep = DrsSolveReport(status, state, trace, counters, config,
                         repr(engine), adjustments, iterates, dirs)
    if rep.converged:
        rep.certificate = certificate_drs(state, config, problem)
    return rep


def drs_solve(problem: SplitProblem, s0, gamma=None, lam=1.0, epsilon=1e-6,
              max_iters=1000, store_iterates=False) -> DrsSolveReport:
    """Plain (relaxed) Douglas-Rachford splitting with the same trace format.

    No constants are checked, since plain DRS is run at arbitrary
    stepsizes in comparisons.
    """
    if gamma is None:
        gamma = default_stepsize(problem.regime, lam)
    cfg = DrsConfig(lam=lam, gamma=gamma, c=np.nan, epsilon=epsilon,
                    max_iters=max_iters, pi=problem.regime.pi,
                    store_iterates=store_iterates)
    counters = Counters()
    ev = _Evaluator(problem, counters)
    t0 = time.perf_counter()
    state = drs_init(problem, s0, gamma, counters)
    trace, iterates = [], []
    status = "MaxIters"
    while True:
        if _converged(state, epsilon):
            status = "Converged"
            break
        if state.k >= max_iters:
            break
        calls0 = counters.prox1
        prev = state
        s = prev.s - lam * prev.r
        u, v, dre = ev.full_state(s, gamma)
        state = DrsState(prev.k + 1, s, u, v, dre, gamma)
        trace.append(_record(prev, 1.0, 0, counters, t0, dre, False,
                             counters.prox1 - calls0))
        if store_iterates:
            iterates.append(prev.s.copy())
    trace.append(_record(state, np.nan, 0, counters, t0))
    if store_iterates:
        iterates.append(state.s.copy())
    rep = DrsSolveReport(status, state, trace, counters, cfg, "plain-drs",
                         iterates=iterates)
    if rep.converged:
        rep.certificate = certificate_drs(state, cfg, problem)
    return rep


def certificate_drs(state: DrsState, config: DrsConfig, problem: SplitProblem,
                    require_converged=True) -> DrsCertificate:
    """Approximate-stationarity certificate from the final triple."""
    gamma = state.gamma
    eps = config.epsilon
    if require_converged and not state.res_norm / gamma <= eps:
        raise CertificateUnavailable("run did not converge")
    s, u, v = state.s, state.u, state.v
    rn = state.res_norm
    reg = problem.regime
    if isinstance(reg, Smooth):
        elem = None
        grad = problem.phi1.grad
        if grad is not None:
            # grad phi1(v) plus the phi2 subgradient produced by the step
            elem = grad(v) + (2 * u - s - v) / gamma
        return DrsCertificate("smooth", z=v.copy(), primal_gap=rn,
                              stationarity_bound=(reg.L + 1 / gamma) * rn,
                              element=elem, epsilon=eps, gamma=gamma)
    return DrsCertificate("strongly_convex", z=v.copy(), x=u.copy(),
                          y=(u - s) / gamma, primal_gap=rn,
                          stationarity_bound=rn / gamma, epsilon=eps,
                          gamma=gamma)


@dataclass
class SuperlinearDiagnostics:
    direction_ratios: np.ndarray
    unit_step_fraction: float
    rate_ratios: np.ndarray


def superlinear_diagnostics(report: DrsSolveReport, s_star=None, tail=None):
    """Quality of the directions relative to a limit point.

    ``direction_ratios[k] = ||s^k + d^k - s*|| / ||s^k - s*||`` and
    ``rate_ratios[k] = ||s^{k+1} - s*|| / ||s^k - s*||``. Needs a report
    produced with ``store_iterates=True``. ``tail`` restricts the unit-step
    fraction to the last ``tail`` steps.
    """
    its = report.iterates
    if len(its) < 2:
        return SuperlinearDiagnostics(np.empty(0), np.nan, np.empty(0))
    s_star = its[-1] if s_star is None else np.asarray(s_star)
    dist = np.array([np.linalg.norm(s - s_star) for s in its])
    steps = len(its) - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = dist[1:] / dist[:-1]
        dr = np.full(steps, np.nan)
        for k in range(min(steps, len(report.directions))):
            d = report.directions[k]
            if d is not None:
                dr[k] = np.linalg.norm(its[k] + d - s_star) / dist[k]
    taus = np.array([rec.tau for rec in report.trace[:steps]])
    if tail is not None:
        taus = taus[-tail:]
    return SuperlinearDiagnostics(dr, float(np.mean(taus == 1.0)), rates)
