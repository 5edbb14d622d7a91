"""Update directions for the linesearch solvers.

Every engine maps the current fixed-point residual ``r`` to a direction
``d``. Quasi-Newton engines approximate the inverse Jacobian of the residual
map and learn from secant pairs ``(p, q)`` where ``p`` is the direction taken
and ``q = r0_next - r`` uses the residual of the *first* linesearch trial.

The solver protocol is::

    d = engine.direction(r, nominal, lam)
    ...first trial...
    engine.feed(d, r0_next - r)

``nominal`` is the nominal (plain splitting) next point, needed only by the
Nesterov engine.
"""

from __future__ import annotations

import re
from collections import deque

import numpy as np
from scipy import linalg

from .core import ConfigError, SplitError

__all__ = [
    "DegeneratePair", "DirectionEngine", "NominalEngine", "NesterovEngine",
    "LBFGSEngine", "BroydenEngine", "AndersonEngine", "make_engine",
    "nominal_direction", "nesterov_direction_drs", "nesterov_direction_admm",
    "lbfgs_apply", "broyden_theta", "broyden_update", "anderson_apply",
]

CURVATURE_TOL = 1e-12


class DegeneratePair(SplitError):
    """Secant pair with ``p = 0``; the update is skipped."""


def nominal_direction(r, lam):
    return -lam * np.asarray(r, dtype=float)


def nesterov_direction_drs(k, sbar_next, sbar_prev, r, lam):
    """Extrapolated direction ``(k-1)/(k+2) (sbar_next - sbar_prev) - lam r``.

    ``sbar_prev`` is ignored when ``k == 0``.
    """
    d = -lam * np.asarray(r, dtype=float)
    if k >= 1:
        d = d + (k - 1) / (k + 2) * (np.asarray(sbar_next) - np.asarray(sbar_prev))
    return d


def nesterov_direction_admm(k, Bz_k, Bz_prev, ybar_half_k, ybar_half_prev, r,
                            lam, beta):
    """ADMM form of :func:`nesterov_direction_drs`, written in terms of
    ``Bz`` and the nominal half-step multipliers."""
    d = -lam * np.asarray(r, dtype=float)
    if k >= 1:
        d = d - (k - 1) / (k + 2) * (
            np.asarray(Bz_k) - np.asarray(Bz_prev)
            + (np.asarray(ybar_half_k) - np.asarray(ybar_half_prev)) / beta)
    return d


def lbfgs_apply(pairs, r, h0=1.0):
    """Return ``-H r`` via the two-loop recursion.

    Parameters
    ----------
    pairs : sequence of (p, q, rho)
        Oldest first, with ``rho = 1/<p, q>``.
    r : ndarray
    h0 : float
        Initial scaling used when ``pairs`` is empty. Otherwise the scaling
        ``<p, q>/<q, q>`` of the newest pair is used.
    """
    g = np.array(r, dtype=float, copy=True)
    alphas = []
    for p, q, rho in reversed(pairs):
        a = rho * np.dot(p, g)
        g -= a * q
        alphas.append(a)
    if pairs:
        p, q, rho = pairs[-1]
        g *= 1.0 / (rho * np.dot(q, q))
    else:
        g *= h0
    for (p, q, rho), a in zip(pairs, reversed(alphas)):
        bcoef = rho * np.dot(q, g)
        g += (a - bcoef) * p
    return -g


def broyden_theta(delta, theta_bar):
    """Powell damping factor; ``sign(0)`` is taken as 1."""
    if abs(delta) >= theta_bar:
        return 1.0
    sgn = 1.0 if delta >= 0 else -1.0
    return (1 - sgn * theta_bar) / (1 - delta)


def broyden_update(H, p, q, theta_bar=0.2):
    """Modified (Powell-damped) inverse Broyden update of ``H``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pp = np.dot(p, p)
    if pp == 0.0:
        raise DegeneratePair("p = 0")
    Hq = H @ q
    delta = np.dot(Hq, p) / pp
    theta = broyden_theta(delta, theta_bar)
    denom = np.dot(p, (1 / theta - 1) * p + Hq)
    if denom == 0.0 or not np.isfinite(denom):
        raise DegeneratePair("vanishing denominator")
    return H + np.outer((p - Hq) / denom, p @ H)


def anderson_apply(P, Q, r, h0=1.0, rcond=1e-10):
    """Return ``-H r`` for the multisecant matrix closest to ``h0 I``.

    ``P`` and ``Q`` hold the pairs column-wise; an empty history gives
    ``-h0 r``. Rank deficiency in ``Q`` is handled by least squares with
    singular values below ``rcond * sigma_max`` dropped.
    """
    r = np.asarray(r, dtype=float)
    if P is None or P.shape[1] == 0:
        return -h0 * r
    coef = linalg.lstsq(Q, r, cond=rcond)[0]
    return -h0 * r - (P - h0 * Q) @ coef


class DirectionEngine:
    """Base engine; subclasses override :meth:`direction` and :meth:`feed`."""

    name = "engine"
    uses_pairs = False

    def reset(self):
        pass

    def direction(self, r, nominal, lam):
        raise NotImplementedError

    def feed(self, p, q):
        pass

    def __repr__(self):
        return f"{type(self).__name__}()"


class NominalEngine(DirectionEngine):
    """``d = -lam r``: the candidate coincides with the nominal step."""

    name = "nominal"

    def direction(self, r, nominal, lam):
        return nominal_direction(r, lam)


class NesterovEngine(DirectionEngine):
    """Extrapolation between consecutive nominal points, never restarted."""

    name = "nesterov"

    def __init__(self):
        self.reset()

    def reset(self):
        self.k = 0
        self._prev = None

    def direction(self, r, nominal, lam):
        nominal = np.array(nominal, dtype=float, copy=True)
        d = nesterov_direction_drs(self.k, nominal, self._prev, r, lam)
        self._prev = nominal
        self.k += 1
        return d


class LBFGSEngine(DirectionEngine):
    """Limited-memory BFGS on the residual map.

    Pairs with ``<p, q> <= 1e-12 ||p|| ||q||`` are skipped.
    """

    name = "lbfgs"
    uses_pairs = True

    def __init__(self, memory=5, h0=1.0):
        if memory < 1:
            raise ConfigError("L-BFGS memory must be at least 1")
        self.memory = int(memory)
        self.h0 = float(h0)
        self.reset()

    def reset(self):
        self.pairs = deque(maxlen=self.memory)
        self.skipped = 0

    def direction(self, r, nominal, lam):
        return lbfgs_apply(list(self.pairs), r, self.h0)

    def feed(self, p, q):
        p = np.array(p, dtype=float, copy=True)
        q = np.array(q, dtype=float, copy=True)
        pq = np.dot(p, q)
        qq = np.dot(q, q)
        # also skip pairs whose inner products underflow (rho or scaling not finite)
        with np.errstate(divide="ignore", over="ignore"):
            ok = (pq > CURVATURE_TOL * np.linalg.norm(p) * np.linalg.norm(q)
                  and np.isfinite(1.0 / pq) and np.isfinite(pq / qq))
        if not ok:
            self.skipped += 1
            return
        self.pairs.append((p, q, 1.0 / pq))

    def __repr__(self):
        return f"LBFGSEngine(memory={self.memory})"


class BroydenEngine(DirectionEngine):
    """Modified Broyden with a dense inverse-Jacobian estimate (O(p^2) memory)."""

    name = "broyden"
    uses_pairs = True

    def __init__(self, theta_bar=0.2, h0=1.0):
        if not 0 < theta_bar < 1:
            raise ConfigError("theta_bar must lie in (0, 1)")
        self.theta_bar = float(theta_bar)
        self.h0 = float(h0)
        self.reset()

    def reset(self):
        self.H = None
        self.skipped = 0

    def direction(self, r, nominal, lam):
        r = np.asarray(r, dtype=float)
        if self.H is None:
            self.H = self.h0 * np.eye(r.size)
        return -(self.H @ r)

    def feed(self, p, q):
        if self.H is None:
            self.H = self.h0 * np.eye(np.size(p))
        try:
            self.H = broyden_update(self.H, p, q, self.theta_bar)
        except DegeneratePair:
            self.skipped += 1

    def __repr__(self):
        return f"BroydenEngine(theta_bar={self.theta_bar})"


class AndersonEngine(DirectionEngine):
    """Anderson acceleration as an inverse multisecant update.

    History is kept across fallback-to-nominal iterations.
    """

    name = "anderson"
    uses_pairs = True

    def __init__(self, memory=5, h0=1.0):
        if memory < 1:
            raise ConfigError("Anderson memory must be at least 1")
        self.memory = int(memory)
        self.h0 = float(h0)
        self.reset()

    def reset(self):
        self.P = deque(maxlen=self.memory)
        self.Q = deque(maxlen=self.memory)

    def direction(self, r, nominal, lam):
        if not self.P:
            return anderson_apply(None, None, r, self.h0)
        return anderson_apply(np.column_stack(self.P), np.column_stack(self.Q),
                              r, self.h0)

    def feed(self, p, q):
        self.P.append(np.array(p, dtype=float, copy=True))
        self.Q.append(np.array(q, dtype=float, copy=True))

    def __repr__(self):
        return f"AndersonEngine(memory={self.memory})"


_ENGINE_RE = re.compile(r"^\s*([a-z_-]+)\s*(?:\(\s*([0-9.eE+-]*)\s*\))?\s*$")


def make_engine(spec, h0=1.0) -> DirectionEngine:
    """Build an engine from a string such as ``"lbfgs(5)"`` or ``"broyden"``.

    >>> make_engine("anderson(3)").memory
    3
    """
    if isinstance(spec, DirectionEngine):
        return spec
    m = _ENGINE_RE.match(str(spec).lower())
    if not m:
        raise ConfigError(f"cannot parse engine {spec!r}")
    name, arg = m.group(1), m.group(2) or None
    try:
        if name == "nominal":
            return NominalEngine()
        if name == "nesterov":
            return NesterovEngine()
        if name in ("lbfgs", "l-bfgs"):
            return LBFGSEngine(int(arg) if arg else 5, h0=h0)
        if name == "broyden":
            return BroydenEngine(float(arg) if arg else 0.2, h0=h0)
        if name == "anderson":
            return AndersonEngine(int(arg) if arg else 5, h0=h0)
    except ValueError as exc:
        raise ConfigError(f"bad engine argument in {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown engine {name!r}")
