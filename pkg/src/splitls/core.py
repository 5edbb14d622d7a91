"""Problem abstraction, splitting oracles and merit functions.

A composite problem ``minimize phi1(s) + phi2(s)`` is described by two
:class:`ProxOracle` objects bundled in a :class:`SplitProblem`. The solvers
only ever touch the functions through ``value`` and ``prox``.

The Douglas-Rachford envelope (DRE) is the merit function of the linesearch
solvers. It is evaluated from the pair ``(u, v)`` returned by one
Douglas-Rachford step, so evaluating it costs nothing beyond the step itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import numpy as np

__all__ = [
    "SplitError", "NonFiniteMerit", "OracleError", "ConfigError",
    "UnboundedSubproblem",
    "ProxOracle", "Smooth", "StronglyConvex", "SplitProblem",
    "DrsTriple", "AdmmTriple",
    "drs_oracle", "dre_eval", "dre_eval_moreau", "moreau_envelope",
    "auglag_eval", "decrease_constant_C", "dual_decrease_constant",
    "max_stepsize_gamma", "min_penalty_beta", "self_dual_transform",
    "inverse_self_dual_transform", "zero_oracle",
]

INF = np.inf


class SplitError(Exception):
    """Base class for solver errors."""


class NonFiniteMerit(SplitError):
    """Merit function evaluated to NaN or +inf (broken prox oracle)."""


class OracleError(SplitError):
    """A prox or argmin oracle failed.

    ``stage`` names the failing sub-oracle (``"phi1"``, ``"phi2"``,
    ``"x-step"`` or ``"z-step"``).
    """

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} oracle failed: {cause}")
        self.stage = stage
        self.cause = cause


class ConfigError(SplitError, ValueError):
    """Invalid algorithm configuration."""


class UnboundedSubproblem(ConfigError):
    """A prox or argmin subproblem has no minimizer at the given stepsize.

    Happens for weakly convex terms when the stepsize exceeds the inverse
    curvature. The adaptive variants treat it as a failed decrease test.
    """


@dataclass(frozen=True)
class ProxOracle:
    """Value and proximal map of an extended-real-valued function.

    Parameters
    ----------
    value : callable
        ``value(x)`` returns ``h(x)``; ``np.inf`` outside the domain.
    prox : callable
        ``prox(x, gamma)`` returns one element of
        ``argmin_w h(w) + ||w - x||^2 / (2 gamma)``.
    is_generalized_quadratic : bool
        Quadratic plus indicator of an affine set, i.e. the prox is affine.
        Enables the two-evaluation linesearch cache. Declared by the
        problem builder, never inferred.
    grad : callable, optional
        Gradient, when ``h`` is smooth. Used for certificates and tests.
    name : str
    """

    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    is_generalized_quadratic: bool = False
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "h"
    affinity_witness: Any = None


def zero_oracle(name: str = "zero") -> ProxOracle:
    """The identically zero function; its prox is the identity."""
    return ProxOracle(
        value=lambda x: 0.0,
        prox=lambda x, gamma: np.array(x, dtype=float, copy=True),
        is_generalized_quadratic=True,
        grad=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        name=name,
    )


@dataclass(frozen=True)
class Smooth:
    """phi1 has ``L``-Lipschitz gradient (possibly nonconvex)."""

    L: float
    convex: bool = False

    pi = 1


@dataclass(frozen=True)
class StronglyConvex:
    """phi1 is ``mu``-strongly convex (possibly nonsmooth).

    For ADMM problems ``mu`` is the modulus of ``f`` and ``A_norm`` the
    spectral norm of ``A``; the equivalent DRS problem then has modulus
    ``mu / A_norm**2``.
    """

    mu: float
    A_norm: float = 1.0

    pi = -1

    @property
    def modulus(self) -> float:
        return self.mu / self.A_norm ** 2


Regime = Union[Smooth, StronglyConvex]


@dataclass(frozen=True)
class SplitProblem:
    """``minimize phi1(s) + phi2(s)`` over ``R^dim``."""

    phi1: ProxOracle
    phi2: ProxOracle
    regime: Regime
    dim: int
    meta: dict = field(default_factory=dict, compare=False)

    def phi(self, x: np.ndarray) -> float:
        return _ext_sum(self.phi1.value(x), self.phi2.value(x))


@dataclass
class DrsTriple:
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    dre: float

    @property
    def r(self) -> np.ndarray:
        return self.u - self.v


@dataclass
class AdmmTriple:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    r: np.ndarray
    auglag: float


def _ext_sum(*terms: float) -> float:
    total = 0.0
    for t in terms:
        t = float(t)
        if np.isnan(t):
            raise NonFiniteMerit("NaN encountered in function value")
        total += t
    return total


def _call(stage: str, fun, *args):
    try:
        out = fun(*args)
    except SplitError:
        raise
    except (np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        raise OracleError(stage, exc) from exc
    return out


def drs_oracle(problem: SplitProblem, s: np.ndarray, gamma: float):
    """One Douglas-Rachford step: ``u = prox_{gamma phi1}(s)``,
    ``v = prox_{gamma phi2}(2u - s)``."""
    if not gamma > 0:
        raise ConfigError(f"stepsize must be positive, got {gamma}")
    s = np.asarray(s, dtype=float)
    u = np.asarray(_call("phi1", problem.phi1.prox, s, gamma), dtype=float)
    v = np.asarray(_call("phi2", problem.phi2.prox, 2 * u - s, gamma), dtype=float)
    return u, v


def dre_from_values(f1u: float, f2v: float, s, u, v, gamma: float) -> float:
    """DRE given ``phi1(u)`` and ``phi2(v)``; shared by all evaluators."""
    if np.isinf(f2v):
        raise NonFiniteMerit("phi2(v) is infinite: phi2 prox left the domain")
    if np.isinf(f1u):
        raise NonFiniteMerit("phi1(u) is infinite: phi1 prox left the domain")
    d = v - u
    val = _ext_sum(f1u, f2v) + (np.dot(s - u, d) + 0.5 * np.dot(d, d)) / gamma
    if not np.isfinite(val):
        raise NonFiniteMerit(f"DRE evaluated to {val}")
    return float(val)


def dre_eval(problem: SplitProblem, s, u, v, gamma: float) -> float:
    """Douglas-Rachford envelope at ``s`` from the step outputs ``(u, v)``::

        phi1(u) + phi2(v) + <s - u, v - u>/gamma + ||v - u||^2/(2 gamma)
    """
    s, u, v = (np.asarray(a, dtype=float) for a in (s, u, v))
    return dre_from_values(problem.phi1.value(u), problem.phi2.value(v), s, u, v, gamma)


def moreau_envelope(oracle: ProxOracle, x, gamma: float, w=None) -> float:
    """``h^gamma(x)`` evaluated through the prox (or a given prox output)."""
    x = np.asarray(x, dtype=float)
    if w is None:
        w = oracle.prox(x, gamma)
    d = w - x
    return _ext_sum(oracle.value(w), np.dot(d, d) / (2 * gamma))


def dre_eval_moreau(problem: SplitProblem, s, gamma: float) -> float:
    """DRE through Moreau envelopes::

        phi1^gamma(s) - ||s - u||^2/gamma + phi2^gamma(2u - s)

    Independent of :func:`dre_eval`; used to cross-check it.
    """
    s = np.asarray(s, dtype=float)
    u = problem.phi1.prox(s, gamma)
    d = s - u
    val = (moreau_envelope(problem.phi1, s, gamma, u) - np.dot(d, d) / gamma
           + moreau_envelope(problem.phi2, 2 * u - s, gamma))
    if not np.isfinite(val):
        raise NonFiniteMerit(f"DRE evaluated to {val}")
    return float(val)


def auglag_eval(f_val: float, g_val: float, A_apply, B_apply, b, x, z, y,
                beta: float) -> float:
    """Augmented Lagrangian ``f + g + <y, Ax+Bz-b> + beta/2 ||Ax+Bz-b||^2``."""
    if not beta > 0:
        raise ConfigError(f"penalty must be positive, got {beta}")
    if np.isinf(g_val):
        raise NonFiniteMerit("g(z) is infinite: z outside dom g")
    r = A_apply(x) + B_apply(z) - b
    val = _ext_sum(f_val, g_val) + np.dot(y, r) + 0.5 * beta * np.dot(r, r)
    if not np.isfinite(val):
        raise NonFiniteMerit(f"augmented Lagrangian evaluated to {val}")
    return float(val)


def decrease_constant_C(alpha: float, lam: float, phi1_convex: bool) -> float:
    """Sufficient-decrease constant of the DRE for ``alpha = gamma*L``.

    May be nonpositive; callers must reject such values.
    """
    if alpha < 0:
        raise ConfigError("alpha must be nonnegative")
    if not 0 < lam < 2:
        raise ConfigError(f"relaxation must lie in (0, 2), got {lam}")
    m = max(alpha - lam / 2, 0.0) if phi1_convex else 1.0
    return lam / (1 + alpha) ** 2 * ((2 - lam) / 2 - alpha * m)


def dual_decrease_constant(gamma: float, mu: float, lam: float) -> float:
    """Sufficient-increase constant when phi1 is ``mu``-strongly convex.

    The dual smooth term is convex with Lipschitz modulus ``1/mu`` and the
    dual stepsize is ``1/gamma``, hence ``alpha = 1/(gamma mu)``.
    """
    if not gamma * mu > 1:
        raise ConfigError(f"need gamma*mu > 1, got {gamma * mu}")
    return decrease_constant_C(1.0 / (gamma * mu), lam, True)


def max_stepsize_gamma(L: float, lam: float, phi1_convex: bool) -> float:
    """Supremum of admissible DRS stepsizes for ``L``-smooth phi1."""
    if not L > 0:
        raise ConfigError("L must be positive")
    if not 0 < lam < 2:
        raise ConfigError(f"relaxation must lie in (0, 2), got {lam}")
    return 1.0 / L if phi1_convex else (2 - lam) / (2 * L)


def min_penalty_beta(L_Af: float, lam: float, f_convex: bool) -> float:
    """Infimum of admissible ADMM penalties; reciprocal of :func:`max_stepsize_gamma`."""
    return 1.0 / max_stepsize_gamma(L_Af, lam, f_convex)


def self_dual_transform(s, u, v, gamma: float):
    """Map a primal DRS triple to the dual one at stepsize ``1/gamma``."""
    s, u, v = (np.asarray(a, dtype=float) for a in (s, u, v))
    return -s / gamma, (u - s) / gamma, (2 * u - s - v) / gamma, 1.0 / gamma


def inverse_self_dual_transform(s_, u_, v_, gamma_: float):
    """Inverse of :func:`self_dual_transform` (the map is an involution
    up to the sign conventions)."""
    s_, u_, v_ = (np.asarray(a, dtype=float) for a in (s_, u_, v_))
    return -s_ / gamma_, (u_ - s_) / gamma_, (2 * u_ - s_ - v_) / gamma_, 1.0 / gamma_
