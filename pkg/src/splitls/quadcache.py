"""Linesearch shortcuts for generalized-quadratic phi1.

When phi1 is a quadratic plus the indicator of an affine set its prox is
affine, so the prox at any point of the segment between the nominal point
and ``s + d`` is the same blend of the two endpoint proxes. Along that
segment phi1 is a scalar quadratic in ``tau`` whose three coefficients follow
from two function values and one inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LinesearchCache", "blend_prox", "quad_line_value",
           "build_cache", "affinity_validate", "AffinityReport"]


def blend_prox(u_bar, u_0, tau):
    """``(1 - tau) u_bar + tau u_0``."""
    return (1 - tau) * u_bar + tau * u_0


@dataclass
class LinesearchCache:
    """Endpoint proxes and coefficients of ``phi1`` along the segment.

    ``ell(tau) = a + b tau + c tau^2`` equals ``phi1((1-tau) u_bar + tau u_0)``.
    """

    u_bar: np.ndarray
    u_0: np.ndarray
    a: float
    b: float
    c: float


def build_cache(u_bar, u_0, s_bar, f_bar, f_0, step):
    """Coefficients from ``f_bar = phi1(u_bar)`` and ``f_0 = phi1(u_0)``.

    The slope at ``tau = 0`` uses ``(s_bar - u_bar)/step``, which is a
    (sub)gradient of phi1 at ``u_bar`` restricted to the affine set.
    """
    a = float(f_bar)
    b = float(np.dot(s_bar - u_bar, u_0 - u_bar)) / step
    return LinesearchCache(u_bar, u_0, a, b, float(f_0) - a - b)


def quad_line_value(cache: LinesearchCache, tau: float) -> float:
    return cache.a + tau * (cache.b + tau * cache.c)


@dataclass
class AffinityReport:
    passed: bool
    worst: float

    def __bool__(self):
        return self.passed


def affinity_validate(oracle, gamma, trials=100, dim=None, rng=None,
                      scale=10.0, tol=1e-8) -> AffinityReport:
    """Check ``prox(t a + (1-t) b) = t prox(a) + (1-t) prox(b)`` on random data.

    The violation is measured relative to ``1 + max(|prox(a)|, |prox(b)|)``.
    """
    rng = np.random.default_rng(rng)
    if dim is None:
        dim = getattr(oracle, "dim", None) or 1
    worst = 0.0
    for _ in range(trials):
        a = scale * rng.standard_normal(dim)
        b = scale * rng.standard_normal(dim)
        t = rng.uniform()
        pa, pb = oracle.prox(a, gamma), oracle.prox(b, gamma)
        pm = oracle.prox(t * a + (1 - t) * b, gamma)
        ref = 1.0 + max(np.max(np.abs(pa)), np.max(np.abs(pb)))
        worst = max(worst, float(np.max(np.abs(pm - (t * pa + (1 - t) * pb)))) / ref)
    return AffinityReport(bool(worst <= tol), float(worst))
