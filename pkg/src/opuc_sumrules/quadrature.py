"""Adaptive quadrature on arcs, with square-root endpoint regularization.

scipy's QUADPACK (21-point Gauss-Kronrod with extrapolation) does the
adaptive work.  Densities with square-root edges are first pulled back
through ``theta = c + h sin(t)``, which turns ``sqrt(theta - a)`` into a
smooth function of ``t``.
"""

from __future__ import annotations

import warnings
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .config import DEFAULT

__all__ = ["integrate_arc", "integrate_log_singular"]


def integrate_arc(
    func: Callable[[float], float],
    a: float,
    b: float,
    *,
    sqrt_edges: bool = False,
    points: Sequence[float] | None = None,
    tol: float | None = None,
    limit: int | None = None,
) -> float:
    """Integrate ``func`` over ``[a, b]``.

    Parameters
    ----------
    func
        Scalar integrand.
    a, b
        Interval endpoints, ``a <= b``.
    sqrt_edges
        Apply the sine substitution that removes square-root behaviour at
        both endpoints.
    points
        Interior break points (log singularities, kinks).
    tol
        Absolute and relative tolerance; defaults to the global setting.
    """
    tol = DEFAULT.quad.tol if tol is None else tol
    limit = DEFAULT.quad.limit if limit is None else limit
    if b <= a:
        return 0.0
    pts = [p for p in (points or ()) if a < p < b]
    if sqrt_edges:
        c, h = 0.5 * (a + b), 0.5 * (b - a)

        def g(t: float) -> float:
            return func(c + h * np.sin(t)) * h * np.cos(t)

        lo, hi = -0.5 * np.pi, 0.5 * np.pi
        pts = [float(np.arcsin(np.clip((p - c) / h, -1.0, 1.0))) for p in pts]
    else:
        g, lo, hi = func, a, b
    # split explicitly at break points so each panel sees the singularity at an end
    edges = [lo, *sorted(pts), hi]
    total = 0.0
    for x0, x1 in zip(edges[:-1], edges[1:]):
        if x1 <= x0:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(g, x0, x1, epsabs=tol, epsrel=tol, limit=limit)
        total += val
    return float(total)


def integrate_log_singular(
    func: Callable[[float], float],
    a: float,
    b: float,
    s: float,
    *,
    tol: float | None = None,
    limit: int | None = None,
) -> float:
    """``int_a^b func(x) log|x - s| dx`` with a logarithmic-weight rule at ``s``.

    Panels adjacent to ``s`` use QUADPACK's algebraic-logarithmic weights
    (``alg-loga`` / ``alg-logb``), so the singular factor is integrated
    exactly and ``func`` only needs to be smooth.
    """
    tol = DEFAULT.quad.tol if tol is None else tol
    limit = DEFAULT.quad.limit if limit is None else limit
    if b <= a:
        return 0.0
    opts = dict(epsabs=tol, epsrel=tol, limit=limit)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if s <= a or s >= b:
            val, _ = integrate.quad(lambda x: func(x) * np.log(abs(x - s)), a, b, **opts)
            return float(val)
        left, _ = integrate.quad(func, a, s, weight="alg-logb", wvar=(0.0, 0.0), **opts)
        right, _ = integrate.quad(func, s, b, weight="alg-loga", wvar=(0.0, 0.0), **opts)
    return float(left + right)
