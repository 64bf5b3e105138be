"""Adaptive integration on the line and half-line for confined Gibbs weights.

The integrands this library produces are (polynomial) x exp(-W(x)/lam) with W
growing at least quartically, so they decay faster than any polynomial.  That
makes a two-stage scheme reliable:

1. detect a truncation radius R beyond which the integrand is negligible,
   scanning |f(+-R)| geometrically outward from R = 1;
2. integrate over the window with composite fixed-order Gauss-Legendre panels,
   doubling the panel count until two successive levels agree to tolerance
   (the level difference is the error estimate).

Gauss-Legendre is used rather than Gauss-Hermite because the tails here are
exp(-x^4)-like, not Gaussian, and Hermite weights would misrepresent them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonConvergence, NonFinite

# Order of the per-panel Gauss-Legendre rule and panel count of the first level.
_GL_ORDER = 15
_BASE_PANELS = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)

# Geometric scan parameters of the truncation-radius search.
_SCAN_GROWTH = 2.0
_SCAN_MAX_RADIUS = 2.0 ** 40


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and budget of one adaptive integration.

    truncation_safety multiplies the detected decay radius so that the panels
    comfortably cover the region where the integrand is still meaningful.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_refinements: int = 20
    truncation_safety: float = 1.5

    def __post_init__(self):
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be at least 1")
        if self.truncation_safety < 1.0:
            raise ValueError("truncation_safety must be at least 1")


DEFAULT_SPEC = QuadratureSpec()


def _eval(f: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate f on an array, tolerating scalar-only callables."""
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        y = np.array([float(f(v)) for v in x])
    return y


def decay_radius(f: Callable, spec: QuadratureSpec = DEFAULT_SPEC,
                 one_sided: bool = False) -> float:
    """Smallest scanned radius at which |f| has dropped below noise level.

    The scan is geometric from R = 1; the returned value already includes the
    safety factor.  Raises NonConvergence when no decay is seen within the
    scan budget (the integrand then violates the decay precondition).
    """
    threshold = spec.abs_tol * 1e-3
    r = 1.0
    while r <= _SCAN_MAX_RADIUS:
        probes = np.array([r]) if one_sided else np.array([-r, r])
        vals = _eval(f, probes)
        if not np.all(np.isfinite(vals)):
            raise NonFinite(f"integrand not finite at radius {r}")
        if np.all(np.abs(vals) < threshold):
            return r * spec.truncation_safety
        r *= _SCAN_GROWTH
    raise NonConvergence("no decay detected while scanning for a truncation radius")


def _panel_sum(f: Callable, lo: float, hi: float, panels: int) -> float:
    """Composite Gauss-Legendre sum with `panels` equal panels on [lo, hi]."""
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    y = _eval(f, x)
    if not np.all(np.isfinite(y)):
        raise NonFinite("integrand not finite inside the truncation window")
    return float(np.sum(y.reshape(panels, _GL_ORDER) * _GL_WEIGHTS[None, :]
                        * half[:, None]))


def _refine(f: Callable, lo: float, hi: float, spec: QuadratureSpec) -> float:
    previous = _panel_sum(f, lo, hi, _BASE_PANELS)
    panels = _BASE_PANELS
    for _ in range(spec.max_refinements):
        panels *= 2
        current = _panel_sum(f, lo, hi, panels)
        if abs(current - previous) <= max(spec.abs_tol, spec.rel_tol * abs(current)):
            return current
        previous = current
    raise NonConvergence(
        f"tolerance not met after {spec.max_refinements} refinements "
        f"({panels} panels)")


def integrate_line(f: Callable, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Integral of f over the whole real line.

    f must decay super-polynomially in both directions (the caller
    guarantees this; confining potentials with positive leading coefficient
    always produce such weights).
    """
    r = decay_radius(f, spec)
    return _refine(f, -r, r, spec)


def integrate_halfline(f: Callable, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Integral of f over [0, +inf)."""
    r = decay_radius(f, spec, one_sided=True)
    return _refine(f, 0.0, r, spec)


def gibbs_moments(w_coeffs: np.ndarray, lam: float, orders,
                  spec: QuadratureSpec = DEFAULT_SPEC,
                  shift: float | None = None) -> np.ndarray:
    """Integrals of x^k exp(-(W(x) - shift)/lam) for every k in `orders`.

    W is the polynomial with ascending coefficients `w_coeffs`.  All requested
    moments share one panel refinement, converging only when every order meets
    the tolerance.  `shift` defaults to the minimum of W over the truncation
    window so the weight peaks at one; this cancels in any moment ratio and
    keeps exp() in range even for very small lam.
    """
    w = np.asarray(w_coeffs, dtype=float)
    orders = np.asarray(list(orders), dtype=int)

    if shift is None:
        # Crude but safe: minimum over a dense probe of an ample window, then
        # refined by the decay scan below.  W is polynomial, so the probe
        # cannot miss a narrow well at this resolution.
        probe = np.linspace(-64.0, 64.0, 40_001)
        shift = float(np.min(np.polynomial.polynomial.polyval(probe, w)))

    def weight(x):
        return np.exp(-(np.polynomial.polynomial.polyval(x, w) - shift) / lam)

    r = decay_radius(weight, spec)

    def level(panels: int) -> np.ndarray:
        edges = np.linspace(-r, r, panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        fx = weight(x)
        if not np.all(np.isfinite(fx)):
            raise NonFinite("Gibbs weight not finite inside the truncation window")
        wts = (_GL_WEIGHTS[None, :] * half[:, None]).ravel()
        base = fx * wts
        return np.array([np.sum(base * x ** k) if k else np.sum(base)
                         for k in orders])

    previous = level(_BASE_PANELS)
    panels = _BASE_PANELS
    for _ in range(spec.max_refinements):
        panels *= 2
        current = level(panels)
        err = np.abs(current - previous)
        if np.all(err <= np.maximum(spec.abs_tol, spec.rel_tol * np.abs(current))):
            return current
        previous = current
    raise NonConvergence(
        f"moment tolerances not met after {spec.max_refinements} refinements")
