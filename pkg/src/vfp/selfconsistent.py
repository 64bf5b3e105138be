"""Self-consistent Gibbs measures of the mean-field dynamics.

For a quadratic interaction the stationary problem closes in the mean: a
measure with mean m feels the tilted profile W_m = V + (alpha/2)(x - m)^2, and
invariant measures are exactly the fixed points of the map sending m to the
mean of exp(-W_m/lam).  For a general even polynomial interaction the same
idea closes in the first 2n raw moments, solved here by damped iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P

from . import quadrature
from .errors import BracketExhausted, NoConvergence
from .potentials import (ConfiningPotential, InteractionPotential,
                         convolution_coeffs, critical_points, effective_coeffs,
                         poly_global_min, validate_assumptions)

_FIXED_POINT_TOL = 1e-9
_SCAN_NODES = 2000
_MOMENT_ITER_TOL = 1e-10

# grid construction constants: nodes per local width and covered half-widths,
# sized so the trapezoid mass of the stored density is reliable to 1e-8
_NODES_PER_WIDTH = 6700.0
_COVER_WIDTHS = 14.0
_BACKBONE_NODES = 2001
_EXP_UNDERFLOW = 700.0


class SelfConsistencyProblem:
    """A (confinement, interaction, temperature) triple.

    The assumptions are validated eagerly; pass test_only=True for profiles
    outside the theorem class (e.g. a quadratic well used as a Gaussian
    oracle).
    """

    def __init__(self, V: ConfiningPotential, psi: InteractionPotential,
                 lam: float, test_only: bool = False):
        if not (lam > 0.0 and np.isfinite(lam)):
            raise ValueError("temperature must be positive and finite")
        if not test_only:
            report = validate_assumptions(V, psi)
            if not report.all_passed:
                raise ValueError(
                    f"assumptions violated: {', '.join(report.failed_codes)}; "
                    "flag the problem test_only to bypass")
        self.V = V
        self.psi = psi
        self.lam = float(lam)
        self.test_only = bool(test_only)

    def with_lam(self, lam: float) -> "SelfConsistencyProblem":
        clone = SelfConsistencyProblem.__new__(SelfConsistencyProblem)
        clone.V, clone.psi, clone.test_only = self.V, self.psi, self.test_only
        if not (lam > 0.0 and np.isfinite(lam)):
            raise ValueError("temperature must be positive and finite")
        clone.lam = float(lam)
        return clone

    def __repr__(self):
        return (f"SelfConsistencyProblem(V={self.V!r}, psi={self.psi!r}, "
                f"lam={self.lam!r})")


@dataclass(frozen=True)
class FixedPoint:
    m: float
    stability: str            # "stable" iff the map has slope < 1 there
    residual: float


@dataclass(frozen=True)
class FixedPointSet:
    points: tuple
    lam: float

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def means(self) -> np.ndarray:
        return np.array([p.m for p in self.points])

    @property
    def stable(self) -> tuple:
        return tuple(p for p in self.points if p.stability == "stable")


@dataclass
class StationaryMeasure:
    """Position-space invariant density sampled on a grid.

    moments[k] holds the raw moment E[x^k] (moments[0] is one); the grid is
    refined around each well so that plain trapezoid integration of the stored
    density is accurate to about 1e-8.
    """

    lam: float
    mean: float
    moments: np.ndarray
    grid_nodes: np.ndarray
    grid_density: np.ndarray
    symmetric: bool

    def centered_moment(self, center: float, order: int) -> float:
        """E[(x - center)^order] from the stored raw moments (binomial)."""
        if order < self.moments.size:
            total = 0.0
            for k in range(order + 1):
                total += (comb(order, k) * (-center) ** (order - k)
                          * self.moments[k])
            return float(total)
        shifted = (self.grid_nodes - center) ** order * self.grid_density
        return float(np.trapezoid(shifted, self.grid_nodes))

    def cdf(self, x) -> np.ndarray:
        """Cumulative distribution evaluated by grid interpolation."""
        inc = np.zeros_like(self.grid_nodes)
        inc[1:] = np.cumsum(0.5 * (self.grid_density[1:] + self.grid_density[:-1])
                            * np.diff(self.grid_nodes))
        inc /= inc[-1]
        return np.interp(x, self.grid_nodes, inc, left=0.0, right=1.0)

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "mean": self.mean,
            "moments": self.moments.tolist(),
            "grid_nodes": self.grid_nodes.tolist(),
            "grid_density": self.grid_density.tolist(),
            "symmetric": self.symmetric,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StationaryMeasure":
        return cls(
            lam=float(data["lam"]),
            mean=float(data["mean"]),
            moments=np.asarray(data["moments"], dtype=float),
            grid_nodes=np.asarray(data["grid_nodes"], dtype=float),
            grid_density=np.asarray(data["grid_density"], dtype=float),
            symmetric=bool(data["symmetric"]),
        )


# ---------------------------------------------------------------------------
# quadratic-interaction scalar map

def _require_quadratic(prob: SelfConsistencyProblem):
    if not prob.psi.is_quadratic:
        raise ValueError("the scalar mean map needs a quadratic interaction; "
                         "use solve_general_interaction instead")


def _tilted(prob: SelfConsistencyProblem, m: float) -> tuple[np.ndarray, float]:
    w = effective_coeffs(prob.V, prob.psi.alpha, m)
    return w, poly_global_min(w)


def mean_field_map(prob: SelfConsistencyProblem, m: float,
                   spec: quadrature.QuadratureSpec = quadrature.DEFAULT_SPEC) -> float:
    """Mean of the Gibbs measure tilted by a trial mean m."""
    _require_quadratic(prob)
    w, floor = _tilted(prob, m)
    i0, i1 = quadrature.gibbs_moments(w, prob.lam, (0, 1), spec, shift=floor)
    return float(i1 / i0)


def map_derivative(prob: SelfConsistencyProblem, m: float,
                   spec: quadrature.QuadratureSpec = quadrature.DEFAULT_SPEC) -> float:
    """Slope of the mean map: (alpha/lam) times the tilted Gibbs variance.

    Computed by quadrature of the variance, not by finite differences.
    """
    _require_quadratic(prob)
    w, floor = _tilted(prob, m)
    i0, i1, i2 = quadrature.gibbs_moments(w, prob.lam, (0, 1, 2), spec, shift=floor)
    mu = i1 / i0
    var = i2 / i0 - mu * mu
    return float(prob.psi.alpha / prob.lam * var)


def _polish_fixed_point(prob, lo, hi, g_lo, g_hi) -> float:
    """Newton on g(m) = map(m) - m, safeguarded by the bracket."""
    m = 0.5 * (lo + hi)
    for _ in range(60):
        g = mean_field_map(prob, m) - m
        if abs(g) < 1e-13:
            return m
        dg = map_derivative(prob, m) - 1.0
        step_ok = dg != 0.0
        if step_ok:
            m_new = m - g / dg
            step_ok = lo < m_new < hi
        if not step_ok:
            m_new = 0.5 * (lo + hi)
        # maintain the bracket for the bisection fallback
        if (g < 0.0) == (g_lo < 0.0):
            lo, g_lo = m, g
        else:
            hi, g_hi = m, g
        if abs(m_new - m) < 1e-15 * max(1.0, abs(m)):
            return m_new
        m = m_new
    return m


def scan_bracket(prob: SelfConsistencyProblem) -> float:
    """Half-width of the fixed-point scan window.

    Twice the confinement scale: means of Gibbs measures concentrate near
    critical points of V, so this window always contains every fixed point.
    """
    report = critical_points(prob.V)
    extent = float(np.max(np.abs(report.locations))) if report.points else 0.0
    return 2.0 * (extent + 1.0)


def _scan_means(prob: SelfConsistencyProblem, m_grid: np.ndarray) -> np.ndarray:
    """Tilted Gibbs means for a whole grid of trial means at once.

    One shared Gauss-Legendre panel set serves every tilt; the panel count
    doubles until the mean vector is stable to 1e-9 in sup norm.  Row-wise
    exponent shifts keep exp() in range and cancel in each mean.
    """
    alpha = prob.psi.alpha
    radius = 0.0
    for m in (float(m_grid[0]), 0.0, float(m_grid[-1])):
        w, floor = _tilted(prob, m)
        radius = max(radius, _gibbs_radius(w, prob.lam, floor, quadrature.DEFAULT_SPEC))

    nodes, weights = np.polynomial.legendre.leggauss(15)

    def means_for(panels: int) -> np.ndarray:
        edges = np.linspace(-radius, radius, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        wts = (half[:, None] * weights[None, :]).ravel()
        vx = P.polyval(x, prob.V.coeffs)
        out = np.empty(m_grid.size)
        block = max(1, int(4e6 // x.size))
        for start in range(0, m_grid.size, block):
            ms = m_grid[start:start + block, None]
            expo = (vx[None, :] + 0.5 * alpha * (x[None, :] - ms) ** 2) / prob.lam
            expo -= expo.min(axis=1, keepdims=True)
            dens = np.exp(-expo)
            out[start:start + block] = (dens @ (x * wts)) / (dens @ wts)
        return out

    panels = 256
    previous = means_for(panels)
    for _ in range(12):
        panels *= 2
        current = means_for(panels)
        if np.max(np.abs(current - previous)) < 1e-9:
            return current
        previous = current
    return previous


def find_fixed_points(prob: SelfConsistencyProblem) -> FixedPointSet:
    """Every self-consistent mean in the scan window, classified by stability.

    Sign changes of map(m) - m on a uniform scan are polished by safeguarded
    Newton; the local minima of V seed additional polishing so that
    off-center solutions at very small temperature cannot be missed.
    """
    _require_quadratic(prob)
    bound = scan_bracket(prob)
    grid = np.linspace(-bound, bound, _SCAN_NODES)
    g = _scan_means(prob, grid) - grid

    roots: list[float] = []
    for i in range(grid.size - 1):
        if g[i] == 0.0:
            roots.append(float(grid[i]))
        elif (g[i] < 0.0) != (g[i + 1] < 0.0):
            roots.append(_polish_fixed_point(prob, grid[i], grid[i + 1],
                                             g[i], g[i + 1]))
    if g[-1] == 0.0:
        roots.append(float(grid[-1]))

    # seed the wells: at small lam the off-center roots sit within a scan cell
    # of a local minimum and Newton from the minimum converges in a few steps
    for p in critical_points(prob.V).minima:
        m = float(p.location)
        for _ in range(60):
            gm = mean_field_map(prob, m) - m
            if abs(gm) < 1e-13:
                break
            dg = map_derivative(prob, m) - 1.0
            if dg == 0.0 or not (-bound <= m - gm / dg <= bound):
                break
            m -= gm / dg
        if abs(mean_field_map(prob, m) - m) < _FIXED_POINT_TOL:
            roots.append(m)

    roots.sort()
    unique: list[float] = []
    for r in roots:
        if not unique or abs(r - unique[-1]) > 1e-7 * max(1.0, abs(r)):
            unique.append(r)

    points = []
    for m in unique:
        residual = abs(mean_field_map(prob, m) - m)
        if residual >= _FIXED_POINT_TOL:
            continue
        slope = map_derivative(prob, m)
        points.append(FixedPoint(m, "stable" if slope < 1.0 else "unstable",
                                 residual))
    if not points:
        raise BracketExhausted(
            "no fixed point found; existence guarantees at least one, so the "
            "quadrature or problem configuration is faulty")
    return FixedPointSet(tuple(points), prob.lam)


# ---------------------------------------------------------------------------
# densities

def _gibbs_radius(w: np.ndarray, lam: float, floor: float,
                  spec: quadrature.QuadratureSpec) -> float:
    def weight(x):
        return np.exp(-(P.polyval(x, w) - floor) / lam)
    return quadrature.decay_radius(weight, spec)


def _local_width(w: np.ndarray, lam: float, a: float, radius: float,
                 sign: float) -> float:
    """Distance from the well bottom until the profile has risen by lam/2."""
    wa = P.polyval(a, w)
    for t in np.geomspace(1e-8 * max(1.0, abs(a)), 2.0 * radius, 600):
        if P.polyval(a + sign * t, w) - wa >= 0.5 * lam:
            return t
    return radius


def _adaptive_nodes(w: np.ndarray, lam: float, radius: float) -> np.ndarray:
    """Backbone plus refined patches around each local minimum of the profile."""
    pieces = [np.linspace(-radius, radius, _BACKBONE_NODES)]
    dw = P.polyder(w)
    ddw = P.polyder(dw)
    from .potentials import real_roots
    for a in real_roots(dw, radius=radius):
        if P.polyval(a, ddw) < 0.0:
            continue
        for sign in (-1.0, 1.0):
            width = _local_width(w, lam, a, radius, sign)
            span = min(_COVER_WIDTHS * width, radius)
            n = int(min(_NODES_PER_WIDTH * span / width, 400_001))
            lo, hi = sorted((a, a + sign * span))
            pieces.append(np.linspace(max(lo, -radius), min(hi, radius), n))
    return np.unique(np.concatenate(pieces))


def stationary_density(prob: SelfConsistencyProblem, m: float,
                       grid: str = "adaptive", n_nodes: int | None = None,
                       spec: quadrature.QuadratureSpec = quadrature.DEFAULT_SPEC,
                       ) -> StationaryMeasure:
    """Gibbs density for the tilt m, gridded and with quadrature moments.

    m is normally a fixed point; any other value yields the (non
    self-consistent) tilted density, useful for diagnostics.  grid="uniform"
    with n_nodes produces an equispaced grid for finite-difference work.
    """
    _require_quadratic(prob)
    w, floor = _tilted(prob, m)
    max_order = max(4, prob.psi.degree)
    raw = quadrature.gibbs_moments(w, prob.lam, range(max_order + 1), spec,
                                   shift=floor)
    moments = raw / raw[0]
    moments[0] = 1.0

    radius = _gibbs_radius(w, prob.lam, floor, spec)
    if grid == "uniform":
        nodes = np.linspace(-radius, radius, n_nodes or 2001)
    elif grid == "adaptive":
        nodes = _adaptive_nodes(w, prob.lam, radius)
        exponent = (P.polyval(nodes, w) - floor) / prob.lam
        nodes = nodes[exponent <= _EXP_UNDERFLOW]  # keep density positive
    else:
        raise ValueError(f"unknown grid kind {grid!r}")

    density = np.exp(-(P.polyval(nodes, w) - floor) / prob.lam) / raw[0]
    symmetric = (m == 0.0) and prob.V.is_even
    return StationaryMeasure(
        lam=prob.lam, mean=float(moments[1]), moments=moments,
        grid_nodes=nodes, grid_density=density, symmetric=symmetric)


# ---------------------------------------------------------------------------
# general even-polynomial interaction

def gaussian_raw_moments(center: float, variance: float, max_order: int) -> np.ndarray:
    """Raw moments of a normal law, used to seed the moment iteration."""
    out = np.zeros(max_order + 1)
    sigma = np.sqrt(variance)
    central = np.zeros(max_order + 1)
    central[0] = 1.0
    for j in range(2, max_order + 1, 2):
        # E[Z^j] = (j-1)!! for standard normal
        central[j] = central[j - 2] * (j - 1)
    for j in range(max_order + 1):
        out[j] = sum(comb(j, i) * center ** (j - i) * sigma ** i * central[i]
                     for i in range(j + 1))
    return out


def solve_general_interaction(prob: SelfConsistencyProblem, damping: float = 0.5,
                              center: float = 0.0,
                              seed_moments: np.ndarray | None = None,
                              max_iter: int = 500,
                              spec: quadrature.QuadratureSpec = quadrature.DEFAULT_SPEC,
                              ) -> StationaryMeasure:
    """Invariant measure for an even polynomial interaction.

    Raw moments up to the interaction degree close the convolution, so the
    fixed point is found by damped iteration on the moment vector, seeded with
    the Gaussian moments of variance lam at a chosen well (center).
    """
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must lie in (0, 1]")
    order = max(2, prob.psi.degree)
    if seed_moments is None:
        seed = gaussian_raw_moments(center, prob.lam, order)
    else:
        seed = np.concatenate([[1.0], np.asarray(seed_moments, dtype=float)])
        if seed.size != order + 1:
            raise ValueError(f"seed must supply moments 1..{order}")

    state = seed[1:].copy()
    converged = False
    for _ in range(max_iter):
        mu = np.concatenate([[1.0], state])
        conv = convolution_coeffs(prob.psi, mu)
        w = np.zeros(max(prob.V.coeffs.size, conv.size))
        w[: prob.V.coeffs.size] = prob.V.coeffs
        w[: conv.size] += conv
        floor = poly_global_min(w)
        raw = quadrature.gibbs_moments(w, prob.lam, range(order + 1), spec,
                                       shift=floor)
        updated = raw[1:] / raw[0]
        if np.max(np.abs(updated - state)) < _MOMENT_ITER_TOL:
            state = updated
            converged = True
            break
        state = (1.0 - damping) * state + damping * updated
    if not converged:
        raise NoConvergence(
            f"moment iteration still moving after {max_iter} iterations; "
            "retry with smaller damping or a different seed")

    mu = np.concatenate([[1.0], state])
    conv = convolution_coeffs(prob.psi, mu)
    w = np.zeros(max(prob.V.coeffs.size, conv.size))
    w[: prob.V.coeffs.size] = prob.V.coeffs
    w[: conv.size] += conv
    floor = poly_global_min(w)
    max_order = max(4, order)
    raw = quadrature.gibbs_moments(w, prob.lam, range(max_order + 1), spec,
                                   shift=floor)
    moments = raw / raw[0]
    moments[0] = 1.0

    radius = _gibbs_radius(w, prob.lam, floor, spec)
    nodes = _adaptive_nodes(w, prob.lam, radius)
    exponent = (P.polyval(nodes, w) - floor) / prob.lam
    nodes = nodes[exponent <= _EXP_UNDERFLOW]
    density = np.exp(-(P.polyval(nodes, w) - floor) / prob.lam) / raw[0]

    odd = moments[1::2]
    symmetric = prob.V.is_even and bool(np.max(np.abs(odd)) < 1e-10)
    return StationaryMeasure(
        lam=prob.lam, mean=float(moments[1]), moments=moments,
        grid_nodes=nodes, grid_density=density, symmetric=symmetric)
