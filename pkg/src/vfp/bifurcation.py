"""Locating the phase-transition temperature, two independent ways.

Route one evaluates the published implicit half-line integral identity
bit-faithfully and finds its root in z.  Route two bisects on the slope of
the scalar mean map at the symmetric point: the transition happens exactly
where that slope crosses one.  Both are always reported side by side: for the
standard double well with unit coupling the implicit root comes out at twice
the slope-criterion temperature, consistent with the identity being inherited
from a sigma^2 = 2*lam noise convention.  The library surfaces the ratio
rather than silently correcting either number.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from . import quadrature
from .errors import DivergentIntegrand, NoSignChange, NoTransition
from .potentials import ConfiningPotential, InteractionPotential
from .selfconsistent import (SelfConsistencyProblem, FixedPointSet,
                             find_fixed_points, map_derivative)

_TIGHT_SPEC = quadrature.QuadratureSpec(abs_tol=1e-13, rel_tol=1e-13)
_BISECT_TOL = 1e-8


@dataclass(frozen=True)
class LambdaCReport:
    z_implicit: float
    lambda_oracle: float
    ratio: float
    bracket: tuple
    tolerance: float


@dataclass(frozen=True)
class BranchRow:
    lam: float
    m: float
    stability: str
    residual: float
    error: str = ""


@dataclass(frozen=True)
class BranchTable:
    rows: tuple

    def counts(self) -> list[tuple[float, int]]:
        """Fixed-point count per temperature, ascending, error rows excluded."""
        seen: dict[float, int] = {}
        for row in self.rows:
            if not row.error:
                seen[row.lam] = seen.get(row.lam, 0) + 1
        return sorted(seen.items())


def symmetric_well_profile(V: ConfiningPotential) -> tuple[float, dict[int, float]]:
    """Validate and decompose an even polynomial well for the implicit identity.

    The supported class has a (possibly vanishing) negative quadratic term and
    nonnegative higher even terms; returned are |V''(0)| and the map
    p -> |V^(2p)(0)| for p = 2..q.  The constant term is irrelevant and
    ignored.
    """
    c = V.coeffs
    if V.degree < 4 or V.degree % 2 != 0:
        raise DivergentIntegrand(
            "the implicit identity needs an even well of degree at least four")
    if np.any(c[1::2] != 0.0):
        raise DivergentIntegrand("the well must be an even polynomial")
    if c.size > 2 and c[2] > 0.0:
        raise DivergentIntegrand("the quadratic term must be concave at the origin")
    higher = {}
    q = V.degree // 2
    for p in range(2, q + 1):
        coeff = c[2 * p] if 2 * p < c.size else 0.0
        if coeff < 0.0:
            raise DivergentIntegrand(
                f"the degree-{2 * p} term must have a nonnegative coefficient")
        higher[p] = coeff * factorial(2 * p)
    if higher[q] <= 0.0:
        raise DivergentIntegrand("the leading even derivative must be positive")
    curvature = abs(2.0 * c[2]) if c.size > 2 else 0.0
    return curvature, higher


def lambda_c_integrand_equation(z: float, V: ConfiningPotential, alpha: float,
                                spec: quadrature.QuadratureSpec = _TIGHT_SPEC) -> float:
    """Half-line integral whose root in z locates the transition.

    Evaluated exactly as printed: weight (4 y^2 - 1/(2 alpha)) against the
    exponential of (|V''(0)| - alpha) 4 y^2 minus the z-weighted sum of the
    higher even derivatives scaled by 2^(2p).
    """
    if alpha <= 0.0:
        raise DivergentIntegrand("needs a strictly positive coupling")
    if z <= 0.0:
        raise DivergentIntegrand("the unknown must stay positive")
    curvature, higher = symmetric_well_profile(V)
    powers = np.array(sorted(higher))
    coeffs = np.array([2.0 * z ** (p - 1) * higher[p] / factorial(2 * p)
                       * 2.0 ** (2 * p) for p in powers])
    if coeffs[-1] <= 0.0:
        raise DivergentIntegrand("the leading exponent coefficient must decay")

    def integrand(y):
        y = np.asarray(y, dtype=float)
        expo = (curvature - alpha) * 4.0 * y ** 2
        for p, cf in zip(powers, coeffs):
            expo = expo - cf * y ** (2 * p)
        return (4.0 * y ** 2 - 0.5 / alpha) * np.exp(expo)

    return quadrature.integrate_halfline(integrand, spec)


def solve_lambda_c_implicit(V: ConfiningPotential, alpha: float,
                            bracket_hint: tuple[float, float] | None = None) -> float:
    """Root of the implicit identity by geometric bracketing and bisection."""
    symmetric_well_profile(V)  # precondition check with a clear error

    def f(z: float) -> float:
        return lambda_c_integrand_equation(z, V, alpha)

    if bracket_hint is not None:
        lo, hi = bracket_hint
        f_lo, f_hi = f(lo), f(hi)
        if (f_lo < 0.0) == (f_hi < 0.0):
            raise NoSignChange("hinted bracket does not straddle the root")
    else:
        lo = hi = 0.5  # the transition scale is order one in these units
        f_lo = f_hi = f(0.5)
        while f_lo * f_hi > 0.0:
            if f_lo > 0.0:       # integrand still top-heavy: move right
                hi *= 4.0
                if hi > 1e3:
                    raise NoSignChange("no sign change below z = 1e3")
                f_hi = f(hi)
                if f_hi > 0.0:
                    lo, f_lo = hi, f_hi
            else:                 # already negative: move left
                lo /= 4.0
                if lo < 1e-6:
                    raise NoSignChange("no sign change above z = 1e-6")
                f_lo = f(lo)
                if f_lo < 0.0:
                    hi, f_hi = lo, f_lo

    while hi - lo > 0.25 * _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    # secant polish inside the final bracket
    z = 0.5 * (lo + hi)
    if f_hi != f_lo:
        z_sec = lo - f_lo * (hi - lo) / (f_hi - f_lo)
        if lo <= z_sec <= hi:
            z = z_sec
    return z


def lambda_c_oracle(V: ConfiningPotential, alpha: float) -> float:
    """Transition temperature from the slope-at-zero criterion.

    The slope of the mean map at the symmetric point, (alpha/lam) times the
    tilted Gibbs variance, decreases monotonically in lam; the unique
    crossing of one is the temperature at which the fixed-point count
    changes.  Independent of the implicit integral identity.
    """
    psi = InteractionPotential.quadratic(alpha)

    def slope(lam: float) -> float:
        prob = SelfConsistencyProblem(V, psi, lam, test_only=True)
        return map_derivative(prob, 0.0, spec=_TIGHT_SPEC)

    if alpha <= 0.0:
        raise NoTransition("zero coupling keeps the map constant")

    lo = hi = 1.0
    s_hi = slope(hi)
    while s_hi >= 1.0:
        hi *= 2.0
        if hi > 1e6:
            raise NoTransition("slope never falls below one in the search window")
        s_hi = slope(hi)
    s_lo = slope(lo)
    while s_lo <= 1.0:
        lo /= 2.0
        if lo < 1e-9:
            raise NoTransition("slope stays below one: no phase transition "
                               "at this coupling")
        s_lo = slope(lo)

    while hi - lo > _BISECT_TOL * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if slope(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lambda_c_report(V: ConfiningPotential, alpha: float) -> LambdaCReport:
    """Both transition estimates plus their ratio (expected near two)."""
    oracle = lambda_c_oracle(V, alpha)
    z = solve_lambda_c_implicit(V, alpha)
    return LambdaCReport(
        z_implicit=z, lambda_oracle=oracle, ratio=z / oracle,
        bracket=(oracle * 0.5, oracle * 2.0), tolerance=_BISECT_TOL)


def sweep_branches(V: ConfiningPotential, alpha: float, lam_grid) -> BranchTable:
    """Fixed-point branches over an ascending temperature grid.

    Failures at individual temperatures become error rows; the sweep
    continues.  Rows are emitted in temperature order, then mean order.
    """
    lam_grid = np.asarray(lam_grid, dtype=float)
    if lam_grid.size == 0:
        raise ValueError("temperature grid must be nonempty")
    if np.any(lam_grid <= 0.0) or np.any(np.diff(lam_grid) <= 0.0):
        raise ValueError("temperature grid must be positive and ascending")
    psi = InteractionPotential.quadratic(alpha)
    rows: list[BranchRow] = []
    for lam in lam_grid:
        try:
            prob = SelfConsistencyProblem(V, psi, float(lam), test_only=True)
            fps: FixedPointSet = find_fixed_points(prob)
        except Exception as exc:  # per-row isolation is the contract
            rows.append(BranchRow(float(lam), float("nan"), "", float("nan"),
                                  error=f"{type(exc).__name__}: {exc}"))
            continue
        for point in fps.points:
            rows.append(BranchRow(float(lam), point.m, point.stability,
                                  point.residual))
    return BranchTable(tuple(rows))
