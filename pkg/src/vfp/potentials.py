"""Confining and interaction potentials with assumption validation.

Potentials are real polynomials (every downstream theorem this library
implements is stated for polynomial or polynomial-growth profiles, and
polynomials make the growth / convexity conditions decidable).  The
constructors are permissive; `validate_assumptions` is the gate that reports,
per sub-assumption, whether a pair (V, psi) sits inside the supported class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import RootFindingFailure, UnboundedSup

_ROOT_TOL = 1e-10          # |V'| at a reported critical point
_POLISH_TOL = 1e-12        # bracket width target of bisection polishing
_HESSIAN_DEGENERATE = 1e-8


def _trim(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.size == 0:
        c = np.zeros(1)
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1].copy() if nz.size else np.zeros(1)


def _cauchy_root_bound(coeffs: np.ndarray) -> float:
    """All real roots of the polynomial lie within this radius."""
    c = _trim(coeffs)
    if c.size <= 1:
        return 1.0
    return 1.0 + float(np.max(np.abs(c[:-1] / c[-1])))


class ConfiningPotential:
    """Polynomial confinement profile V(x) = sum_k coeffs[k] x^k.

    For dimension > 1 the profile acts radially, V(|x|); only the particle
    simulator uses that extension.
    """

    def __init__(self, coeffs, dimension: int = 1):
        c = _trim(coeffs)
        if not np.all(np.isfinite(c)):
            raise ValueError("potential coefficients must be finite")
        if dimension < 1:
            raise ValueError("dimension must be at least 1")
        self.coeffs = c
        self.dimension = int(dimension)
        self._deriv_cache: dict[int, np.ndarray] = {0: c}

    @classmethod
    def double_well(cls) -> "ConfiningPotential":
        """The standard symmetric double well x^4/4 - x^2/2."""
        return cls([0.0, 0.0, -0.5, 0.0, 0.25])

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def leading_coefficient(self) -> float:
        return float(self.coeffs[-1])

    @property
    def is_even(self) -> bool:
        return bool(np.all(self.coeffs[1::2] == 0.0))

    def derivative_coeffs(self, order: int = 1) -> np.ndarray:
        if order not in self._deriv_cache:
            self._deriv_cache[order] = _trim(P.polyder(self.coeffs, order))
        return self._deriv_cache[order]

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def grad(self, x):
        return P.polyval(x, self.derivative_coeffs(1))

    def hessian(self, x):
        return P.polyval(x, self.derivative_coeffs(2))

    def __repr__(self):
        return f"ConfiningPotential({self.coeffs.tolist()}, dimension={self.dimension})"


class InteractionPotential:
    """Even interaction profile psi(x) = G(|x|) with polynomial G, G(0) = 0."""

    def __init__(self, g_coeffs, kind: str = "polynomial", alpha: float | None = None):
        g = _trim(g_coeffs)
        if not np.all(np.isfinite(g)):
            raise ValueError("interaction coefficients must be finite")
        if g[0] != 0.0:
            raise ValueError("interaction must vanish at zero separation")
        if np.any(g[1::2] != 0.0):
            raise ValueError("interaction profile must be even")
        if g.size > 1 and g.size % 2 == 0:
            raise ValueError("even polynomial cannot have odd degree")
        self.g_coeffs = g
        self.kind = kind
        self.alpha = alpha

    @classmethod
    def quadratic(cls, alpha: float) -> "InteractionPotential":
        """psi(x) = (alpha/2) x^2 with alpha >= 0."""
        if not (alpha >= 0.0 and np.isfinite(alpha)):
            raise ValueError("alpha must be finite and nonnegative")
        return cls([0.0, 0.0, 0.5 * alpha], kind="quadratic", alpha=float(alpha))

    @classmethod
    def even_polynomial(cls, g_coeffs) -> "InteractionPotential":
        g = _trim(g_coeffs)
        if g.size < 3 and np.any(g != 0.0):
            raise ValueError("interaction degree must be at least 2")
        return cls(g, kind="polynomial")

    @property
    def degree(self) -> int:
        return self.g_coeffs.size - 1

    @property
    def half_degree(self) -> int:
        return max(1, self.degree // 2)

    @property
    def is_quadratic(self) -> bool:
        return self.kind == "quadratic"

    def __call__(self, x):
        return P.polyval(x, self.g_coeffs)

    def grad(self, x):
        return P.polyval(x, P.polyder(self.g_coeffs))

    def grad_coeffs(self) -> np.ndarray:
        return _trim(P.polyder(self.g_coeffs))

    def __repr__(self):
        if self.is_quadratic:
            return f"InteractionPotential.quadratic({self.alpha})"
        return f"InteractionPotential.even_polynomial({self.g_coeffs.tolist()})"


@dataclass(frozen=True)
class CriticalPoint:
    location: float
    kind: str                  # "min", "max" or "inflection"
    hessian: float
    degenerate: bool = False


@dataclass(frozen=True)
class CriticalPointReport:
    points: tuple

    @property
    def locations(self) -> np.ndarray:
        return np.array([p.location for p in self.points])

    @property
    def minima(self) -> tuple:
        return tuple(p for p in self.points if p.kind == "min")


@dataclass(frozen=True)
class AssumptionCheck:
    code: str
    passed: bool
    detail: str
    witness: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed_codes(self) -> tuple:
        return tuple(c.code for c in self.checks if not c.passed)

    def __getitem__(self, code: str) -> AssumptionCheck:
        for c in self.checks:
            if c.code == code:
                return c
        raise KeyError(code)


# ---------------------------------------------------------------------------
# polynomial root machinery (sign-change bracketing, no companion matrices)

def _scan_grid(radius: float) -> np.ndarray:
    """Geometric grid on [-radius, radius], denser near the origin."""
    decades = np.geomspace(1e-8 * max(radius, 1.0), radius, 240)
    return np.unique(np.concatenate([-decades[::-1], [0.0], decades]))


def _bisect_root(coeffs: np.ndarray, lo: float, hi: float) -> float:
    flo = P.polyval(lo, coeffs)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = P.polyval(mid, coeffs)
        if fmid == 0.0 or (hi - lo) < _POLISH_TOL * max(1.0, abs(mid)):
            return mid
        if (flo < 0) != (fmid < 0):
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def _newton_polish(coeffs: np.ndarray, x: float, lo: float, hi: float) -> float:
    dcoeffs = P.polyder(coeffs)
    for _ in range(40):
        f = P.polyval(x, coeffs)
        df = P.polyval(x, dcoeffs)
        if df == 0.0:
            break
        step = f / df
        x_new = x - step
        if not (lo - 1e-9 <= x_new <= hi + 1e-9):
            break
        if abs(step) < 1e-16 * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x


def real_roots(coeffs, radius: float | None = None) -> np.ndarray:
    """Real roots of a polynomial by sign-change bracketing plus polishing.

    Even-multiplicity roots are recovered by inspecting the roots of the
    derivative (one level of recursion is enough for the degrees used here).
    """
    c = _trim(coeffs)
    if c.size <= 1:
        return np.array([])
    if radius is None:
        radius = _cauchy_root_bound(c)
    grid = _scan_grid(radius * 1.05)
    vals = P.polyval(grid, c)
    roots = []
    for i in range(grid.size - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(grid[i])
        elif (a < 0) != (b < 0):
            r = _bisect_root(c, grid[i], grid[i + 1])
            roots.append(_newton_polish(c, r, grid[i], grid[i + 1]))
    if vals[-1] == 0.0:
        roots.append(grid[-1])
    if c.size > 2:
        # touch-point roots: derivative zeros where the polynomial also vanishes
        scale = max(1.0, float(np.max(np.abs(c))))
        for r in real_roots(P.polyder(c), radius):
            if abs(P.polyval(r, c)) < 1e-11 * scale:
                roots.append(r)
    if not roots:
        return np.array([])
    roots = np.sort(np.asarray(roots))
    keep = [roots[0]]
    for r in roots[1:]:
        if abs(r - keep[-1]) > 1e-8 * max(1.0, abs(r)):
            keep.append(r)
    return np.asarray(keep)


def poly_global_min(coeffs) -> float:
    """Global minimum over the reals; -inf when the polynomial is unbounded below."""
    c = _trim(coeffs)
    if c.size == 1:
        return float(c[0])
    degree = c.size - 1
    if degree % 2 == 1 or c[-1] < 0.0:
        return -np.inf
    crit = real_roots(P.polyder(c))
    if crit.size == 0:
        return float(c[0])
    return float(np.min(P.polyval(crit, c)))


# ---------------------------------------------------------------------------
# operations

def scan_radius(V: ConfiningPotential) -> float:
    """Window radius that certainly contains all structure of V.

    Combines the Gibbs-weight truncation idea (where exp(-(V - min V))
    becomes negligible) with the Cauchy root bound of V'.
    """
    bound = _cauchy_root_bound(V.derivative_coeffs(1))
    probe = np.linspace(-bound - 1.0, bound + 1.0, 20_001)
    vmin = float(np.min(P.polyval(probe, V.coeffs)))
    r = 1.0
    # leading term eventually dominates, so the loop terminates for any
    # upward-growing profile; cap it for pathological inputs
    while r < 2.0 ** 40:
        if V(r) - vmin > 40.0 and V(-r) - vmin > 40.0:
            break
        r *= 2.0
    return max(1.5 * r, bound + 1.0)


def critical_points(V: ConfiningPotential) -> CriticalPointReport:
    """All real stationary points of V, Newton-polished and classified."""
    roots = real_roots(V.derivative_coeffs(1), radius=scan_radius(V))
    vp = V.derivative_coeffs(1)
    scale = max(1.0, float(np.max(np.abs(vp))))
    points = []
    for r in roots:
        if abs(P.polyval(r, vp)) > _ROOT_TOL * scale:
            raise RootFindingFailure(
                f"candidate {r!r} did not polish below the gradient tolerance")
        h = float(V.hessian(r))
        if h > _HESSIAN_DEGENERATE:
            kind, degenerate = "min", False
        elif h < -_HESSIAN_DEGENERATE:
            kind, degenerate = "max", False
        else:
            # flat Hessian: classify from the gradient sign on both sides
            delta = 1e-4 * max(1.0, abs(r))
            left = float(V.grad(r - delta))
            right = float(V.grad(r + delta))
            if left < 0.0 < right:
                kind = "min"
            elif right < 0.0 < left:
                kind = "max"
            else:
                kind = "inflection"
            degenerate = True
        points.append(CriticalPoint(float(r), kind, h, degenerate))
    return CriticalPointReport(tuple(points))


def well_depth_margin(V: ConfiningPotential, a0: float) -> float:
    """sup over x != a0 of 2 (V(a0) - V(x)) / (a0 - x)^2.

    The removable singularity at a0 is filled with the Taylor limit
    -V''(a0) (extended to third order nearby, where the raw quotient is
    numerically unusable).  A quadratic coupling strength strictly above the
    returned value guarantees an off-center invariant measure at small
    temperature.
    """
    if V.is_even:
        a0 = abs(a0)  # coefficient-level symmetry: identical result for +-a0
    radius = max(scan_radius(V), abs(a0) + 1.0)
    v_a0 = float(V(a0))
    h2 = float(V.hessian(a0))
    h3 = float(P.polyval(a0, V.derivative_coeffs(3))) if V.degree >= 3 else 0.0
    h4 = float(P.polyval(a0, V.derivative_coeffs(4))) if V.degree >= 4 else 0.0

    def ratio(x):
        x = np.asarray(x, dtype=float)
        d = x - a0
        near = np.abs(d) < 1e-4
        d_safe = np.where(near, 1.0, d)
        raw = 2.0 * (v_a0 - P.polyval(x, V.coeffs)) / d_safe ** 2
        taylor = -(h2 + d * h3 / 3.0 + d * d * h4 / 12.0)
        return np.where(near, taylor, raw)

    grid = np.linspace(-radius, radius, 10_001)
    vals = ratio(grid)
    best = int(np.argmax(vals))
    if best in (0, grid.size - 1):
        # valid confining profiles force the quotient to -infinity at the
        # edges; a boundary maximum means the input is not confining
        outward = grid[best] * 2.0
        if float(ratio(np.array([outward]))[0]) > vals[best]:
            raise UnboundedSup("quotient still growing at the scan boundary")
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    # golden-section ascent on the bracketing interval
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1 = float(ratio(np.array([x1]))[0])
    f2 = float(ratio(np.array([x2]))[0])
    best_val = max(float(vals[best]), f1, f2)
    for _ in range(120):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = float(ratio(np.array([x2]))[0])
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = float(ratio(np.array([x1]))[0])
        best_val = max(best_val, f1, f2)
        if hi - lo < 1e-13 * max(1.0, abs(hi)):
            break
    return best_val


def effective_coeffs(V: ConfiningPotential, alpha: float, m: float) -> np.ndarray:
    """Ascending coefficients of V(x) + (alpha/2) (x - m)^2."""
    out = np.zeros(max(V.coeffs.size, 3))
    out[: V.coeffs.size] = V.coeffs
    out[0] += 0.5 * alpha * m * m
    out[1] -= alpha * m
    out[2] += 0.5 * alpha
    return _trim(out)


def effective_potential(V: ConfiningPotential, psi: InteractionPotential, m: float):
    """The tilted single-particle profile seen by a measure with mean m.

    Quadratic interaction only: the quadratic case closes exactly in the mean
    (the variance contribution is constant and cancels in normalization).
    """
    if not psi.is_quadratic:
        raise ValueError("effective potential requires a quadratic interaction")
    coeffs = effective_coeffs(V, psi.alpha, m)

    def w(x):
        return P.polyval(x, coeffs)

    return w


def convolution_coeffs(psi: InteractionPotential, raw_moments) -> np.ndarray:
    """Coefficients in q of (psi * rho)(q) given raw moments of rho.

    Expanding G(q - y) binomially makes every coefficient linear in the
    moments E[y^j], which is what turns the self-consistency equation into a
    finite moment fixed-point problem.
    """
    mu = np.asarray(raw_moments, dtype=float)
    g = psi.g_coeffs
    need = g.size - 1
    if mu.size < need + 1:
        raise ValueError(f"need raw moments up to order {need}")
    out = np.zeros(g.size)
    for k in range(1, g.size):
        if g[k] == 0.0:
            continue
        for j in range(k + 1):
            out[j] += g[k] * comb(k, j) * (-1.0) ** (k - j) * mu[k - j]
    return _trim(out)


# ---------------------------------------------------------------------------
# assumption validation

def _check_growth(V: ConfiningPotential) -> AssumptionCheck:
    ok = (V.degree >= 2 and V.degree % 2 == 0
          and V.leading_coefficient > 0.0)
    if ok:
        return AssumptionCheck(
            "V1", True,
            f"V/x^{V.degree} tends to {V.leading_coefficient:g} > 0",
            {"limit": V.leading_coefficient, "half_degree": V.degree // 2})
    return AssumptionCheck(
        "V1", False,
        "even positive leading growth required "
        f"(degree {V.degree}, leading {V.leading_coefficient:g})")


def _check_finitely_many_critical(V: ConfiningPotential) -> AssumptionCheck:
    if np.all(V.derivative_coeffs(1) == 0.0):
        return AssumptionCheck("V2", False, "gradient vanishes identically")
    try:
        report = critical_points(V)
    except RootFindingFailure as exc:
        return AssumptionCheck("V2", False, f"root isolation failed: {exc}")
    return AssumptionCheck(
        "V2", True, f"{len(report.points)} critical point(s) isolated",
        {"count": len(report.points),
         "locations": report.locations.tolist()})


def _quartic_bound_candidates(V: ConfiningPotential):
    c = V.coeffs
    if V.degree == 4:
        yield float(c[4])        # exact-profile fast path
        yield float(c[4]) / 2.0
    else:
        yield 1.0
        yield V.leading_coefficient / 2.0


def _check_quartic_lower_bound(V: ConfiningPotential) -> AssumptionCheck:
    if V.degree < 4 or V.leading_coefficient <= 0.0:
        return AssumptionCheck(
            "V3", False, "degree below four cannot dominate a quartic lower bound")
    c2_natural = -float(V.coeffs[2]) if V.coeffs.size > 2 and V.coeffs[2] < 0 else None
    for c4 in _quartic_bound_candidates(V):
        if c4 <= 0.0:
            continue
        c2_list = ([c2_natural] if c2_natural else []) + [2.0 ** k for k in range(21)]
        for c2 in c2_list:
            diff = np.array(V.coeffs, dtype=float)
            if diff.size < 5:
                diff = np.concatenate([diff, np.zeros(5 - diff.size)])
            diff[4] -= c4
            diff[2] += c2
            if poly_global_min(diff) >= -1e-12:
                return AssumptionCheck(
                    "V3", True,
                    f"V(x) >= {c4:g} x^4 - {c2:g} x^2",
                    {"C4": c4, "C2": float(c2)})
    return AssumptionCheck(
        "V3", False, "no quartic lower bound found within the search budget")


def _check_convex_outside(V: ConfiningPotential) -> AssumptionCheck:
    if V.degree < 4 or V.leading_coefficient <= 0.0:
        return AssumptionCheck(
            "V4", False, "curvature does not grow (degree below four)")
    try:
        crit = critical_points(V)
    except RootFindingFailure as exc:
        return AssumptionCheck("V4", False, f"root isolation failed: {exc}")
    hess_roots = real_roots(V.derivative_coeffs(2))
    if crit.points:
        lo = float(np.min(crit.locations))
        hi = float(np.max(crit.locations))
    else:
        lo = hi = 0.0
    margin = 1e-8 * max(1.0, abs(lo), abs(hi))
    outside = [r for r in hess_roots if r < lo - margin or r > hi + margin]
    if outside:
        return AssumptionCheck(
            "V4", False,
            f"curvature changes sign outside the critical region at {outside[0]:g}",
            {"counterexample": float(outside[0])})
    return AssumptionCheck(
        "V4", True,
        "curvature positive outside the hull of the critical points",
        {"critical_hull": [lo, hi]})


def _interaction_window(psi: InteractionPotential) -> float:
    b = max(_cauchy_root_bound(P.polyder(psi.g_coeffs, 2)),
            _cauchy_root_bound(P.polyder(psi.g_coeffs, 4))
            if psi.degree >= 4 else 1.0)
    return b + 1.0


def _check_even_profile(psi: InteractionPotential) -> AssumptionCheck:
    if np.all(psi.g_coeffs == 0.0):
        return AssumptionCheck(
            "psi1", True, "interaction switched off (zero coupling)",
            {"half_degree": 0})
    if psi.degree < 2:
        return AssumptionCheck("psi1", False, "profile degree below two")
    return AssumptionCheck(
        "psi1", True, f"even polynomial of degree {psi.degree}",
        {"half_degree": psi.half_degree})


def _check_interaction_convexity(psi: InteractionPotential) -> AssumptionCheck:
    if np.all(psi.g_coeffs == 0.0):
        return AssumptionCheck("psi2", True, "zero coupling is trivially convex")
    if psi.g_coeffs[-1] <= 0.0:
        return AssumptionCheck(
            "psi2", False, "leading interaction coefficient not positive")
    r = np.linspace(0.0, _interaction_window(psi), 4001)
    g2 = P.polyval(r, P.polyder(psi.g_coeffs, 2))
    if np.min(g2) < -1e-12:
        worst = float(r[int(np.argmin(g2))])
        return AssumptionCheck(
            "psi2", False, f"profile not convex near r = {worst:g}",
            {"counterexample": worst})
    if psi.degree >= 4:
        g4 = P.polyval(r, P.polyder(psi.g_coeffs, 4))
        if np.min(g4) < -1e-12:
            worst = float(r[int(np.argmin(g4))])
            return AssumptionCheck(
                "psi2", False,
                f"second derivative of the profile not convex near r = {worst:g}",
                {"counterexample": worst})
    return AssumptionCheck("psi2", True, "profile and its curvature are convex")


def _check_zero_at_origin(psi: InteractionPotential) -> AssumptionCheck:
    ok = psi.g_coeffs[0] == 0.0
    return AssumptionCheck(
        "psi3", ok,
        "no self-energy at zero separation" if ok else "profile nonzero at origin")


def validate_assumptions(V: ConfiningPotential,
                         psi: InteractionPotential) -> ValidationReport:
    """Check the confinement and interaction hypotheses, one flag each.

    Failures are reported, never raised, so a caller can print the whole
    table.  Witness constants (growth limit, quartic bound pair) ride along in
    each check.
    """
    checks = (
        _check_growth(V),
        _check_finitely_many_critical(V),
        _check_quartic_lower_bound(V),
        _check_convex_outside(V),
        _check_even_profile(psi),
        _check_interaction_convexity(psi),
        _check_zero_at_origin(psi),
    )
    return ValidationReport(checks)
