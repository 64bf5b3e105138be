"""Phase-space lifting, the kinetic stationarity residual, and diagnostics.

A stationary position density lifts to phase space as a product with the
centered Gaussian momentum marginal of variance lam (the Maxwellian
factorization).  The lift is stored in factored form: the full matrix is only
materialized on demand, which keeps dense default grids affordable while the
finite-difference residual works on moderate uniform grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from . import quadrature
from .errors import ConditionViolated, GridTooCoarse
from .potentials import (ConfiningPotential, InteractionPotential,
                         convolution_coeffs, well_depth_margin)
from .selfconsistent import SelfConsistencyProblem, StationaryMeasure, stationary_density

_P_WINDOW_SIGMAS = 8.0
_DEFAULT_P_NODES = 8193
_MATRIX_CAP = 50_000_000  # refuse to materialize anything larger


@dataclass(frozen=True)
class PhysicalParameters:
    """Dimensional constants of the underlying kinetic model."""

    mass: float
    friction: float
    boltzmann: float
    temperature: float
    length: float

    def __post_init__(self):
        for name in ("mass", "friction", "boltzmann", "temperature", "length"):
            value = getattr(self, name)
            if not (value > 0.0 and np.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite")


def nondimensionalize(params: PhysicalParameters) -> tuple[float, float]:
    """Dimensionless temperature and relaxation time (lam, tau).

    tau = mass / friction; lam = k T tau^2 / (mass length^2).
    """
    tau = params.mass / params.friction
    lam = (params.boltzmann * params.temperature * tau * tau
           / (params.mass * params.length ** 2))
    return lam, tau


@dataclass
class PhaseSpaceMeasure:
    """Rank-one phase-space density rho(q, p) = q_density(q) * p_density(p)."""

    q_grid: np.ndarray
    p_grid: np.ndarray
    q_density: np.ndarray
    p_density: np.ndarray
    lam: float
    p_sigma2: float | None = None   # set when the momentum factor is an exact Gaussian

    @property
    def density(self) -> np.ndarray:
        if self.q_grid.size * self.p_grid.size > _MATRIX_CAP:
            raise ValueError("grid too large to materialize; use the factors")
        return np.outer(self.q_density, self.p_density)

    def mass(self) -> float:
        """Total mass; for a product density the 2-D trapezoid factorizes."""
        return float(np.trapezoid(self.q_density, self.q_grid)
                     * np.trapezoid(self.p_density, self.p_grid))

    def q_marginal(self) -> np.ndarray:
        return self.q_density * np.trapezoid(self.p_density, self.p_grid)

    def p_marginal(self) -> np.ndarray:
        return self.p_density * np.trapezoid(self.q_density, self.q_grid)

    def p_variance(self) -> float:
        """Variance of the momentum marginal.

        For an exact-Gaussian factor this integrates the closed form with the
        adaptive quadrature (the Gaussian identity); otherwise it falls back
        to trapezoid sums on the stored grid.
        """
        if self.p_sigma2 is not None:
            s2 = self.p_sigma2
            norm = 1.0 / np.sqrt(2.0 * np.pi * s2)

            def integrand(p):
                return p * p * norm * np.exp(-p * p / (2.0 * s2))

            return quadrature.integrate_line(integrand)
        mass = np.trapezoid(self.p_density, self.p_grid)
        mean = np.trapezoid(self.p_grid * self.p_density, self.p_grid) / mass
        return float(np.trapezoid((self.p_grid - mean) ** 2 * self.p_density,
                                  self.p_grid) / mass)

    def q_moments(self, max_order: int) -> np.ndarray:
        """Raw moments of the normalized position marginal from the grid."""
        marg = self.q_marginal()
        mass = np.trapezoid(marg, self.q_grid)
        return np.array([np.trapezoid(self.q_grid ** k * marg, self.q_grid) / mass
                         for k in range(max_order + 1)])

    def to_dict(self) -> dict:
        return {
            "q_grid": self.q_grid.tolist(),
            "p_grid": self.p_grid.tolist(),
            "q_density": self.q_density.tolist(),
            "p_density": self.p_density.tolist(),
            "lam": self.lam,
            "p_sigma2": self.p_sigma2,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PhaseSpaceMeasure":
        return cls(
            q_grid=np.asarray(data["q_grid"], dtype=float),
            p_grid=np.asarray(data["p_grid"], dtype=float),
            q_density=np.asarray(data["q_density"], dtype=float),
            p_density=np.asarray(data["p_density"], dtype=float),
            lam=float(data["lam"]),
            p_sigma2=None if data["p_sigma2"] is None else float(data["p_sigma2"]),
        )


def factorization_defect(measure: PhaseSpaceMeasure) -> float:
    """Sup-norm gap between the density and its reconstructed product form."""
    density = measure.density
    q_marg = np.trapezoid(density, measure.p_grid, axis=1)
    p_marg = np.trapezoid(density, measure.q_grid, axis=0)
    mass = np.trapezoid(q_marg, measure.q_grid)
    rebuilt = np.outer(q_marg, p_marg) / mass
    return float(np.max(np.abs(density - rebuilt)))


def lift_to_phase_space(measure: StationaryMeasure,
                        p_grid_spec: tuple[int, float] | None = None,
                        ) -> PhaseSpaceMeasure:
    """Tensorize a position density with its Maxwellian momentum factor.

    p_grid_spec is (node count, half-width in units of sqrt(lam)); the default
    covers +-8 sqrt(lam) densely enough that the grid mass is reliable to
    1e-6.
    """
    n_p, half_sigmas = p_grid_spec or (_DEFAULT_P_NODES, _P_WINDOW_SIGMAS)
    sigma = np.sqrt(measure.lam)
    p_grid = np.linspace(-half_sigmas * sigma, half_sigmas * sigma, n_p)
    p_density = np.exp(-p_grid ** 2 / (2.0 * measure.lam)) / np.sqrt(
        2.0 * np.pi * measure.lam)
    return PhaseSpaceMeasure(
        q_grid=measure.grid_nodes.copy(), p_grid=p_grid,
        q_density=measure.grid_density.copy(), p_density=p_density,
        lam=measure.lam, p_sigma2=measure.lam)


@dataclass(frozen=True)
class ResidualNorms:
    l2: float    # root mean square over interior nodes
    linf: float


def stationarity_residual(measure: PhaseSpaceMeasure, V: ConfiningPotential,
                          psi: InteractionPotential,
                          frozen_moments: np.ndarray | None = None,
                          ) -> ResidualNorms:
    """Discrete norms of the kinetic forward operator applied to the measure.

    Second-order central differences on uniform grids; the interaction drift
    is rebuilt from the measure's own grid moments (pass frozen_moments to
    apply the operator linearised around another measure instead).  For an
    exactly stationary density the result is pure discretization error,
    shrinking at second order.
    """
    nq, npts = measure.q_grid.size, measure.p_grid.size
    if nq < 32 or npts < 32:
        raise GridTooCoarse("need at least 32 nodes per direction")
    hq_all = np.diff(measure.q_grid)
    hp_all = np.diff(measure.p_grid)
    if (np.max(np.abs(hq_all - hq_all[0])) > 1e-9 * abs(hq_all[0])
            or np.max(np.abs(hp_all - hp_all[0])) > 1e-9 * abs(hp_all[0])):
        raise ValueError("residual evaluation needs uniform grids")
    hq, hp = float(hq_all[0]), float(hp_all[0])

    rho = measure.density
    if frozen_moments is None:
        moments = measure.q_moments(max(1, psi.degree))
    else:
        moments = np.asarray(frozen_moments, dtype=float)
    if psi.is_quadratic:
        drift = V.grad(measure.q_grid) + psi.alpha * (measure.q_grid - moments[1])
    else:
        conv_grad = P.polyder(convolution_coeffs(psi, moments))
        drift = V.grad(measure.q_grid) + P.polyval(measure.q_grid, conv_grad)

    inner = rho[1:-1, 1:-1]
    d_q = (rho[2:, 1:-1] - rho[:-2, 1:-1]) / (2.0 * hq)
    d_p = (rho[1:-1, 2:] - rho[1:-1, :-2]) / (2.0 * hp)
    d_pp = (rho[1:-1, 2:] - 2.0 * inner + rho[1:-1, :-2]) / (hp * hp)
    p_row = measure.p_grid[None, 1:-1]
    drift_col = drift[1:-1, None]

    residual = (-p_row * d_q + (drift_col + p_row) * d_p + inner
                + measure.lam * d_pp)
    return ResidualNorms(
        l2=float(np.sqrt(np.mean(residual ** 2))),
        linf=float(np.max(np.abs(residual))))


def uniform_lift(prob: SelfConsistencyProblem, m: float, n_q: int,
                 n_p: int | None = None) -> PhaseSpaceMeasure:
    """Stationary lift on uniform grids, sized for finite differences."""
    measure = stationary_density(prob, m, grid="uniform", n_nodes=n_q)
    return lift_to_phase_space(measure, (n_p or n_q, _P_WINDOW_SIGMAS))


def residual_convergence(prob: SelfConsistencyProblem, m: float,
                         sizes=(64, 128, 256)) -> list[dict]:
    """Residual norms across grid refinements plus observed orders."""
    rows = []
    for n in sizes:
        lifted = uniform_lift(prob, m, n)
        norms = stationarity_residual(lifted, prob.V, prob.psi)
        rows.append({"nodes": int(n), "l2": norms.l2, "linf": norms.linf,
                     "order": float("nan")})
    for i in range(1, len(rows)):
        ratio = np.log2(rows[i]["nodes"] / rows[i - 1]["nodes"])
        rows[i]["order"] = float(
            np.log2(rows[i - 1]["l2"] / rows[i]["l2"]) / ratio)
    return rows


def moment_concentration_check(measure: StationaryMeasure, a0: float,
                               n: int) -> float:
    """Centered 2n-th position moment about a well location a0.

    The momentum variable integrates out of the phase-space moment exactly,
    so the check runs on the position marginal.
    """
    if n < 1:
        raise ValueError("moment half-order must be at least 1")
    return measure.centered_moment(a0, 2 * n)


def asymptotic_mean(V: ConfiningPotential, alpha: float, a0: float,
                    lam: float) -> float:
    """First-order small-temperature prediction for the off-center mean.

    Implements the published coefficient verbatim:
    a0 - V'''(a0) / (4 V''(a0) (alpha + V''(a0))) * lam.  Note the companion
    fixed-point slope observed in this library's normalization is twice this
    prediction's slope (same inherited-convention factor as the implicit
    transition identity); the comparison tooling reports the ratio.
    """
    h2 = float(V.hessian(a0))
    if alpha + h2 <= 0.0:
        raise ConditionViolated(
            f"need coupling + curvature > 0 at {a0:g} (got {alpha + h2:g})")
    margin = well_depth_margin(V, a0)
    if alpha <= margin:
        raise ConditionViolated(
            f"coupling {alpha:g} not above the well-depth margin {margin:g}")
    h3 = float(P.polyval(a0, V.derivative_coeffs(3))) if V.degree >= 3 else 0.0
    if h3 == 0.0:
        return a0          # odd derivative vanishes: no first-order shift
    if h2 == 0.0:
        raise ConditionViolated(f"degenerate curvature at {a0:g}")
    return a0 - h3 / (4.0 * h2 * (alpha + h2)) * lam
