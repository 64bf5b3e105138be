"""Independent reference computations used to freeze expected test values.

Everything here is deliberately primitive: dense trapezoid sums, Gamma-function
closed forms and hand-derived algebra.  None of it imports the package under
test, so these numbers stand on their own as oracles.
"""

import numpy as np
from scipy.special import gamma as gamma_fn

GAMMA_QUARTER = gamma_fn(0.25)
GAMMA_THREE_QUARTER = gamma_fn(0.75)

# Closed forms for quartic-weight integrals, from the substitution t = x^4:
#   int_0^inf x^k exp(-a x^4) dx = Gamma((k+1)/4) / (4 a^((k+1)/4))
GAUSS_LINE = np.sqrt(np.pi)                       # int_R exp(-x^2)
QUARTIC_LINE = GAMMA_QUARTER / 2.0                # int_R exp(-x^4)
QUARTIC_X2_HALFLINE = GAMMA_THREE_QUARTER / 4.0   # int_0^inf x^2 exp(-x^4)
QUARTIC_SCALED_HALFLINE = GAMMA_QUARTER / (4.0 * 8.0 ** 0.25)  # int_0^inf exp(-8 x^4)

# Critical temperature of the quartic double well with unit quadratic coupling.
# Derived from (alpha/lam) * Var(x) = 1 at alpha = 1, where the tilted well is
# the pure quartic x^4/4 and Var(x) = 2 sqrt(lam) Gamma(3/4)/Gamma(1/4).
LAMBDA_C_CANONICAL = 4.0 * (GAMMA_THREE_QUARTER / GAMMA_QUARTER) ** 2
# Root of the half-line integral identity in the sigma^2 = 2*lam convention.
Z_IMPLICIT_CANONICAL = 8.0 * (GAMMA_THREE_QUARTER / GAMMA_QUARTER) ** 2


def trapz_line(f, radius, n=2_000_001):
    """Dense trapezoid over [-radius, radius]."""
    x = np.linspace(-radius, radius, n)
    return np.trapezoid(f(x), x)


def trapz_halfline(f, radius, n=2_000_001):
    x = np.linspace(0.0, radius, n)
    return np.trapezoid(f(x), x)


def canonical_potential(x):
    return x ** 4 / 4.0 - x ** 2 / 2.0


def tilted_well(x, m, alpha=1.0):
    return canonical_potential(x) + 0.5 * alpha * (x - m) ** 2


def gibbs_mean_trapz(m, lam, alpha=1.0, radius=6.0, n=4_000_001):
    """Mean of exp(-W_m/lam) by brute-force trapezoid (the independent route)."""
    x = np.linspace(-radius, radius, n)
    w = tilted_well(x, m, alpha)
    w -= w.min()
    f = np.exp(-w / lam)
    return np.trapezoid(x * f, x) / np.trapezoid(f, x)


def gibbs_var_trapz(m, lam, alpha=1.0, radius=6.0, n=4_000_001):
    x = np.linspace(-radius, radius, n)
    w = tilted_well(x, m, alpha)
    w -= w.min()
    f = np.exp(-w / lam)
    z0 = np.trapezoid(f, x)
    mu = np.trapezoid(x * f, x) / z0
    return np.trapezoid((x - mu) ** 2 * f, x) / z0


def fixed_point_trapz(lam, alpha=1.0, seed=1.0, iters=200, n=4_000_001):
    """Self-consistent mean via plain iteration on the trapezoid oracle."""
    m = seed
    for _ in range(iters):
        m_new = gibbs_mean_trapz(m, lam, alpha, n=n)
        if abs(m_new - m) < 1e-13:
            m = m_new
            break
        m = m_new
    return m


def implicit_equation_trapz(z, alpha=1.0, radius=8.0, n=4_000_001):
    """Half-line integrand of the critical-temperature identity, canonical well."""
    y = np.linspace(0.0, radius, n)
    expo = (1.0 - alpha) * 4.0 * y ** 2 - 8.0 * z * y ** 4
    return np.trapezoid((4.0 * y ** 2 - 0.5 / alpha) * np.exp(expo), y)


def quartic_interaction_moments_trapz(lam=0.5, iters=400, n=800_001, radius=8.0):
    """Dense-grid moment iteration for the interaction profile r^4/4.

    Independent of the package's quadrature and moment plumbing: the
    convolution is expanded binomially on a fixed fine grid and iterated to a
    fixed point.  Returns raw moments 1..4 of the symmetric solution.
    """
    x = np.linspace(-radius, radius, n)
    v = canonical_potential(x)
    mu = np.array([0.0, lam, 0.0, 3.0 * lam * lam])  # gaussian seed, orders 1..4
    for _ in range(iters):
        conv = 0.25 * (x ** 4 - 4 * x ** 3 * mu[0] + 6 * x ** 2 * mu[1]
                       - 4 * x * mu[2] + mu[3])
        w = v + conv
        f = np.exp(-(w - w.min()) / lam)
        z0 = np.trapezoid(f, x)
        new = np.array([np.trapezoid(x ** (k + 1) * f, x) for k in range(4)]) / z0
        if np.max(np.abs(new - mu)) < 1e-13:
            mu = new
            break
        mu = 0.5 * (mu + new)
    return mu


if __name__ == "__main__":
    print("gauss line          ", repr(GAUSS_LINE))
    print("quartic line        ", repr(QUARTIC_LINE))
    print("  trapz check       ", repr(trapz_line(lambda x: np.exp(-x ** 4), 20.0)))
    print("x^2 quartic halfline", repr(QUARTIC_X2_HALFLINE))
    print("  trapz check       ", repr(trapz_halfline(lambda x: x ** 2 * np.exp(-x ** 4), 20.0)))
    print("exp(-8x^4) halfline ", repr(QUARTIC_SCALED_HALFLINE))
    print("  trapz check       ", repr(trapz_halfline(lambda x: np.exp(-8.0 * x ** 4), 20.0)))

    # Gaussian closed form: V = b x^2/2, psi = (a/2) x^2 gives mean a*m/(a+b).
    a, b, m, lam = 1.0, 1.0, 1.0, 0.5
    x = np.linspace(-30, 30, 4_000_001)
    w = 0.5 * b * x ** 2 + 0.5 * a * (x - m) ** 2
    f = np.exp(-(w - w.min()) / lam)
    print("gaussian map trapz  ", repr(np.trapezoid(x * f, x) / np.trapezoid(f, x)),
          " closed form", a * m / (a + b))

    print("lambda_c canonical  ", repr(LAMBDA_C_CANONICAL))
    print("z implicit canonical", repr(Z_IMPLICIT_CANONICAL))
    print("  F(z*) trapz       ", repr(implicit_equation_trapz(Z_IMPLICIT_CANONICAL)))
    print("  F(0.5) trapz      ", repr(implicit_equation_trapz(0.5)))
    print("  F(1.5) trapz      ", repr(implicit_equation_trapz(1.5)))

    print("Phi(1) at lam=0.05  ", repr(gibbs_mean_trapz(1.0, 0.05)))
    print("m* at lam=0.05      ", repr(fixed_point_trapz(0.05)))
    print("m* at lam=0.1       ", repr(fixed_point_trapz(0.1)))
    for lam in (0.02, 0.01, 0.005):
        print(f"m* at lam={lam:<6}    ", repr(fixed_point_trapz(lam)))
    ms = [fixed_point_trapz(l) for l in (0.02, 0.01, 0.005)]
    lams = np.array([0.02, 0.01, 0.005])
    slope = np.polyfit(lams, ms, 1)[0]
    print("fitted slope        ", repr(slope), " target -0.25, rel err",
          abs(slope + 0.25) / 0.25)

    # Centered second moment about a0=1 of the eccentric measure.
    for lam in (0.1, 0.05, 0.02):
        mstar = fixed_point_trapz(lam)
        xg = np.linspace(-6, 6, 4_000_001)
        w = tilted_well(xg, mstar)
        f = np.exp(-(w - w.min()) / lam)
        z0 = np.trapezoid(f, xg)
        m2 = np.trapezoid((xg - 1.0) ** 2 * f, xg) / z0
        print(f"centered m2 lam={lam:<5}", repr(m2))

    # Variance-based map derivative at m=0: (alpha/lam) Var.
    for lam in (0.40, 0.45694, 0.50):
        print(f"Phi'(0) lam={lam:<8}", repr(gibbs_var_trapz(0.0, lam) / lam))

    # Large-lam uniqueness check: Phi'(0) < 1 at lam = 5 for a range of alpha.
    for alpha in (0.5, 1.0, 2.0, 4.0):
        d = alpha / 5.0 * gibbs_var_trapz(0.0, 5.0, alpha, radius=12.0)
        print(f"Phi'(0) lam=5 alpha={alpha:<4}", repr(d))
