import numpy as np
import pytest

from vfp import kernels, rng
from vfp.errors import BlowUp
from vfp.kernels import numpy_kernels
from vfp.particles import (Observers, ParticleEnsemble, SimConfig, ks_distance,
                           run, step_kinetic, step_overdamped)
from vfp.potentials import ConfiningPotential, InteractionPotential
from vfp.selfconsistent import (SelfConsistencyProblem, find_fixed_points,
                                stationary_density)

DOUBLE_WELL = ConfiningPotential.double_well()
QUAD_PSI = InteractionPotential.quadratic(1.0)
NO_PSI = InteractionPotential.quadratic(0.0)
FREE = ConfiningPotential([0.0, 0.0])  # identically zero confinement


# ---------------------------------------------------------------------------
# random stream

def test_stream_is_stateless_and_reproducible():
    key = rng.derive_key(123)
    counters = np.arange(1000, dtype=rng.U64)
    a = rng.normals(key, counters)
    b = rng.normals(key, counters)
    np.testing.assert_array_equal(a, b)
    c = rng.normals(rng.derive_key(124), counters)
    assert np.max(np.abs(a - c)) > 1e-3


def test_stream_distribution():
    key = rng.derive_key(2024)
    z = rng.normals(key, np.arange(200_000, dtype=rng.U64))
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    assert abs(np.mean(z ** 3)) < 0.02
    assert abs(np.mean(z ** 4) - 3.0) < 0.05


def test_stream_order_independent():
    key = rng.derive_key(5)
    counters = np.arange(64, dtype=rng.U64)
    forward = rng.normals(key, counters)
    backward = rng.normals(key, counters[::-1])[::-1]
    np.testing.assert_array_equal(forward, backward)


def test_step_counters_disjoint():
    a = rng.step_counters(3, 100, 2)
    b = rng.step_counters(4, 100, 2)
    assert int(a[-1]) + 1 == int(b[0])


# ---------------------------------------------------------------------------
# single steps

def test_free_flight_positions_exact():
    # zero confinement, zero coupling, zero temperature: pure transport in q,
    # while the friction term still damps p by the exact Euler factor
    ens = ParticleEnsemble.create(8, seed=1, positions=np.linspace(-1, 1, 8)[:, None],
                                  momenta=0.7)
    q0 = ens.positions.copy()
    p0 = ens.momenta.copy()
    dt = 1e-3
    step_kinetic(ens, FREE, NO_PSI, 0.0, dt)
    np.testing.assert_array_equal(ens.positions, q0 + p0 * dt)
    np.testing.assert_array_equal(ens.momenta, p0 - p0 * dt)


def test_two_particle_interaction_antisymmetric():
    q = np.array([0.3, -1.1])
    drift = numpy_kernels["pairwise_drift"](q, QUAD_PSI.grad_coeffs())
    assert drift[0] + drift[1] == 0.0
    # mean-field closure gives the identical forces
    expected = 1.0 * (q - q.mean())
    np.testing.assert_allclose(drift, expected, atol=1e-15)


@pytest.mark.parametrize("psi", [QUAD_PSI,
                                 InteractionPotential.even_polynomial(
                                     [0, 0, 0, 0, 0.25])])
def test_moment_closure_matches_pairwise(psi):
    # the O(N) moment path and the O(N^2) oracle agree step for step
    rng_np = np.random.default_rng(3)
    q0 = rng_np.normal(0.0, 0.8, 48)
    a = ParticleEnsemble.create(48, seed=9, positions=q0[:, None], momenta=0.1)
    b = ParticleEnsemble.create(48, seed=9, positions=q0[:, None], momenta=0.1)
    for _ in range(25):
        step_kinetic(a, DOUBLE_WELL, psi, 0.4, 1e-3)
        step_kinetic(b, DOUBLE_WELL, psi, 0.4, 1e-3, pairwise=True)
    np.testing.assert_allclose(a.positions, b.positions, rtol=1e-11, atol=1e-13)
    np.testing.assert_allclose(a.momenta, b.momenta, rtol=1e-11, atol=1e-13)


def test_zero_temperature_rests_at_minimum():
    ens = ParticleEnsemble.create(16, seed=0, positions=1.0, kinetic=False)
    for _ in range(100):
        step_overdamped(ens, DOUBLE_WELL, QUAD_PSI, 0.0, 1e-2)
    np.testing.assert_array_equal(ens.positions, np.ones((16, 1)))


def test_energy_defect_second_order():
    # without noise the scheme's energy error beyond the exact dissipation
    # identity is O(dt^2) per step: over a fixed horizon it scales like dt
    def defect(dt, steps):
        ens = ParticleEnsemble.create(1, seed=0, positions=1.5, momenta=0.8)
        dissipated = 0.0
        h0 = 0.5 * ens.momenta[0, 0] ** 2 + DOUBLE_WELL(ens.positions[0, 0])
        for _ in range(steps):
            dissipated += ens.momenta[0, 0] ** 2 * dt
            step_kinetic(ens, DOUBLE_WELL, NO_PSI, 0.0, dt)
        h1 = 0.5 * ens.momenta[0, 0] ** 2 + DOUBLE_WELL(ens.positions[0, 0])
        return abs(h1 - h0 + dissipated)

    coarse = defect(1e-3, 1000)
    fine = defect(5e-4, 2000)
    assert coarse < 5e-3
    assert 1.6 <= coarse / fine <= 2.5


def test_blowup_raises_with_step_index():
    ens = ParticleEnsemble.create(4, seed=0, positions=3.0, momenta=0.0)
    with pytest.raises(BlowUp) as err:
        for _ in range(50):
            step_kinetic(ens, DOUBLE_WELL, QUAD_PSI, 0.5, 1.0)
    assert err.value.step_index is not None
    assert err.value.step_index >= 1


def test_dimension_two_runs():
    ens = ParticleEnsemble.create(32, d=2, seed=4, positions=0.5, momenta=0.0)
    for _ in range(10):
        step_kinetic(ens, DOUBLE_WELL, QUAD_PSI, 0.3, 1e-3)
    assert ens.positions.shape == (32, 2)
    assert np.all(np.isfinite(ens.positions))
    with pytest.raises(NotImplementedError):
        step_kinetic(ParticleEnsemble.create(8, d=2, seed=1, momenta=0.0),
                     DOUBLE_WELL,
                     InteractionPotential.even_polynomial([0, 0, 0, 0, 1.0]),
                     0.3, 1e-3)


# ---------------------------------------------------------------------------
# runs and reports

def test_run_reproducible_bytes():
    cfg = SimConfig(dt=1e-3, steps=400, burn_in_steps=200, mode="kinetic",
                    lam=0.5, seed=77)
    reports = []
    for _ in range(2):
        ens = ParticleEnsemble.create(256, seed=77, positions=1.0, momenta=0.0)
        reports.append(run(ens, cfg, DOUBLE_WELL, QUAD_PSI).to_json())
    assert reports[0] == reports[1]
    other = run(ParticleEnsemble.create(256, seed=78, positions=1.0, momenta=0.0),
                cfg, DOUBLE_WELL, QUAD_PSI).to_json()
    assert other != reports[0]


def test_run_matches_manual_stepping():
    cfg = SimConfig(dt=1e-3, steps=50, burn_in_steps=10, mode="overdamped",
                    lam=0.3, seed=5)
    ens = ParticleEnsemble.create(64, seed=5, positions=0.2, kinetic=False)
    run(ens, cfg, DOUBLE_WELL, QUAD_PSI)
    manual = ParticleEnsemble.create(64, seed=5, positions=0.2, kinetic=False)
    for _ in range(50):
        step_overdamped(manual, DOUBLE_WELL, QUAD_PSI, 0.3, 1e-3)
    np.testing.assert_array_equal(ens.positions, manual.positions)


def test_run_report_shapes():
    cfg = SimConfig(dt=1e-3, steps=100, burn_in_steps=40, mode="kinetic",
                    lam=0.5, seed=1)
    ens = ParticleEnsemble.create(128, seed=1, positions=0.0, momenta=0.0)
    report = run(ens, cfg, DOUBLE_WELL, QUAD_PSI,
                 Observers(record_every=5, histogram_bins=31))
    assert report.times.size == len(range(40, 100, 5))
    assert set(report.series) == {"q_mean", "q_var", "q_central2",
                                  "p_mean", "p_var"}
    assert report.histogram_counts.sum() == 128
    assert report.histogram_edges.size == 32


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0, steps=10, burn_in_steps=0, mode="kinetic", lam=0.5)
    with pytest.raises(ValueError):
        SimConfig(dt=1e-3, steps=10, burn_in_steps=10, mode="kinetic", lam=0.5)
    with pytest.raises(ValueError):
        SimConfig(dt=1e-3, steps=10, burn_in_steps=0, mode="leapfrog", lam=0.5)


def test_stiffness_warning():
    cfg = SimConfig(dt=1.0, steps=10, burn_in_steps=0, mode="kinetic", lam=0.5)
    with pytest.warns(UserWarning):
        cfg.warn_if_stiff(DOUBLE_WELL)


def test_overdamped_ou_variance():
    # V = x^2/2 without interaction is the classic linear SDE: variance lam
    cfg = SimConfig(dt=1e-3, steps=20_000, burn_in_steps=10_000,
                    mode="overdamped", lam=0.3, seed=11)
    ens = ParticleEnsemble.create(1000, seed=11, positions=0.0, kinetic=False)
    report = run(ens, cfg,
                 ConfiningPotential([0, 0, 0.5]), NO_PSI,
                 Observers(record_every=10))
    target = 0.3
    n_eff = 1000 * 10  # particles x roughly-independent snapshots
    tol = 3.0 * target * np.sqrt(2.0 / n_eff) + 0.01 * target
    assert abs(report.summary["q_var"] - target) < tol


def test_basin_selection_below_transition():
    lam = 0.05
    prob = SelfConsistencyProblem(DOUBLE_WELL, QUAD_PSI, lam)
    mstar = float(find_fixed_points(prob).means.max())
    cfg = SimConfig(dt=1e-3, steps=20_000, burn_in_steps=10_000,
                    mode="kinetic", lam=lam, seed=21)
    means = {}
    for side, start in (("left", -1.0), ("right", 1.0)):
        ens = ParticleEnsemble.create(500, seed=21, positions=start, momenta=0.0)
        report = run(ens, cfg, DOUBLE_WELL, QUAD_PSI)
        means[side] = report.summary["q_mean"]
    assert means["left"] < 0.0 < means["right"]
    assert abs(means["right"] - mstar) < 0.02
    assert abs(means["left"] + mstar) < 0.02


@pytest.fixture(scope="module")
def big_runs():
    """Kinetic and overdamped runs at matched settings (spec-scale).

    The stationary law is estimated by pooling snapshots over the second half
    of each run: a single final snapshot carries the collective fluctuation
    of the ensemble mean (amplified this close to the transition), which the
    time average suppresses.
    """
    lam, n, total_time, dt = 0.5, 10_000, 200.0, 1e-3
    steps = int(round(total_time / dt))
    out = {}
    for mode in ("kinetic", "overdamped"):
        cfg = SimConfig(dt=dt, steps=steps, burn_in_steps=steps // 2,
                        mode=mode, lam=lam, seed=2027)
        ens = ParticleEnsemble.create(n, seed=2027, positions=0.0,
                                      momenta=0.0 if mode == "kinetic" else None,
                                      kinetic=(mode == "kinetic"))
        report = run(ens, cfg, DOUBLE_WELL, QUAD_PSI,
                     Observers(sample_every=1000))
        out[mode] = (report, ens)
    return out


def test_two_simulators_share_the_position_marginal(big_runs):
    q_kin = big_runs["kinetic"][0].samples
    ref = np.sort(big_runs["overdamped"][0].samples)

    def empirical_cdf(x):
        return np.searchsorted(ref, x, side="right") / ref.size

    assert ks_distance(q_kin, empirical_cdf) < 0.02


def test_kinetic_histogram_matches_quadrature_cdf(big_runs):
    prob = SelfConsistencyProblem(DOUBLE_WELL, QUAD_PSI, 0.5)
    measure = stationary_density(prob, 0.0)
    assert ks_distance(big_runs["kinetic"][0].samples, measure.cdf) < 0.02


def test_kinetic_momentum_variance(big_runs):
    report = big_runs["kinetic"][0]
    assert abs(report.summary["p_var"] - 0.5) < 0.02 * 0.5


def test_ks_distance_helper():
    samples = np.linspace(0.005, 0.995, 100)
    assert ks_distance(samples, lambda x: x) < 0.011
    assert ks_distance(samples, lambda x: np.clip(x - 0.2, 0, 1)) > 0.15


# ---------------------------------------------------------------------------
# backend equivalence

def test_backends_agree_on_short_trajectories():
    key = rng.derive_key(17)
    n, steps, lam, dt = 256, 200, 0.5, 1e-3
    drift = np.array([0.0, -1.0, 0.0, 1.0])
    start = np.random.default_rng(17).normal(1.0, 0.1, n)

    q_a, p_a = start.copy(), np.zeros(n)
    q_b, p_b = start.copy(), np.zeros(n)
    for s in range(steps):
        counter0 = rng.U64(s) * rng.U64(n)
        kernels.kinetic_1d(q_a, p_a, drift, lam, dt, key, counter0)
        numpy_kernels["kinetic_1d"](q_b, p_b, drift, lam, dt, key, counter0)
    np.testing.assert_allclose(q_a, q_b, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(p_a, p_b, rtol=1e-10, atol=1e-12)


def test_backend_flag_reported():
    assert kernels.backend_name() in ("numba", "numpy")
    if not kernels.FORCE_NUMPY:
        assert kernels.backend_name() == "numba"
