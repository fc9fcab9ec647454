import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from conftest import still
from rydberg_sps import decay as dc
from rydberg_sps.config import PhysicalConfig
from rydberg_sps.ensemble import AtomSet
from rydberg_sps.errors import GroupingError, IntervalError, ResourceError


def random_cloud(rng, n, size=1.0):
    return still(*rng.uniform(-size, size, (n, 3)))


def random_alpha(rng, n):
    a = rng.normal(size=n) + 1j * rng.normal(size=n)
    return a / np.linalg.norm(a)


# -- single excitations ----------------------------------------------------------


def test_lone_atom_decays_exponentially(cfg):
    traj = dc.decay_single([0.6 + 0.8j], still((0, 0, 0)), cfg, (1.0, 1.0 + 5 * cfg.lifetime_tau))
    expected = np.exp(-cfg.gamma * (traj.times - 1.0))
    assert np.max(np.abs(traj.population() / expected - 1)) < 1e-8


def test_window_must_not_run_backwards(cfg):
    with pytest.raises(IntervalError):
        dc.decay_single([1.0], still((0, 0, 0)), cfg, (2.0, 1.0))


def test_amplitude_count_checked(cfg):
    with pytest.raises(ValueError):
        dc.decay_single([1.0, 0.0], still((0, 0, 0)), cfg, (0.0, 1.0))


def test_symmetric_pair_is_superradiant(cfg):
    atoms = still((0, 0, 0), (0, 0, 0))
    traj = dc.decay_single(np.array([1, 1]) / np.sqrt(2), atoms, cfg, (0.0, 2 * cfg.lifetime_tau))
    expected = np.exp(-2 * cfg.gamma * traj.times)
    assert np.max(np.abs(traj.population() - expected)) < 1e-6


def test_antisymmetric_pair_is_dark(cfg):
    atoms = still((0, 0, 0), (0, 0, 0))
    traj = dc.decay_single(np.array([1, -1]) / np.sqrt(2), atoms, cfg, (0.0, 2 * cfg.lifetime_tau))
    assert np.max(np.abs(traj.population() - 1)) < 1e-6


def test_pair_at_finite_distance_matches_eigenmodes(cfg):
    # symmetric/antisymmetric modes decay at gamma (1 +- sinc)
    d = 0.13
    atoms = still((0, 0, 0), (d, 0, 0))
    s = np.sin(cfg.k_emit * d) / (cfg.k_emit * d)
    traj = dc.decay_single([1.0, 0.0], atoms, cfg, (0.0, 40.0))
    t = traj.times
    plus = np.exp(-0.5 * cfg.gamma * (1 + s) * t)
    minus = np.exp(-0.5 * cfg.gamma * (1 - s) * t)
    exact = np.stack([(plus + minus) / 2, (plus - minus) / 2], axis=1)
    assert np.max(np.abs(traj.amplitudes - exact)) < 1e-8


def test_population_never_increases(cfg, rng):
    atoms = random_cloud(rng, 12, 0.3)
    traj = dc.decay_single(random_alpha(rng, 12), atoms, cfg, (0.0, 30.0))
    assert np.all(np.diff(traj.population()) <= 1e-12)


def test_wall_hit_freezes_amplitude(cfg):
    # atom 1 leaves at t = 5 ns; afterwards atom 0 decays alone
    atoms = AtomSet(np.zeros((2, 3)), np.zeros((2, 3)), np.array([np.inf, 5.0]))
    traj = dc.decay_single(np.array([1, 1]) / np.sqrt(2), atoms, cfg, (0.0, 20.0))
    i5 = int(np.argmin(np.abs(traj.times - 5.0)))
    frozen = traj.amplitudes[i5, 1]
    after = traj.times > 5.0
    assert np.allclose(traj.amplitudes[after, 1], frozen, rtol=0, atol=1e-15)
    a0 = traj.amplitudes[i5, 0] * np.exp(-0.5 * cfg.gamma * (traj.times[after] - 5.0))
    assert np.allclose(traj.amplitudes[after, 0], a0, rtol=1e-8)
    assert traj.lost_to_walls()[-1] == pytest.approx(abs(frozen) ** 2)
    assert len(traj.segments) == 2


def test_no_active_atoms_leaves_everything_frozen(cfg):
    atoms = AtomSet(np.zeros((1, 3)), np.zeros((1, 3)), np.array([0.5]))
    traj = dc.decay_single([1.0], atoms, cfg, (1.0, 3.0))
    assert np.allclose(traj.population(), 1.0)


# -- kernels and angular densities ---------------------------------------------


def test_pair_sinc_follows_ballistic_distance(cfg):
    atoms = AtomSet(np.array([[0, 0, 0], [0.0, 0, 0]]), np.array([[0, 0, 0], [0.01, 0, 0]]),
                    np.full(2, np.inf))
    geo = dc.PairGeometry(atoms)
    k = cfg.k_emit
    assert np.array_equal(geo.sinc(k, 0.0), np.ones((2, 2)))
    x = k * 0.01 * 30.0
    assert geo.sinc(k, 30.0)[0, 1] == pytest.approx(np.sin(x) / x, rel=1e-14)
    assert np.allclose(geo.restrict([1]).sinc(k, 30.0), 1.0)


def test_clenshaw_curtis_integrates_polynomials():
    w = dc.clenshaw_curtis_weights(dc.THETA_POINTS)
    x = np.cos(dc.theta_grid())
    assert w.sum() == pytest.approx(2.0, abs=1e-14)
    assert w @ x**6 == pytest.approx(2 / 7, abs=1e-14)


def test_kernel_integrates_to_sinc(cfg, rng):
    k = cfg.k_emit
    par = rng.uniform(-3, 3, 1000)
    perp = rng.uniform(0, 3, 1000)
    got = dc.kernel_integral(k, par, perp)
    x = k * np.hypot(par, perp)
    want = np.sin(x) / x
    scale = np.maximum(np.abs(want), 1e-3)
    assert np.max(np.abs(got - want) / scale) < 1e-6


@settings(max_examples=30, deadline=None)
@given(par=st.floats(-2, 2), perp=st.floats(0, 2))
def test_kernel_against_adaptive_quadrature(par, perp):
    k = PhysicalConfig().k_emit

    def part(th, f):
        return f(0.5 * np.sin(th) * dc.angular_kernel(k, par, perp, th)).item()

    re = quad(part, 0, np.pi, args=(np.real,), limit=200, epsabs=1e-12)[0]
    im = quad(part, 0, np.pi, args=(np.imag,), limit=200, epsabs=1e-12)[0]
    got = dc.kernel_integral(k, np.array([par]), np.array([perp]))[0]
    assert abs(got - (re + 1j * im)) < 1e-8


def test_lone_atom_emits_isotropically(cfg):
    traj = dc.decay_single([1.0], still((0, 0, 0)), cfg, (0.0, 12 * cfg.lifetime_tau), dt=0.05)
    prof = dc.angular_density(traj)
    emitted = 1 - traj.population()[-1]
    assert np.allclose(prof.at(), 0.5 * np.sin(prof.theta) * emitted, atol=1e-9)
    assert prof.total() == pytest.approx(1.0, abs=1e-5)


def test_conservation_before_wall_events(cfg, rng):
    atoms = random_cloud(rng, 10, 0.5)
    alpha = random_alpha(rng, 10)
    traj = dc.decay_single(alpha, atoms, cfg, (0.0, cfg.lifetime_tau))
    prof = dc.angular_density(traj)
    defect = prof.totals() + traj.population() - 1.0
    assert np.max(np.abs(defect)) < 1e-5


def test_density_nonnegative(cfg, rng):
    atoms = random_cloud(rng, 8, 0.4)
    traj = dc.decay_single(random_alpha(rng, 8), atoms, cfg, (0.0, 20.0))
    p = dc.angular_density(traj).density
    assert p.min() >= -1e-6 * p.max()


def test_rate_matches_slope_of_emitted_population(cfg, rng):
    atoms = random_cloud(rng, 6, 0.3)
    traj = dc.decay_single(random_alpha(rng, 6), atoms, cfg, (0.0, 15.0))
    prof = dc.angular_density(traj)
    t, rate = dc.emission_rate(traj)
    slope = np.gradient(prof.totals(), t, edge_order=2) / cfg.gamma
    assert np.max(np.abs(slope - rate)[2:-2]) < 1e-4 * rate.max()


def test_forward_cone_grid_stops_at_limit(cfg):
    theta = dc.theta_grid(theta_max=np.pi / 6)
    assert theta[-1] >= np.pi / 6 and theta[-2] < np.pi / 6
    traj = dc.decay_single([1.0], still((0, 0, 0)), cfg, (0.0, 1.0))
    prof = dc.angular_density(traj, theta_max=np.pi / 6)
    with pytest.raises(ValueError):
        prof.total()


def test_angular_csv(cfg, tmp_path):
    traj = dc.decay_single([1.0], still((0, 0, 0)), cfg, (0.0, 1.0))
    prof = dc.angular_density(traj, theta_points=11)
    path = tmp_path / "p.csv"
    prof.to_csv(path, ensemble_id=3)
    prof.to_csv(path, ensemble_id=4, append=True)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta_rad,p_per_rad,ensemble_id"
    assert len(lines) == 23 and lines[-1].endswith(",4")


# -- rates -----------------------------------------------------------------------


def test_lone_atom_rate_is_exponential(cfg):
    traj = dc.decay_single([1j], still((0, 0, 0)), cfg, (2.0, 40.0))
    t, rate = dc.emission_rate(traj)
    assert np.allclose(rate, np.exp(-cfg.gamma * (t - 2.0)), rtol=1e-10)


def test_symmetric_pair_starts_twice_as_fast(cfg):
    atoms = still((0, 0, 0), (0, 0, 0))
    traj = dc.decay_single(np.array([1, 1]) / np.sqrt(2), atoms, cfg, (0.0, 1.0))
    assert dc.emission_rate(traj)[1][0] == pytest.approx(2.0, rel=1e-12)


def test_stored_flux_matches_recomputation(cfg, rng):
    atoms = AtomSet(rng.uniform(-0.3, 0.3, (7, 3)), rng.normal(0, 0.01, (7, 3)),
                    np.array([np.inf, 3.0, np.inf, 8.0, np.inf, np.inf, 11.0]))
    for traj in (dc.decay_single(random_alpha(rng, 7), atoms, cfg, (0.0, 15.0)),
                 dc.decay_double(random_alpha(rng, 21), atoms, cfg, (0.0, 15.0))):
        fresh = dataclasses.replace(traj, flux=None)
        assert np.allclose(dc._sinc_contraction(fresh), traj.flux, atol=1e-12)


def test_zero_start_gives_zero_rate(cfg):
    traj = dc.decay_single([0.0, 0.0], still((0, 0, 0), (1, 0, 0)), cfg, (0.0, 1.0))
    assert not dc.emission_rate(traj)[1].any()


def test_peak():
    assert dc.peak(np.array([0.0, 1.0, 2.0]), np.array([1.0, 3.0, 2.0])) == (1.0, 3.0)


# -- double excitations ----------------------------------------------------------


def test_pair_packing_round_trip(rng):
    a = rng.normal(size=10) + 1j * rng.normal(size=10)
    m = dc.pairs_to_matrix(a, 5)
    assert np.allclose(m, m.T) and not np.diag(m).any()
    assert np.array_equal(dc.matrix_to_pairs(m), a)


def test_bad_pair_count_is_an_index_error():
    with pytest.raises(IndexError):
        dc.pairs_to_matrix(np.ones(4), 4)


def test_far_pair_decays_at_twice_gamma(cfg):
    atoms = still((0, 0, 0), (50, 0, 0))
    traj = dc.decay_double([1.0], atoms, cfg, (0.0, 60.0))
    expected = np.exp(-2 * cfg.gamma * traj.times)
    assert np.max(np.abs(traj.population() - expected)) < 1e-3


def test_coincident_pair_matches_single_mode_ode(cfg):
    # one pair: d/dt a = -(gamma/2) (a + a), whatever the distance
    atoms = still((0, 0, 0), (0, 0, 0))
    traj = dc.decay_double([0.3 - 0.4j], atoms, cfg, (0.0, 30.0))
    exact = (0.3 - 0.4j) * np.exp(-cfg.gamma * traj.times)
    assert np.max(np.abs(traj.amplitudes[:, 0, 1] - exact)) < 1e-10


def test_coincident_triple_two_excitation_dicke_rate(cfg):
    atoms = still(*[(0, 0, 0)] * 3)
    traj = dc.decay_double(np.ones(3) / np.sqrt(3), atoms, cfg, (0.0, 20.0))
    assert np.allclose(traj.population(), np.exp(-4 * cfg.gamma * traj.times), atol=1e-9)


@pytest.mark.parametrize("n", [2, 4, 7])
def test_zero_doubles_stay_zero(cfg, rng, n):
    atoms = random_cloud(rng, n)
    traj = dc.decay_double(np.zeros(n * (n - 1) // 2), atoms, cfg, (0.0, 5.0))
    assert not traj.amplitudes.any()
    assert not dc.second_photon_rate(traj)[1].any()


def test_double_population_never_increases(cfg, rng):
    atoms = random_cloud(rng, 6, 0.3)
    traj = dc.decay_double(random_alpha(rng, 15), atoms, cfg, (0.0, 20.0))
    assert np.all(np.diff(traj.population()) <= 1e-12)


def test_first_photon_of_single_pair_is_isotropic(cfg):
    atoms = still((0, 0, 0), (0.2, 0.1, 0.3))
    traj = dc.decay_double([1.0], atoms, cfg, (0.0, 5 * cfg.lifetime_tau), dt=0.05)
    prof = dc.first_photon_density(traj)
    ratio = prof.per_solid_angle[-1]
    assert np.allclose(ratio, ratio[0], rtol=1e-10)


def test_first_photon_requires_double(cfg):
    traj = dc.decay_single([1.0], still((0, 0, 0)), cfg, (0.0, 1.0))
    with pytest.raises(ValueError):
        dc.first_photon_density(traj)
    with pytest.raises(ValueError):
        dc.second_photon_rate(traj)


def test_budget_guard(cfg, monkeypatch):
    atoms = still(*[(i, 0, 0) for i in range(4)])
    traj = dc.decay_double(np.ones(6) / np.sqrt(6), atoms, cfg, (0.0, 1.0))
    monkeypatch.setenv(dc.BUDGET_ENV, "100")
    with pytest.raises(ResourceError):
        dc.first_photon_density(traj)
    monkeypatch.setenv(dc.BUDGET_ENV, "1e9")
    dc.first_photon_density(traj, theta_points=21)


def test_far_pair_second_photon_peaks_near_ln2_over_gamma(cfg):
    atoms = still((0, 0, 0), (50, 0, 0))
    traj = dc.decay_double([1.0], atoms, cfg, (0.0, 5 * cfg.lifetime_tau), dt=0.02)
    t, rate = dc.second_photon_rate(traj)
    g = cfg.gamma
    assert np.allclose(rate, 2 * (1 - np.exp(-g * t)) * np.exp(-g * t), atol=1e-6)
    t_peak = dc.peak(t, rate)[0]
    assert t_peak == pytest.approx(np.log(2) / g, abs=0.02)


def test_wall_cutoff_moves_second_photon_peak_earlier(cfg):
    atoms = AtomSet(np.array([[0, 0, 0], [50, 0, 0.0]]), np.zeros((2, 3)), np.array([10.0, np.inf]))
    traj = dc.decay_double([1.0], atoms, cfg, (0.0, 60.0), dt=0.02)
    t_peak = dc.peak(*dc.second_photon_rate(traj))[0]
    assert t_peak < 0.8 * np.log(2) / cfg.gamma
    assert traj.lost_to_walls()[-1] > 0.4


# -- grouping and cones ----------------------------------------------------------


def test_group_of_one_is_identity(rng):
    samples = [(random_cloud(rng, 3), random_alpha(rng, 3)) for _ in range(4)]
    grouped = dc.group_samples(samples, 1)
    for (a, al), (b, bl) in zip(samples, grouped):
        assert np.array_equal(a.positions, b.positions) and np.array_equal(al, bl)


def test_grouping_keeps_mean_norm(rng):
    samples = []
    for _ in range(100):
        al = rng.normal(size=100) + 1j * rng.normal(size=100)
        samples.append((random_cloud(rng, 100), al * rng.uniform(0.5, 1) / np.linalg.norm(al)))
    grouped = dc.group_samples(samples, 10)
    assert len(grouped) == 10
    for g, (atoms, alpha) in enumerate(grouped):
        assert atoms.n_atoms == 1000
        mean = np.mean([np.sum(np.abs(a) ** 2) for _, a in samples[10 * g:10 * g + 10]])
        assert np.sum(np.abs(alpha) ** 2) == pytest.approx(mean, rel=1e-12)


@pytest.mark.parametrize("size", [7, 0, 3])
def test_group_size_must_divide(rng, size):
    samples = [(random_cloud(rng, 1), np.ones(1))] * 100
    with pytest.raises(GroupingError):
        dc.group_samples(samples, size)


def isotropic_profile(theta_max=None):
    theta = dc.theta_grid(theta_max=theta_max)
    per = np.full((1, len(theta)), 0.5)
    return dc.AngularProfile(theta, np.zeros(1), np.sin(theta) * per, theta_max is None, per)


def test_cone_over_full_sphere_is_total():
    prof = isotropic_profile()
    assert dc.cone_population(prof, np.pi) == pytest.approx(prof.total(), abs=1e-4)


def test_isotropic_forward_cone_fraction():
    prof = isotropic_profile()
    assert dc.isotropic_cone_fraction(np.pi / 6) == pytest.approx(0.0669873, abs=1e-7)
    assert dc.cone_population(prof, np.pi / 6) == pytest.approx(0.0669873, abs=2e-5)


def test_cone_between_grid_points_interpolates():
    prof = isotropic_profile()
    theta = 0.123
    assert dc.cone_population(prof, theta) == pytest.approx(dc.isotropic_cone_fraction(theta), abs=1e-5)


@pytest.mark.parametrize("bad", [-0.1, 3.2])
def test_cone_angle_out_of_range(bad):
    with pytest.raises(ValueError):
        dc.cone_population(isotropic_profile(), bad)


def test_cone_beyond_truncated_grid():
    with pytest.raises(ValueError):
        dc.cone_population(isotropic_profile(np.pi / 6), np.pi / 3)


def test_series_csv(tmp_path):
    path = tmp_path / "rate.csv"
    dc.write_series_csv(path, ("t_ns", "rate"), [0.0, 0.5], [1.0, 0.25], ensemble_id=2)
    assert path.read_text().splitlines() == ["t_ns,rate,ensemble_id", "0.0,1.0,2", "0.5,0.25,2"]
