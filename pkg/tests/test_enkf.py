import numpy as np
import pytest

from moldflux import (ConfigurationError, HeatSolver, KernelSpec,
                      MeasurementBatch, NoiseSpec, NumericalError, PriorSpec,
                      build_basis, build_grid, ensemble_update, forecast,
                      init_ensemble, run_assimilation)
from moldflux.enkf import JointEnsemble, redraw_weights
from moldflux.heat import FluxField, MaterialProps, StateField

from conftest import MOLD_PROPS


@pytest.fixture(scope="module")
def toy():
    """Tiny grid + basis + solver for filter mechanics."""
    grid = build_grid(0.4, 0.04, 0.4, 2, 4, 2)
    props = MaterialProps(**MOLD_PROPS)
    basis = build_basis([(0.1, 0.1), (0.3, 0.3)], grid, KernelSpec("gaussian", 2.0))
    return grid, props, HeatSolver(grid, props), basis


def make_prior(n_w=2, kappa=0.2, shift=0.0, state_var=10.0):
    return PriorSpec(weight_mean=np.array([-1500.0, -900.0][:n_w]),
                     kappa=kappa, shift=shift, state_mean=400.0,
                     state_var=state_var)


# -- init ---------------------------------------------------------------------

def test_init_degenerate_prior_collapses_to_means(toy):
    grid, props, solver, basis = toy
    prior = make_prior(kappa=0.0, shift=0.0, state_var=0.0)
    ens = init_ensemble(prior, basis, grid, 5, seed=1)
    assert np.all(ens.weights == prior.weight_mean)
    assert np.all(ens.states == 400.0)


def test_init_shift_scales_mean(toy):
    grid, props, solver, basis = toy
    prior = make_prior(kappa=0.0, shift=0.3, state_var=0.0)
    ens = init_ensemble(prior, basis, grid, 4, seed=1)
    assert np.allclose(ens.weights, 1.3 * prior.weight_mean)


def test_init_sample_variance_tracks_kappa(toy):
    grid, props, solver, basis = toy
    prior = make_prior(kappa=0.2)
    ens = init_ensemble(prior, basis, grid, 300, seed=5)
    target = prior.kappa * np.abs(prior.weight_mean)
    sample = ens.weights.var(axis=0)
    assert np.all(np.abs(sample - target) / target < 0.25)


def test_init_requires_two_members(toy):
    grid, props, solver, basis = toy
    with pytest.raises(ConfigurationError):
        init_ensemble(make_prior(), basis, grid, 1, seed=0)


# -- forecast -----------------------------------------------------------------

def test_forecast_deterministic_when_q_zero(toy):
    grid, props, solver, basis = toy
    prior = make_prior(kappa=0.0, state_var=0.0)
    ens = init_ensemble(prior, basis, grid, 3, seed=2)
    noise = NoiseSpec(q_var=0.0, r_var=0.034)
    out = forecast(ens, solver, basis, noise, dt=0.1, seed=2, step_index=1)
    assert np.all(out.states == out.states[0])  # identical members
    assert np.array_equal(out.weights, ens.weights)
    assert out.time == pytest.approx(0.1)


def test_forecast_matches_hand_stepped_oracle(toy):
    grid, props, solver, basis = toy
    prior = make_prior(kappa=0.1, state_var=4.0)
    ens = init_ensemble(prior, basis, grid, 2, seed=3)
    noise = NoiseSpec(q_var=0.0, r_var=0.034)
    out = forecast(ens, solver, basis, noise, dt=0.2, seed=3, step_index=1)
    for i in range(2):
        flux = FluxField(ens.weights[i] @ basis.phi)
        manual = solver.step(StateField(ens.states[i]), flux, 0.2)
        assert np.allclose(out.states[i], manual.values, atol=1e-12)


def test_forecast_zero_flux_no_cooling_adds_noise_only(toy):
    grid, props, solver, basis = toy
    props0 = MaterialProps(**{**MOLD_PROPS, "h": 0.0})
    solver0 = HeatSolver(grid, props0)
    prior = PriorSpec(weight_mean=np.zeros(2), kappa=0.0, shift=0.0,
                      state_mean=400.0, state_var=0.0)
    ens = init_ensemble(prior, basis, grid, 3, seed=4)
    out = forecast(ens, solver0, basis, NoiseSpec(0.5, 0.034), 0.1, seed=4, step_index=1)
    # uniform field, zero flux, no cooling: any deviation from 400 is noise
    dev = out.states - 400.0
    assert np.abs(dev).max() < 10 * np.sqrt(0.5)
    assert np.abs(dev).max() > 1e-3


def test_forecast_never_touches_weights(toy):
    grid, props, solver, basis = toy
    ens = init_ensemble(make_prior(kappa=0.3), basis, grid, 6, seed=9)
    out = forecast(ens, solver, basis, NoiseSpec(0.5, 0.034), 0.1, seed=9, step_index=1)
    assert np.array_equal(out.weights, ens.weights)


def test_redraw_never_touches_states(toy):
    grid, props, solver, basis = toy
    ens = init_ensemble(make_prior(kappa=0.3), basis, grid, 6, seed=9)
    before = ens.states.copy()
    w = redraw_weights(ens.weights.mean(axis=0), make_prior(kappa=0.3), 6,
                       seed=9, cycle=1, beta=0)
    assert w.shape == ens.weights.shape
    assert np.array_equal(ens.states, before)


# -- ensemble update core -----------------------------------------------------

def test_update_with_constant_predictions_is_identity():
    rng = np.random.default_rng(0)
    psi = rng.standard_normal((20, 4))
    predicted = np.ones((20, 3))
    post, diag = ensemble_update(psi, predicted, np.array([1.0, 2.0, 0.5]))
    assert np.array_equal(post, psi)
    assert diag.gain_residual == 0.0


def test_update_with_huge_r_keeps_prior():
    # gain -> 0 as R -> inf; residual drift is the O(sigma_psi/S) sampling
    # term, so the ensemble must be large enough for the 1e-3 bound
    rng = np.random.default_rng(1)
    s_n = 10_000
    prior_mean = 400.0
    psi = prior_mean + rng.standard_normal((s_n, 1)) * 1.0
    big_r = 1e9 * 0.034
    predicted = psi + rng.standard_normal((s_n, 1)) * np.sqrt(big_r)
    post, _ = ensemble_update(psi, predicted, np.array([450.0]))
    assert abs(post.mean() - psi.mean()) < 1e-3


def scalar_kalman_error(s_n, seed):
    """|ensemble posterior mean - exact Kalman posterior mean| for the
    1-state, 1-observation linear-Gaussian problem."""
    mu0, var0, r, y = 10.0, 4.0, 1.0, 16.0
    exact = mu0 + var0 / (var0 + r) * (y - mu0)
    rng = np.random.default_rng(seed)
    x = mu0 + np.sqrt(var0) * rng.standard_normal((s_n, 1))
    predicted = x + np.sqrt(r) * rng.standard_normal((s_n, 1))
    post, _ = ensemble_update(x, predicted, np.array([y]))
    return abs(post.mean() - exact)


def test_scalar_kalman_oracle_convergence():
    err = scalar_kalman_error(10_000, seed=0)
    mu0, var0, r, y = 10.0, 4.0, 1.0, 16.0
    exact = mu0 + var0 / (var0 + r) * (y - mu0)
    assert err / abs(exact) < 0.05


def test_scalar_kalman_error_decays_like_sqrt_s():
    sizes = (100, 1_000, 10_000)
    means = [np.mean([scalar_kalman_error(s, seed) for seed in range(40)])
             for s in sizes]
    assert means[0] > means[1] > means[2]
    # ratio per decade should sit near sqrt(10) ~ 3.16
    for a, b in zip(means, means[1:]):
        assert 1.5 < a / b < 7.0


def test_update_mean_identity_and_gain_consistency():
    rng = np.random.default_rng(6)
    s_n, dim, m = 50, 7, 3
    psi = rng.standard_normal((s_n, dim))
    predicted = psi[:, :m] + 0.1 * rng.standard_normal((s_n, m))
    y = np.array([0.5, -0.2, 0.1])
    post, diag = ensemble_update(psi, predicted, y)
    assert diag.gain_residual < 1e-8

    # mean(post) = mean(prior) + K (y - mean(predicted)), by linearity
    y_c = predicted - predicted.mean(axis=0)
    p_c = psi - psi.mean(axis=0)
    gain = np.linalg.solve((y_c.T @ y_c) / s_n, (p_c.T @ y_c / s_n).T).T
    expected_mean = psi.mean(axis=0) + gain @ (y - predicted.mean(axis=0))
    assert np.allclose(post.mean(axis=0), expected_mean, atol=1e-10)


def test_update_singular_covariance_aborts():
    rng = np.random.default_rng(2)
    psi = rng.standard_normal((5, 8))          # 5 members
    predicted = psi + 0.0                      # 8 observations: rank <= 4
    with pytest.raises(NumericalError) as err:
        ensemble_update(psi, predicted, np.zeros(8))
    assert err.value.details["condition"] > 1e12


def test_update_shape_validation():
    with pytest.raises(ConfigurationError):
        ensemble_update(np.zeros((4, 2)), np.zeros((5, 2)), np.zeros(2))
    with pytest.raises(ConfigurationError):
        ensemble_update(np.zeros((4, 2)), np.zeros((4, 2)), np.zeros(3))


# -- full assimilation loop ---------------------------------------------------

def small_run(toy, measurements, seed=11, open_loop=False, s_n=25, t_f=1.0):
    grid, props, solver, basis = toy
    layout_pts = [(0.1, 0.02, 0.1), (0.3, 0.02, 0.1), (0.1, 0.02, 0.3),
                  (0.3, 0.02, 0.3)]
    return run_assimilation(
        solver=solver, basis=basis, prior=make_prior(kappa=0.2, state_var=10.0),
        noise=NoiseSpec(0.5, 0.034), sensor_locations=layout_pts,
        measurements=measurements, s_n=s_n, beta_max=1, dt=0.25, obs_span=0.5,
        t_f=t_f, seed=seed, temp_probe=(0.3, 0.02, 0.3), flux_probe=(0.3, 0.0, 0.3),
        open_loop=open_loop)


def fake_batches(times, n_sensors=4, value=402.0):
    return [MeasurementBatch(time=t, readings=np.full(n_sensors, value),
                             sensor_ids=np.arange(n_sensors)) for t in times]


def test_run_without_measurements_is_pure_forecast(toy):
    grid, props, solver, basis = toy
    res = small_run(toy, measurements=[])
    assert res.obs_times.size == 0
    assert not np.isnan(res.forecast_probe).any()
    # matches chaining the public forecast op with the same seed and steps
    prior = make_prior(kappa=0.2, state_var=10.0)
    ens = init_ensemble(prior, basis, grid, 25, seed=11)
    probe_cell = grid.cell_of_point((0.3, 0.02, 0.3))
    trace = [ens.states[:, probe_cell].mean()]
    for step in range(1, 5):
        ens = forecast(ens, solver, basis, NoiseSpec(0.5, 0.034), 0.25,
                       seed=11, step_index=step)
        trace.append(ens.states[:, probe_cell].mean())
    assert np.allclose(res.forecast_probe, trace, atol=1e-12)


def test_update_every_step_degenerate_schedule(toy):
    grid, props, solver, basis = toy
    batches = fake_batches([0.25, 0.5, 0.75, 1.0])
    res = run_assimilation(
        solver=solver, basis=basis, prior=make_prior(), noise=NoiseSpec(0.5, 0.034),
        sensor_locations=[(0.1, 0.02, 0.1), (0.3, 0.02, 0.1), (0.1, 0.02, 0.3),
                          (0.3, 0.02, 0.3)],
        measurements=batches, s_n=25, beta_max=1, dt=0.25, obs_span=0.25,
        t_f=1.0, seed=3)
    assert res.obs_times.shape == (4,)
    assert np.all(np.isfinite(res.cond))


def test_schedule_validation(toy):
    with pytest.raises(ConfigurationError):
        small_run(toy, fake_batches([0.3]))  # off-schedule measurement
    with pytest.raises(ConfigurationError):
        small_run(toy, fake_batches([0.5], n_sensors=3))  # wrong sensor count
    with pytest.raises(ConfigurationError):
        small_run(toy, fake_batches([0.5, 1.0, 1.5]))  # more batches than t_f holds
    grid, props, solver, basis = toy
    with pytest.raises(ConfigurationError):
        run_assimilation(solver=solver, basis=basis, prior=make_prior(),
                         noise=NoiseSpec(0.5, 0.034), sensor_locations=[(0.1, 0.02, 0.1)],
                         measurements=[], s_n=10, beta_max=1, dt=0.3, obs_span=0.5,
                         t_f=1.0, seed=1)


def test_beta_max_validation(toy):
    grid, props, solver, basis = toy
    with pytest.raises(ConfigurationError):
        run_assimilation(solver=solver, basis=basis, prior=make_prior(),
                         noise=NoiseSpec(0.5, 0.034),
                         sensor_locations=[(0.1, 0.02, 0.1)], measurements=[],
                         s_n=10, beta_max=0, dt=0.25, obs_span=0.5, t_f=1.0, seed=1)


def test_open_loop_ignores_measurements(toy):
    batches = fake_batches([0.5, 1.0])
    res_ol = small_run(toy, batches, open_loop=True)
    res_none = small_run(toy, [], t_f=1.0)
    # open-loop weights never move: summaries equal the free-running ensemble
    assert np.isnan(res_ol.cond).all()
    assert np.allclose(res_ol.forecast_probe, res_none.forecast_probe)
    assert np.allclose(res_ol.weight_mean[0], res_ol.weight_mean[1])


def test_update_moves_states_toward_measurements(toy):
    batches = fake_batches([0.5, 1.0], value=405.0)
    res = small_run(toy, batches)
    res_ol = small_run(toy, batches, open_loop=True)
    probe_assim = res.temp_probe[-1, 0]
    probe_ol = res_ol.temp_probe[-1, 0]
    assert abs(probe_assim - 405.0) < abs(probe_ol - 405.0)


def test_seed_determinism_bit_identical(toy):
    batches = fake_batches([0.5, 1.0])
    a = small_run(toy, batches, seed=21)
    b = small_run(toy, batches, seed=21)
    assert np.array_equal(a.weight_mean, b.weight_mean)
    assert np.array_equal(a.state_mean, b.state_mean)
    assert np.array_equal(a.flux_probe, b.flux_probe)
    c = small_run(toy, batches, seed=22)
    assert not np.array_equal(a.weight_mean, c.weight_mean)


def test_gain_residual_small_on_real_run(toy):
    batches = fake_batches([0.5, 1.0])
    res = small_run(toy, batches)
    assert np.nanmax(res.gain_residual) < 1e-8
    assert np.all(np.isfinite(res.cond))


def test_envelope_orders(toy):
    batches = fake_batches([0.5, 1.0])
    res = small_run(toy, batches)
    assert np.all(res.weight_lo <= res.weight_mean + 1e-12)
    assert np.all(res.weight_mean <= res.weight_hi + 1e-12)
    assert np.all(res.temp_probe[:, 1] <= res.temp_probe[:, 2])
