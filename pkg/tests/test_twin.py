import numpy as np
import pytest

from moldflux import (ConfigurationError, MaterialProps, TrueFluxSpec,
                      build_grid, default_layout, generate_twin, true_flux)

from conftest import MOLD_PROPS


@pytest.fixture(scope="module")
def coarse():
    """Small twin setup shared by the generation tests."""
    grid = build_grid(1.0, 0.04, 0.8, 6, 4, 5)
    props = MaterialProps(**MOLD_PROPS)
    layout = default_layout(grid, n_x=4, n_z=4)
    return grid, props, layout


def test_true_flux_hand_evaluated_corner():
    # at X=(1, ., 0), t=0: g1 = -3*(200*0 + 300) = -900,
    # g2 = -3*300/(1+0+0) = -900, sin(0)=0, exp(0)=1  =>  -1800
    spec = TrueFluxSpec()
    assert true_flux(spec, [(1.0, 0.0, 0.0)], 0.0)[0] == pytest.approx(-1800.0, abs=1e-12)


def test_true_flux_sinusoid_phase_and_envelope():
    spec = TrueFluxSpec()
    pts = np.array([[1.0, 0.0, 0.0]])
    g1 = -spec.ks * (spec.b * 0.0 ** 2 + spec.c)   # -900
    g2 = -spec.ks * spec.c / 1.0                   # -900
    # phase 2*pi*f_max*t^2/t_f at t=t_f=20, f_max=0.1 is 4*pi, so sin term = 0
    assert true_flux(spec, pts, 20.0)[0] == pytest.approx(g1 + g2 * np.exp(-2.0), abs=1e-9)
    # the oscillatory factor on g1 stays within [0.5, 1.5]: bound -1350
    ts = np.linspace(0, 20, 2001)
    osc = np.array([(true_flux(spec, pts, t)[0] - g2 * np.exp(-0.1 * t)) for t in ts])
    assert osc.min() >= 1.5 * g1 - 1e-9   # g1 < 0: 1.5*g1 = -1350 is the envelope
    assert osc.max() <= 0.5 * g1 + 1e-9


def test_true_flux_negative_on_hot_face():
    spec = TrueFluxSpec()
    grid = build_grid(1.0, 0.04, 0.8, 20, 8, 16)
    for t in np.linspace(0, spec.t_f, 41):
        assert np.all(true_flux(spec, grid.hot_faces.centroids, t) < 0)


def test_true_flux_time_domain():
    spec = TrueFluxSpec()
    with pytest.raises(ConfigurationError):
        true_flux(spec, [(0.5, 0, 0.4)], -0.1)
    with pytest.raises(ConfigurationError):
        true_flux(spec, [(0.5, 0, 0.4)], 20.5)
    with pytest.raises(ConfigurationError):
        TrueFluxSpec(t_f=0.0)


def test_default_layout_geometry():
    grid = build_grid(1.0, 0.04, 0.8, 20, 8, 16)
    layout = default_layout(grid)
    assert len(layout) == 100
    assert np.all(layout.locations[:, 1] == 0.02)
    x, z = layout.locations[:, 0], layout.locations[:, 2]
    assert x.min() > 0 and x.max() < grid.lx
    assert z.min() > 0 and z.max() < grid.lz
    # x-major ordering: sensor_id = ix*n_z + iz
    xs = np.unique(x)
    zs = np.unique(z)
    for sid in (0, 5, 37, 99):
        ix, iz = divmod(sid, 10)
        assert layout.locations[sid] == pytest.approx([xs[ix], 0.02, zs[iz]])


def test_layout_margin_and_plane_validation():
    grid = build_grid(1.0, 0.04, 0.8, 6, 4, 5)
    with pytest.raises(ConfigurationError):
        default_layout(grid, plane_y=0.05)
    with pytest.raises(ConfigurationError):
        default_layout(grid, margin_frac=0.5)


def test_twin_schedule_and_counts(coarse):
    grid, props, layout = coarse
    spec = TrueFluxSpec()
    twin = generate_twin(grid, props, spec, layout, dt=0.1, obs_span=0.4,
                         r_var=0.034, seed=9)
    assert len(twin.measurements) == 50  # 20 s / 0.4 s
    assert twin.truth_flux.shape == (201, len(grid.hot_faces))
    assert twin.measurements[0].time == pytest.approx(0.4)
    assert twin.measurements[-1].time == pytest.approx(20.0)
    # flux rows are the analytic field at the step's end time
    t37 = twin.step_times[37]
    assert np.allclose(twin.truth_flux[37],
                       true_flux(spec, grid.hot_faces.centroids, t37))


def test_twin_schedule_validation(coarse):
    grid, props, layout = coarse
    with pytest.raises(ConfigurationError):
        generate_twin(grid, props, TrueFluxSpec(), layout, dt=0.3, obs_span=0.4,
                      r_var=0.0, seed=1)
    with pytest.raises(ConfigurationError):
        generate_twin(grid, props, TrueFluxSpec(t_f=1.0), layout, dt=0.1,
                      obs_span=0.4, r_var=0.0, seed=1)


def test_noise_free_measurements_equal_sensor_samples(coarse):
    grid, props, layout = coarse
    twin = generate_twin(grid, props, TrueFluxSpec(t_f=2.0, ks=props.ks), layout,
                         dt=0.5, obs_span=1.0, r_var=0.0, seed=4)
    for k, batch in enumerate(twin.measurements):
        assert np.array_equal(batch.readings, twin.clean_readings[k])
    cells = grid.cells_of_points(layout.locations)
    assert np.array_equal(twin.clean_readings[-1], twin.truth_states[-1][cells])


def test_twin_regeneration_is_bit_identical(coarse):
    grid, props, layout = coarse
    kwargs = dict(dt=0.5, obs_span=1.0, r_var=0.034, seed=77)
    a = generate_twin(grid, props, TrueFluxSpec(t_f=3.0), layout, **kwargs)
    b = generate_twin(grid, props, TrueFluxSpec(t_f=3.0), layout, **kwargs)
    assert np.array_equal(a.truth_states, b.truth_states)
    for ba, bb in zip(a.measurements, b.measurements):
        assert np.array_equal(ba.readings, bb.readings)


def test_measurement_noise_variance_matches_r(coarse):
    # Monte-Carlo over 100 seeds: variance of (noisy - clean) pooled over
    # all sensors and instants approaches the configured 0.034 K^2
    grid, props, layout = coarse
    spec = TrueFluxSpec(t_f=2.0)
    devs = []
    for seed in range(100):
        twin = generate_twin(grid, props, spec, layout, dt=0.5, obs_span=1.0,
                             r_var=0.034, seed=seed)
        noisy = np.array([b.readings for b in twin.measurements])
        devs.append((noisy - twin.clean_readings).ravel())
    var = np.concatenate(devs).var()
    assert var == pytest.approx(0.034, rel=0.05)


def test_refined_twin_runs_on_finer_grid(coarse):
    grid, props, layout = coarse
    twin = generate_twin(grid, props, TrueFluxSpec(t_f=2.0), layout, dt=0.5,
                         obs_span=1.0, r_var=0.0, seed=3, refine_factor=2)
    assert twin.grid.n_cells == grid.n_cells * 8
    assert twin.truth_flux.shape[1] == 4 * len(grid.hot_faces)
    assert len(twin.measurements) == 2


def test_truth_temperature_probe(coarse):
    grid, props, layout = coarse
    twin = generate_twin(grid, props, TrueFluxSpec(t_f=2.0), layout, dt=0.5,
                         obs_span=1.0, r_var=0.0, seed=3)
    series = twin.truth_temperature_at((0.91, 0.02, 0.55))
    assert series.shape == (3,)  # t=0 plus two observation instants
    assert series[0] == props.t_init
