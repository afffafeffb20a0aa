import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moldflux import ConfigurationError, coverage_fraction, spatiotemporal_error
from moldflux.metrics import MAE, snap_to_sensor, total_flux_series


@pytest.fixture
def flux_series():
    rng = np.random.default_rng(8)
    return -1500.0 + 400.0 * rng.random((12, 30))


def test_exact_estimate_scores_zero(flux_series):
    rep = spatiotemporal_error(flux_series, flux_series)
    assert rep.spatiotemporal_error == 0.0
    assert np.all(rep.per_time_errors == 0.0)


def test_zero_estimate_scores_one(flux_series):
    rep = spatiotemporal_error(np.zeros_like(flux_series), flux_series)
    assert rep.spatiotemporal_error == pytest.approx(1.0, abs=1e-12)


def test_uniform_ten_percent_overshoot(flux_series):
    rep = spatiotemporal_error(1.1 * flux_series, flux_series)
    assert rep.spatiotemporal_error == pytest.approx(0.1, abs=1e-12)
    rep_mae = spatiotemporal_error(1.1 * flux_series, flux_series, norm=MAE)
    assert rep_mae.spatiotemporal_error == pytest.approx(0.1, abs=1e-12)


def test_vanishing_truth_rejected(flux_series):
    truth = flux_series.copy()
    truth[3] = 0.0
    with pytest.raises(ConfigurationError) as err:
        spatiotemporal_error(flux_series, truth)
    assert "instant 3" in str(err.value)


def test_shape_mismatch_rejected(flux_series):
    with pytest.raises(ConfigurationError):
        spatiotemporal_error(flux_series[:, :-1], flux_series)


@settings(max_examples=300)
@given(scale=st.floats(min_value=1e-6, max_value=1e6),
       sign=st.sampled_from([-1.0, 1.0]), seed=st.integers(0, 100))
def test_metric_homogeneity(scale, sign, seed):
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal((4, 9)) + 3.0
    est = truth + rng.standard_normal((4, 9))
    base = spatiotemporal_error(est, truth).spatiotemporal_error
    scaled = spatiotemporal_error(sign * scale * est, sign * scale * truth)
    assert scaled.spatiotemporal_error == pytest.approx(base, rel=1e-9)


def test_total_flux_is_area_weighted_sum():
    rng = np.random.default_rng(2)
    flux = rng.standard_normal((6, 10))
    areas = rng.random(10) + 0.5
    totals = total_flux_series(flux, areas)
    manual = np.array([sum(flux[t, f] * areas[f] for f in range(10))
                       for t in range(6)])
    assert np.allclose(totals, manual, rtol=0, atol=1e-12 * np.abs(manual).max())


def test_coverage_trivial_cases():
    truth = np.array([1.0, 2.0, 3.0])
    assert coverage_fraction(truth - 0.1, truth + 0.1, truth) == 1.0
    # zero-width envelope away from truth covers nothing
    mean = truth + 0.5
    assert coverage_fraction(mean, mean, truth) == 0.0
    with pytest.raises(ConfigurationError):
        coverage_fraction(truth, truth, truth[:-1])


def test_snap_to_sensor_default_probe():
    from moldflux import build_grid, default_layout

    grid = build_grid(1.0, 0.04, 0.8, 20, 8, 16)
    layout = default_layout(grid)
    idx, loc = snap_to_sensor(layout, (0.91, 0.02, 0.55))
    assert np.allclose(loc, layout.locations[idx])
    # an exact sensor location snaps to itself
    idx2, loc2 = snap_to_sensor(layout, layout.locations[42])
    assert idx2 == 42
    with pytest.raises(ConfigurationError):
        snap_to_sensor(layout, (0.5, 0.02, -5.0))


def test_coverage_report_end_to_end():
    from conftest import small_config
    from moldflux.driver import build_pieces, make_twin, run_filter
    from moldflux.metrics import coverage_report

    config = small_config()
    pieces = build_pieces(config)
    twin = make_twin(config, pieces)
    res = run_filter(config, twin.measurements, pieces)
    cov = coverage_report(res, twin, pieces.grid, config.probes.temperature)
    assert 0.0 <= cov["temperature"] <= 1.0
    assert 0.0 <= cov["flux"] <= 1.0
    assert cov["temperature_sensor"][1] == pytest.approx(0.02)
