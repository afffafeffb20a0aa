"""Scoring: spatiotemporal flux error, envelope coverage, flux totals."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .twin import TwinDataset, true_flux

L2 = "l2"
MAE = "mae"


@dataclass
class ErrorReport:
    spatiotemporal_error: float
    per_time_errors: np.ndarray = field(repr=False)
    norm: str = L2
    config_snapshot: dict = field(default_factory=dict, repr=False)


def spatiotemporal_error(estimated, truth, norm=L2):
    """Mean over time of the relative spatial deviation of the flux.

    ``estimated`` and ``truth`` are (T, n_faces) series on the same faces
    and instants.  The default norm is the L2 ratio ||e_t - g_t||/||g_t||;
    ``norm="mae"`` switches to mean(|e_t - g_t|)/mean(|g_t|) per instant.
    """
    est = np.atleast_2d(np.asarray(estimated, float))
    tru = np.atleast_2d(np.asarray(truth, float))
    if est.shape != tru.shape:
        raise ConfigurationError(
            f"estimated {est.shape} and true {tru.shape} flux series disagree")
    if norm == L2:
        num = np.linalg.norm(est - tru, axis=1)
        den = np.linalg.norm(tru, axis=1)
    elif norm == MAE:
        num = np.mean(np.abs(est - tru), axis=1)
        den = np.mean(np.abs(tru), axis=1)
    else:
        raise ConfigurationError(f"unknown error norm {norm!r}")
    if np.any(den == 0.0):
        t_bad = int(np.argmax(den == 0.0))
        raise ConfigurationError(
            f"relative error undefined: true flux vanishes at instant {t_bad}")
    per_time = num / den
    return ErrorReport(spatiotemporal_error=float(per_time.mean()),
                       per_time_errors=per_time, norm=norm)


def truth_flux_at(twin: TwinDataset, grid, times):
    """Analytic true flux on ``grid``'s hot faces at the given instants.

    Exact regardless of the grid the twin ran on, so scoring stays honest
    when the truth used a refined mesh.
    """
    pts = grid.hot_faces.centroids
    return np.array([true_flux(twin.flux_spec, pts, t) for t in np.atleast_1d(times)])


def score_flux(result, twin: TwinDataset, grid, norm=L2, config_snapshot=None):
    """ErrorReport for an assimilation result against the twin's truth."""
    truth = truth_flux_at(twin, grid, result.obs_times)
    report = spatiotemporal_error(result.flux_mean, truth, norm=norm)
    if config_snapshot:
        report.config_snapshot = dict(config_snapshot)
    return report


def total_flux_series(flux_series, areas):
    """Area-weighted hot-face total (W) per instant."""
    return np.atleast_2d(np.asarray(flux_series, float)) @ np.asarray(areas, float)


def coverage_fraction(lo, hi, truth):
    """Fraction of instants where truth falls inside [lo, hi]."""
    lo, hi, truth = (np.asarray(a, float) for a in (lo, hi, truth))
    if not lo.shape == hi.shape == truth.shape:
        raise ConfigurationError("envelope and truth series disagree on length")
    return float(np.mean((truth >= lo) & (truth <= hi)))


def snap_to_sensor(layout, point):
    """Nearest sensor to ``point``; error if outside half the sensor pitch."""
    locs = layout.locations
    p = np.asarray(point, float)
    d = np.linalg.norm(locs - p, axis=1)
    idx = int(np.argmin(d))
    # tolerance: half the largest nearest-neighbor spacing of the layout
    if len(locs) > 1:
        dd = np.linalg.norm(locs[:, None, :] - locs[None, :, :], axis=2)
        np.fill_diagonal(dd, np.inf)
        pitch = float(dd.min(axis=1).max())
    else:
        pitch = np.inf
    if d[idx] > 0.75 * pitch:
        raise ConfigurationError(
            f"probe {tuple(p)} is not collocated with any sensor "
            f"(nearest is {tuple(locs[idx])}, {d[idx]:.4g} m away)")
    return idx, locs[idx]


def coverage_report(result, twin: TwinDataset, grid, temp_probe):
    """Envelope coverage of the truth at the probes the result tracked.

    ``grid`` is the estimator grid the result ran on.  The temperature
    probe must coincide with a thermocouple (it is snapped to the nearest
    one); the flux probe series in the result already sits on a hot face,
    whose centroid the analytic truth is evaluated at.
    """
    idx, sensor = snap_to_sensor(twin.layout, temp_probe)
    truth_temp = twin.truth_temperature_at(sensor)[1:]  # drop t=0 row
    if truth_temp.shape[0] != result.obs_times.shape[0]:
        raise ConfigurationError("twin and result disagree on observation instants")
    temp_cov = coverage_fraction(result.temp_probe[:, 1], result.temp_probe[:, 2],
                                 truth_temp)

    face_xyz = grid.hot_faces.centroids[result.flux_probe_face]
    truth_flux_series = np.array(
        [true_flux(twin.flux_spec, face_xyz[None, :], t)[0]
         for t in result.obs_times])
    flux_cov = coverage_fraction(result.flux_probe[:, 1],
                                 result.flux_probe[:, 2], truth_flux_series)
    return {
        "temperature": temp_cov,
        "temperature_sensor": tuple(float(v) for v in sensor),
        "temperature_sensor_id": idx,
        "flux": flux_cov,
        "flux_face": tuple(float(v) for v in face_xyz),
    }
