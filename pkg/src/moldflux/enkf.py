"""Joint ensemble estimation of RBF flux weights and temperature state.

The estimator carries an ensemble of (weights, temperature field) pairs.
Between measurements every member is advanced through the heat solver
under the flux its own weights reconstruct, plus process noise.  At each
observation instant an iterated update runs: the weight ensemble is
redrawn around the current weight mean with the fixed prior covariance,
member states are re-propagated across the observation interval under the
redrawn weights (this is the channel that couples weights to what the
thermocouples see), predicted readings get perturbed with measurement
noise, and the joint ensemble is corrected with the sample-covariance
Kalman gain.  Covariances use the 1/S normalization; the update runs
``beta_max`` iterations, the first redraw centered on the forecast weight
mean, later ones on the previous iteration's posterior mean.

Note: the redraw discards the weight spread accumulated during the
forecast on purpose; its covariance is always kappa*|initial weight mean|.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericalError
from .heat import HeatSolver
from .mesh import Grid
from .rbf import RbfBasis
from .rngs import (TAG_FORECAST_NOISE, TAG_INIT_STATES, TAG_INIT_WEIGHTS,
                   TAG_OBS_NOISE, TAG_REDRAW, TAG_REPROP_NOISE, stream)
from .twin import _check_schedule

DEFAULT_COND_LIMIT = 1e12
ENVELOPE_PERCENTILES = (5.0, 95.0)


@dataclass(frozen=True)
class NoiseSpec:
    q_var: float | np.ndarray  # process-noise variance per cell, K^2
    r_var: float | np.ndarray  # measurement-noise variance per sensor, K^2

    def __post_init__(self):
        if np.any(np.asarray(self.q_var) < 0) or np.any(np.asarray(self.r_var) < 0):
            raise ConfigurationError("noise variances must be >= 0")


@dataclass(frozen=True)
class PriorSpec:
    weight_mean: np.ndarray  # unshifted initial weight mean
    kappa: float             # weight covariance scale
    shift: float             # signed fractional shift of the weight mean
    state_mean: float        # K
    state_var: float         # K^2

    def __post_init__(self):
        if self.kappa < 0 or self.state_var < 0:
            raise ConfigurationError("kappa and state_var must be >= 0")

    @property
    def weight_std(self):
        """Per-component std of the weight prior: sqrt(kappa*|mean|).

        The nominal covariance scale kappa*mean is only positive
        semidefinite for positive means; the true fluxes here are negative,
        so the absolute value keeps the prior well defined.
        """
        return np.sqrt(self.kappa * np.abs(self.weight_mean))


@dataclass
class JointEnsemble:
    weights: np.ndarray  # (S, N)
    states: np.ndarray   # (S, n_cells)
    time: float = 0.0

    def __post_init__(self):
        if self.weights.shape[0] != self.states.shape[0]:
            raise ConfigurationError("weights and states disagree on member count")
        if self.size < 2:
            raise ConfigurationError("ensemble needs at least 2 members")

    @property
    def size(self):
        return self.weights.shape[0]


@dataclass
class MeasurementBatch:
    time: float
    readings: np.ndarray
    sensor_ids: np.ndarray

    def __post_init__(self):
        if len(self.readings) != len(self.sensor_ids):
            raise ConfigurationError("readings and sensor_ids disagree on length")


def init_ensemble(prior: PriorSpec, basis: RbfBasis, grid: Grid, s_n, seed):
    """Draw the initial joint ensemble from the Gaussian priors."""
    if s_n < 2:
        raise ConfigurationError(f"ensemble size {s_n} must be >= 2")
    n_w = basis.n_weights
    mean_w = (1.0 + prior.shift) * prior.weight_mean
    std_w = prior.weight_std
    std_x = np.sqrt(prior.state_var)
    weights = np.empty((s_n, n_w))
    states = np.empty((s_n, grid.n_cells))
    for i in range(s_n):
        weights[i] = mean_w + std_w * stream(seed, TAG_INIT_WEIGHTS, 0, i, 0).standard_normal(n_w)
        states[i] = prior.state_mean + std_x * stream(seed, TAG_INIT_STATES, 0, i, 0).standard_normal(grid.n_cells)
    return JointEnsemble(weights=weights, states=states, time=0.0)


def _process_noise(noise, n_cells, s_n, seed, step_index, beta):
    tag = TAG_FORECAST_NOISE if beta is None else TAG_REPROP_NOISE
    b = 0 if beta is None else beta
    std = np.sqrt(noise.q_var)
    out = np.empty((s_n, n_cells))
    for i in range(s_n):
        out[i] = std * stream(seed, tag, step_index, i, b).standard_normal(n_cells)
    return out


def forecast(ens: JointEnsemble, solver: HeatSolver, basis: RbfBasis,
             noise: NoiseSpec, dt, seed, step_index, method="direct"):
    """Advance every member one step under its own flux; weights unchanged."""
    fluxes = ens.weights @ basis.phi
    states = solver.step_many(ens.states, fluxes, dt, method=method)
    states += _process_noise(noise, states.shape[1], ens.size, seed, step_index, None)
    return JointEnsemble(weights=ens.weights.copy(), states=states,
                         time=ens.time + dt)


def redraw_weights(mean, prior: PriorSpec, s_n, seed, cycle, beta):
    """Fresh i.i.d. weight ensemble around ``mean`` with the prior spread."""
    n_w = mean.shape[0]
    out = np.empty((s_n, n_w))
    for i in range(s_n):
        out[i] = mean + prior.weight_std * stream(seed, TAG_REDRAW, cycle, i, beta).standard_normal(n_w)
    return out


@dataclass
class UpdateDiagnostics:
    cond: float           # 2-norm condition estimate of the observation covariance
    gain_residual: float  # max |K_E . P_y - P_psi_y|


def ensemble_update(psi, predicted, y, cond_limit=DEFAULT_COND_LIMIT):
    """One ensemble Kalman correction of the joint samples.

    psi : (S, D) joint samples, predicted : (S, m) perturbed predicted
    readings, y : (m,) measured readings.  Returns (psi_post, diagnostics).
    Sample (cross-)covariances use 1/S; the gain solves
    K_E P_y = P_psi_y through a symmetric factorization, aborting when the
    condition estimate of P_y exceeds ``cond_limit``.
    """
    psi = np.asarray(psi, float)
    predicted = np.asarray(predicted, float)
    y = np.asarray(y, float)
    s_n = psi.shape[0]
    if predicted.shape[0] != s_n:
        raise ConfigurationError("psi and predicted disagree on member count")
    if predicted.shape[1] != y.shape[0]:
        raise ConfigurationError("predicted readings and measurement disagree on length")

    y_center = predicted - predicted.mean(axis=0)
    if not np.any(y_center):
        # zero observation spread: cross-covariance vanishes, gain is zero
        return psi.copy(), UpdateDiagnostics(cond=np.inf, gain_residual=0.0)

    psi_center = psi - psi.mean(axis=0)
    p_y = (y_center.T @ y_center) / s_n
    p_psi_y = (psi_center.T @ y_center) / s_n

    cond = float(np.linalg.cond(p_y))
    if not np.isfinite(cond) or cond > cond_limit:
        raise NumericalError(
            f"observation covariance is ill-conditioned (estimate {cond:.3e} "
            f"exceeds {cond_limit:.1e}); the gain solve would be untrustworthy",
            condition=cond)
    try:
        gain = scipy.linalg.solve(p_y, p_psi_y.T, assume_a="pos").T
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(
            f"observation covariance factorization failed: {exc}",
            condition=cond) from exc

    residual = float(np.max(np.abs(gain @ p_y - p_psi_y)))
    psi_post = psi + (y - predicted) @ gain.T
    return psi_post, UpdateDiagnostics(cond=cond, gain_residual=residual)


@dataclass
class AssimilationResult:
    """Per-observation posterior summaries plus the forecast trace."""

    obs_times: np.ndarray                 # (T,)
    weight_mean: np.ndarray               # (T, N)
    weight_lo: np.ndarray                 # (T, N) 5th percentile
    weight_hi: np.ndarray                 # (T, N) 95th percentile
    flux_mean: np.ndarray = field(repr=False)   # (T, n_hot)
    state_mean: np.ndarray = field(repr=False)  # (T, n_cells)
    flux_probe: np.ndarray = field(repr=False)  # (T, 3) mean/lo/hi at probe face
    flux_total: np.ndarray = field(repr=False)  # (T, 3) area-weighted hot-face sum
    temp_probe: np.ndarray = field(repr=False)  # (T, 3) at probe cell
    cond: np.ndarray = field(repr=False)            # (T, beta_max+1)
    gain_residual: np.ndarray = field(repr=False)   # (T, beta_max+1)
    forecast_times: np.ndarray = field(repr=False)  # (n_steps+1,)
    forecast_probe: np.ndarray = field(repr=False)  # (n_steps+1,) probe temp of forecast mean
    temp_probe_cell: int = -1
    flux_probe_face: int = -1
    open_loop: bool = False


def nearest_hot_face(grid: Grid, point):
    pts = grid.hot_faces.centroids
    p = np.asarray(point, float)
    if p.shape[0] == 2:
        p = np.array([p[0], 0.0, p[1]])
    return int(np.argmin(np.linalg.norm(pts - p, axis=1)))


def _envelope(samples):
    lo, hi = np.percentile(samples, ENVELOPE_PERCENTILES, axis=0)
    return lo, hi


def run_assimilation(solver: HeatSolver, basis: RbfBasis, prior: PriorSpec,
                     noise: NoiseSpec, sensor_locations, measurements,
                     s_n, beta_max, dt, obs_span, t_f, seed,
                     temp_probe=None, flux_probe=None, open_loop=False,
                     method="direct", cond_limit=DEFAULT_COND_LIMIT):
    """Run the full forecast/update loop over a measurement schedule.

    ``measurements`` is the time-ordered list of batches, one per
    observation instant k*obs_span (k = 1, 2, ...).  With ``open_loop``
    the update phase is skipped and the summaries describe the free-running
    ensemble, which is the baseline the assimilation is judged against.
    """
    if beta_max < 1 or int(beta_max) != beta_max:
        raise ConfigurationError(f"beta_max={beta_max} must be an integer >= 1")
    steps_per_obs, n_obs_max = _check_schedule(dt, obs_span, t_f)
    grid = solver.grid
    sensor_locations = np.atleast_2d(np.asarray(sensor_locations, float))
    sensor_cells = grid.cells_of_points(sensor_locations)

    if len(measurements) > n_obs_max:
        raise ConfigurationError(
            f"{len(measurements)} measurement batches do not fit in t_f={t_f} "
            f"with span {obs_span}")
    for k, batch in enumerate(measurements):
        expected = (k + 1) * obs_span
        if abs(batch.time - expected) > 1e-9 * max(1.0, expected):
            raise ConfigurationError(
                f"measurement {k} at t={batch.time} is off the schedule "
                f"(expected t={expected})")
        if len(batch.readings) != len(sensor_cells):
            raise ConfigurationError(
                f"measurement {k} carries {len(batch.readings)} readings for "
                f"{len(sensor_cells)} sensors")

    probe_cell = grid.cell_of_point(temp_probe) if temp_probe is not None else 0
    probe_face = nearest_hot_face(grid, flux_probe) if flux_probe is not None else 0
    areas = grid.hot_faces.areas

    ens = init_ensemble(prior, basis, grid, s_n, seed)
    n_beta = int(beta_max)
    n_obs = len(measurements)
    n_w = basis.n_weights

    out = AssimilationResult(
        obs_times=np.array([b.time for b in measurements]),
        weight_mean=np.empty((n_obs, n_w)),
        weight_lo=np.empty((n_obs, n_w)),
        weight_hi=np.empty((n_obs, n_w)),
        flux_mean=np.empty((n_obs, len(grid.hot_faces))),
        state_mean=np.empty((n_obs, grid.n_cells)),
        flux_probe=np.empty((n_obs, 3)),
        flux_total=np.empty((n_obs, 3)),
        temp_probe=np.empty((n_obs, 3)),
        cond=np.full((n_obs, n_beta), np.nan),
        gain_residual=np.full((n_obs, n_beta), np.nan),
        forecast_times=dt * np.arange(steps_per_obs * n_obs_max + 1),
        forecast_probe=np.full(steps_per_obs * n_obs_max + 1, np.nan),
        temp_probe_cell=probe_cell,
        flux_probe_face=probe_face,
        open_loop=open_loop,
    )
    out.forecast_probe[0] = ens.states[:, probe_cell].mean()

    r_std = np.broadcast_to(np.sqrt(noise.r_var), (len(sensor_cells),))
    global_step = 0
    for k in range(n_obs_max):
        start_states = ens.states.copy()
        # forecast pass between observations
        for _ in range(steps_per_obs):
            global_step += 1
            ens = forecast(ens, solver, basis, noise, dt, seed, global_step,
                           method=method)
            out.forecast_probe[global_step] = ens.states[:, probe_cell].mean()
        if k >= n_obs:
            continue  # no measurement left: keep free-running
        batch = measurements[k]

        if not open_loop:
            a_mean = ens.weights.mean(axis=0)
            for beta in range(n_beta):
                w_beta = redraw_weights(a_mean, prior, s_n, seed, k + 1, beta)
                # re-propagate over the interval under the redrawn weights:
                # the measurement map sees the flux through the model
                x_beta = start_states
                fluxes = w_beta @ basis.phi
                for s in range(steps_per_obs):
                    x_beta = solver.step_many(x_beta, fluxes, dt, method=method)
                    x_beta += _process_noise(noise, x_beta.shape[1], s_n, seed,
                                             global_step - steps_per_obs + 1 + s, beta)
                predicted = x_beta[:, sensor_cells].copy()
                for i in range(s_n):
                    predicted[i] += r_std * stream(seed, TAG_OBS_NOISE, k + 1, i, beta).standard_normal(len(sensor_cells))
                psi = np.hstack([w_beta, x_beta])
                psi, diag = ensemble_update(psi, predicted, batch.readings,
                                            cond_limit=cond_limit)
                out.cond[k, beta] = diag.cond
                out.gain_residual[k, beta] = diag.gain_residual
                a_mean = psi[:, :n_w].mean(axis=0)
            ens = JointEnsemble(weights=psi[:, :n_w], states=psi[:, n_w:],
                                time=batch.time)

        _record(out, k, ens, basis, areas, probe_cell, probe_face)
    return out


def _record(out, k, ens, basis, areas, probe_cell, probe_face):
    out.weight_mean[k] = ens.weights.mean(axis=0)
    out.weight_lo[k], out.weight_hi[k] = _envelope(ens.weights)
    member_flux = ens.weights @ basis.phi
    out.flux_mean[k] = member_flux.mean(axis=0)
    out.state_mean[k] = ens.states.mean(axis=0)

    probe_flux = member_flux[:, probe_face]
    lo, hi = _envelope(probe_flux)
    out.flux_probe[k] = (probe_flux.mean(), lo, hi)

    totals = member_flux @ areas
    lo, hi = _envelope(totals)
    out.flux_total[k] = (totals.mean(), lo, hi)

    probe_temp = ens.states[:, probe_cell]
    lo, hi = _envelope(probe_temp)
    out.temp_probe[k] = (probe_temp.mean(), lo, hi)
