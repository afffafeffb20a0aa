"""Synthetic ground truth: analytic hot-face flux, forward simulation,
noisy thermocouple measurements on a fixed schedule.

The truth trajectory never crosses into the estimator; only the
measurement batches do.  Optionally the truth runs on a refined grid so
the estimator is not scored against its own discretization.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .heat import HeatSolver, MaterialProps, uniform_state
from .mesh import Grid, refine
from .rngs import TAG_TWIN_NOISE, stream


@dataclass(frozen=True)
class TrueFluxSpec:
    """Closed-form boundary flux used as experimental truth.

    g(X, t) = g1(X) * (1 + sin(2*pi*f_max*t^2/t_f)/2) + g2(X) * exp(-t/10)
    with g1 = -ks*(b*z^2 + c) and g2 = -ks*c / (1 + (x-1)^2 + z^2).
    """

    b: float = 200.0
    c: float = 300.0
    f_max: float = 0.1  # Hz
    t_f: float = 20.0   # s
    ks: float = 3.0     # W/(m K), conductivity factor inside g1, g2

    def __post_init__(self):
        if not self.t_f > 0:
            raise ConfigurationError("t_f must be positive")
        if self.f_max < 0:
            raise ConfigurationError("f_max must be nonnegative")


def true_flux(spec: TrueFluxSpec, points, t):
    """Evaluate the true flux at (x, ., z) points and time t in [0, t_f]."""
    if not 0.0 <= t <= spec.t_f:
        raise ConfigurationError(f"t={t} outside [0, {spec.t_f}]")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x = pts[:, 0]
    z = pts[:, -1]
    g1 = -spec.ks * (spec.b * z ** 2 + spec.c)
    g2 = -spec.ks * spec.c / (1.0 + (x - 1.0) ** 2 + z ** 2)
    wave = np.sin(2.0 * np.pi * spec.f_max * t ** 2 / spec.t_f)
    return g1 * (1.0 + 0.5 * wave) + g2 * np.exp(-0.1 * t)


@dataclass(frozen=True)
class SensorLayout:
    locations: np.ndarray  # (L, 3) m
    plane_y: float

    def __post_init__(self):
        if np.any(np.abs(self.locations[:, 1] - self.plane_y) > 1e-12):
            raise ConfigurationError("all sensors must sit at y = plane_y")

    def __len__(self):
        return self.locations.shape[0]

    @property
    def hot_face_xz(self):
        """Sensor coordinates projected onto the hot face, as (x, z) pairs."""
        return self.locations[:, [0, 2]]


def default_layout(grid: Grid, plane_y=0.02, n_x=10, n_z=10, margin_frac=0.05):
    """Uniform n_x*n_z sensor grid at depth plane_y, inset from the edges.

    Inset per axis is half a cell plus ``margin_frac`` of the extent.
    Ordering is x-major: sensor_id = ix*n_z + iz.
    """
    if not 0.0 < plane_y < grid.ly:
        raise ConfigurationError(
            f"sensor plane y={plane_y} outside the mold thickness (0, {grid.ly})")
    dx, _, dz = grid.spacing
    mx = 0.5 * dx + margin_frac * grid.lx
    mz = 0.5 * dz + margin_frac * grid.lz
    if 2 * mx >= grid.lx or 2 * mz >= grid.lz:
        raise ConfigurationError("sensor margins leave no room in the domain")
    xs = np.linspace(mx, grid.lx - mx, n_x)
    zs = np.linspace(mz, grid.lz - mz, n_z)
    locs = np.array([(x, plane_y, z) for x in xs for z in zs])
    return SensorLayout(locations=locs, plane_y=plane_y)


@dataclass
class TwinDataset:
    """Everything the truth run produced, plus the noisy measurements."""

    grid: Grid                      # grid the truth ran on
    flux_spec: TrueFluxSpec
    layout: SensorLayout
    dt: float
    obs_span: float
    seed: int
    r_var: float
    measurements: list              # list[MeasurementBatch], one per obs instant
    step_times: np.ndarray          # (n_steps+1,) incl t=0
    truth_flux: np.ndarray = field(repr=False)    # (n_steps+1, n_hot) on self.grid
    obs_times: np.ndarray = field(repr=False)     # (n_obs,)
    truth_states: np.ndarray = field(repr=False)  # (n_obs+1, n_cells) at t=0 and obs times
    clean_readings: np.ndarray = field(repr=False)  # (n_obs, L) noise-free

    def truth_temperature_at(self, point):
        """Noise-free temperature series (t=0 and obs instants) at a point."""
        return self.truth_states[:, self.grid.cell_of_point(point)]


def _check_schedule(dt, obs_span, t_f):
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    steps_per_obs = obs_span / dt
    if not np.isclose(steps_per_obs, round(steps_per_obs)) or round(steps_per_obs) < 1:
        raise ConfigurationError(
            f"observation span {obs_span} must be a positive multiple of dt {dt}")
    n_obs = t_f / obs_span
    if not np.isclose(n_obs, round(n_obs)) or round(n_obs) < 1:
        raise ConfigurationError(
            f"final time {t_f} must be a positive multiple of the span {obs_span}")
    return int(round(steps_per_obs)), int(round(n_obs))


def generate_twin(grid, props: MaterialProps, flux_spec: TrueFluxSpec,
                  layout: SensorLayout, dt, obs_span, r_var, seed,
                  refine_factor=1):
    """Run the truth simulation and sample noisy measurements.

    The truth advances on ``grid`` refined by ``refine_factor`` (1 keeps the
    estimator grid; 2 sidesteps the inverse crime).  The flux driving each
    backward-Euler step is evaluated at the step's end time.
    """
    from .enkf import MeasurementBatch

    steps_per_obs, n_obs = _check_schedule(dt, obs_span, flux_spec.t_f)
    if r_var < 0:
        raise ConfigurationError("measurement noise variance must be >= 0")
    tgrid = grid if refine_factor == 1 else refine(grid, refine_factor)
    solver = HeatSolver(tgrid, props)
    sensor_cells = tgrid.cells_of_points(layout.locations)

    n_steps = steps_per_obs * n_obs
    hot_xyz = tgrid.hot_faces.centroids
    state = uniform_state(tgrid, props.t_init)

    step_times = dt * np.arange(n_steps + 1)
    truth_flux = np.empty((n_steps + 1, len(tgrid.hot_faces)))
    truth_flux[0] = true_flux(flux_spec, hot_xyz, 0.0)
    truth_states = np.empty((n_obs + 1, tgrid.n_cells))
    truth_states[0] = state.values
    clean = np.empty((n_obs, len(layout)))
    obs_times = obs_span * np.arange(1, n_obs + 1)
    measurements = []

    from .heat import FluxField

    for n in range(1, n_steps + 1):
        t_n = n * dt
        g = true_flux(flux_spec, hot_xyz, t_n)
        truth_flux[n] = g
        state = solver.step(state, FluxField(g, t_n), dt)
        if n % steps_per_obs == 0:
            k = n // steps_per_obs
            truth_states[k] = state.values
            clean[k - 1] = state.values[sensor_cells]
            noise = stream(seed, TAG_TWIN_NOISE, k).standard_normal(len(layout))
            readings = clean[k - 1] + np.sqrt(r_var) * noise
            measurements.append(MeasurementBatch(
                time=float(t_n), readings=readings,
                sensor_ids=np.arange(len(layout))))

    return TwinDataset(grid=tgrid, flux_spec=flux_spec, layout=layout, dt=dt,
                       obs_span=obs_span, seed=seed, r_var=r_var,
                       measurements=measurements, step_times=step_times,
                       truth_flux=truth_flux, obs_times=obs_times,
                       truth_states=truth_states, clean_readings=clean)
