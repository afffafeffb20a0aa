"""One-dimensional hyperparameter sweeps over full assimilation runs.

Every sweep point reruns the whole pipeline with one parameter changed and
the same seed.  Twins are cached by their config hash, so points that do
not perturb the twin (ensemble size, eta, kappa, shift) share one dataset;
dt and obs_span points regenerate it.  Failures at individual points are
recorded and the sweep continues.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, SWEEPABLE
from .driver import build_pieces, make_twin, run_filter, score
from .errors import ConfigurationError


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    base: RunConfig

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ConfigurationError(
                f"unknown sweep parameter {self.parameter!r}; choose from {sorted(SWEEPABLE)}")
        if len(self.values) == 0:
            raise ConfigurationError("sweep needs at least one value")

    def configs(self):
        return [self.base.with_value(self.parameter, v) for v in self.values]


@dataclass
class SweepPoint:
    value: float
    status: str                    # "ok" | "failed"
    error: float = np.nan          # spatiotemporal flux error
    cond_max: float = np.nan       # worst observation-covariance condition seen
    message: str = ""
    per_time_errors: np.ndarray | None = field(default=None, repr=False)
    config_hash: str = ""


def _run_point(args):
    config_text, value = args
    from .config import from_text

    config = from_text(config_text)
    try:
        pieces = build_pieces(config)
        twin = make_twin(config, pieces)
        result = run_filter(config, twin.measurements, pieces)
        report = score(config, result, twin, pieces)
        cond_max = float(np.nanmax(result.cond)) if result.cond.size else np.nan
        return SweepPoint(value=value, status="ok",
                          error=report.spatiotemporal_error, cond_max=cond_max,
                          per_time_errors=report.per_time_errors,
                          config_hash=config.config_hash)
    except Exception as exc:  # record and continue with the other points
        return SweepPoint(value=value, status="failed",
                          message=f"{type(exc).__name__}: {exc}",
                          config_hash=config.config_hash)


def run_sweep(spec: SweepSpec, workers=1):
    """Run every sweep point; returns SweepPoints in value order."""
    tasks = [(c.to_text(), v) for c, v in zip(spec.configs(), spec.values)]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_run_point, tasks))
    else:
        points = [_run_point(t) for t in tasks]
    return points


def monotone_segments(values):
    """Sign pattern of successive differences, for sweep-shape assertions."""
    diffs = np.diff(np.asarray(values, float))
    return ["down" if d < 0 else "up" if d > 0 else "flat" for d in diffs]


def has_interior_minimum(values):
    """True when the smallest entry is strictly inside the curve."""
    vals = np.asarray(values, float)
    idx = int(np.nanargmin(vals))
    return 0 < idx < len(vals) - 1 and vals[0] > vals[idx] and vals[-1] > vals[idx]
