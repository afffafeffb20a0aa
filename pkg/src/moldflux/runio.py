"""Artifact persistence: CSV files with hash-stamped headers, JSON
manifests, twin and assimilation run directories.

Every CSV starts with ``# key = value`` metadata lines (always including
``config_hash`` and ``seed``), then a column-name row, then rows of
numbers printed with 17 significant digits.  Identical config + seed must
reproduce byte-identical CSVs; manifests are exempt (they carry wall-clock
timings).
"""

import json
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

FLOAT_FMT = "%.17g"
MANIFEST = "manifest.json"
CONFIG_FILE = "config.cfg"


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % float(v)


def write_csv(path, columns, rows, meta):
    path = Path(path)
    with path.open("w") as fh:
        for key, value in meta.items():
            fh.write(f"# {key} = {value}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path):
    """Parse one of our CSVs; returns (meta, columns, data array).

    Raises ConfigurationError naming the offending line on parse failure.
    """
    path = Path(path)
    meta, columns, data = {}, None, []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    key, _, value = line[1:].partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if columns is None:
                columns = [c.strip() for c in line.split(",")]
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise ConfigurationError(
                    f"{path}:{lineno}: expected {len(columns)} fields, got {len(parts)}")
            try:
                data.append([float(p) for p in parts])
            except ValueError:
                raise ConfigurationError(
                    f"{path}:{lineno}: cannot parse numeric row {line!r}") from None
    if columns is None:
        raise ConfigurationError(f"{path}: no header row found")
    return meta, columns, np.asarray(data, dtype=float)


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def package_versions():
    import scipy

    from . import __version__

    return {"moldflux": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(outdir, kind, config, files, timings, extra=None):
    payload = {
        "kind": kind,
        "config_hash": config.config_hash,
        "twin_hash": config.twin_hash,
        "seed": config.run.seed,
        "files": sorted(str(f) for f in files),
        "versions": package_versions(),
        "timings": timings,
    }
    if extra:
        payload.update(extra)
    write_json(Path(outdir) / MANIFEST, payload)


def read_manifest(rundir):
    path = Path(rundir) / MANIFEST
    if not path.exists():
        raise ConfigurationError(f"no {MANIFEST} in {rundir}; not a run directory")
    return json.loads(path.read_text())


def verify_manifest(rundir):
    """Every listed file exists and carries the manifest's config hash."""
    rundir = Path(rundir)
    manifest = read_manifest(rundir)
    for name in manifest["files"]:
        fpath = rundir / name
        if not fpath.exists():
            raise ConfigurationError(f"manifest lists missing file {name}")
        if fpath.suffix == ".csv":
            meta, _, _ = read_csv(fpath)
            if meta.get("config_hash") != manifest["config_hash"]:
                raise ConfigurationError(f"{name} carries a foreign config hash")
        elif fpath.suffix == ".json":
            payload = json.loads(fpath.read_text())
            if payload.get("config_hash") not in (manifest["config_hash"], None):
                raise ConfigurationError(f"{name} carries a foreign config hash")
        elif name == CONFIG_FILE:
            import hashlib

            digest = hashlib.sha256(fpath.read_text().encode()).hexdigest()[:16]
            if digest != manifest["config_hash"]:
                raise ConfigurationError(
                    f"{name} does not hash to the manifest's config hash")
    return manifest


class _StopWatch:
    def __init__(self):
        self.t0 = _time.perf_counter()
        self.laps = {}

    def lap(self, name):
        now = _time.perf_counter()
        self.laps[name] = round(now - self.t0, 6)
        self.t0 = now


# -- twin -------------------------------------------------------------------

def write_twin(twin, config, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {"config_hash": config.config_hash, "seed": config.run.seed,
            "twin_hash": config.twin_hash}
    watch = _StopWatch()

    rows = ((b.time, sid, r)
            for b in twin.measurements
            for sid, r in zip(b.sensor_ids, b.readings))
    write_csv(outdir / "measurements.csv", ["time", "sensor_id", "reading"], rows, meta)

    rows = ((t, f, twin.truth_flux[n, f])
            for n, t in enumerate(twin.step_times)
            for f in range(twin.truth_flux.shape[1]))
    write_csv(outdir / "truth_flux.csv", ["time", "face_id", "flux"], rows, meta)

    state_times = np.concatenate([[0.0], twin.obs_times])
    rows = ((t, c, twin.truth_states[n, c])
            for n, t in enumerate(state_times)
            for c in range(twin.truth_states.shape[1]))
    write_csv(outdir / "truth_states.csv", ["time", "cell_id", "temperature"], rows, meta)

    (outdir / CONFIG_FILE).write_text(config.to_text())
    watch.lap("write")
    files = ["measurements.csv", "truth_flux.csv", "truth_states.csv", CONFIG_FILE]
    write_manifest(outdir, "twin", config, files, watch.laps,
                   extra={"n_batches": len(twin.measurements)})
    return outdir


@dataclass
class LoadedTwin:
    manifest: dict
    measurements: list = field(repr=False)
    truth_flux_times: np.ndarray = field(repr=False)
    truth_flux: np.ndarray = field(repr=False)
    truth_state_times: np.ndarray = field(repr=False)
    truth_states: np.ndarray = field(repr=False)


def _pivot(times_col, id_col, value_col):
    """Rows (time, id, value) -> (unique_times, matrix[time, id])."""
    times = np.unique(times_col)
    n_ids = int(id_col.max()) + 1 if id_col.size else 0
    matrix = np.full((len(times), n_ids), np.nan)
    t_index = np.searchsorted(times, times_col)
    matrix[t_index, id_col.astype(int)] = value_col
    return times, matrix


def load_twin(twindir):
    twindir = Path(twindir)
    manifest = read_manifest(twindir)
    if manifest.get("kind") != "twin":
        raise ConfigurationError(f"{twindir} is not a twin dataset directory")

    from .enkf import MeasurementBatch

    _, _, m = read_csv(twindir / "measurements.csv")
    times, readings = _pivot(m[:, 0], m[:, 1], m[:, 2])
    batches = [MeasurementBatch(time=float(t), readings=readings[i],
                                sensor_ids=np.arange(readings.shape[1]))
               for i, t in enumerate(times)]

    _, _, f = read_csv(twindir / "truth_flux.csv")
    flux_times, flux = _pivot(f[:, 0], f[:, 1], f[:, 2])
    _, _, s = read_csv(twindir / "truth_states.csv")
    state_times, states = _pivot(s[:, 0], s[:, 1], s[:, 2])

    return LoadedTwin(manifest=manifest, measurements=batches,
                      truth_flux_times=flux_times, truth_flux=flux,
                      truth_state_times=state_times, truth_states=states)


def rehydrate_twin(config, loaded: LoadedTwin):
    """Rebuild a TwinDataset view from persisted arrays + config geometry."""
    from .driver import build_pieces
    from .mesh import refine
    from .twin import TwinDataset

    pieces = build_pieces(config)
    tgrid = pieces.grid if config.grid.refine_truth == 1 else \
        refine(pieces.grid, config.grid.refine_truth)
    n_obs = len(loaded.measurements)
    return TwinDataset(
        grid=tgrid, flux_spec=pieces.flux_spec, layout=pieces.layout,
        dt=config.time.dt, obs_span=config.time.obs_span,
        seed=config.run.seed, r_var=config.noise.r,
        measurements=loaded.measurements,
        step_times=loaded.truth_flux_times,
        truth_flux=loaded.truth_flux,
        obs_times=np.asarray([b.time for b in loaded.measurements]),
        truth_states=loaded.truth_states,
        clean_readings=np.full((n_obs, len(pieces.layout)), np.nan),
    )


# -- assimilation -----------------------------------------------------------

def write_assimilation(result, report, coverage, config, outdir, twin_dir=None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {"config_hash": config.config_hash, "seed": config.run.seed}
    watch = _StopWatch()
    files = []

    def emit(name, columns, rows):
        write_csv(outdir / name, columns, rows, meta)
        files.append(name)

    T, N = result.weight_mean.shape
    emit("weights.csv", ["time", "weight_id", "mean", "lo", "hi"],
         ((result.obs_times[t], j, result.weight_mean[t, j],
           result.weight_lo[t, j], result.weight_hi[t, j])
          for t in range(T) for j in range(N)))
    emit("flux_mean.csv", ["time", "face_id", "flux"],
         ((result.obs_times[t], f, result.flux_mean[t, f])
          for t in range(T) for f in range(result.flux_mean.shape[1])))
    emit("state_mean.csv", ["time", "cell_id", "temperature"],
         ((result.obs_times[t], c, result.state_mean[t, c])
          for t in range(T) for c in range(result.state_mean.shape[1])))
    for name, series in (("flux_probe.csv", result.flux_probe),
                         ("flux_total.csv", result.flux_total),
                         ("temp_probe.csv", result.temp_probe)):
        emit(name, ["time", "mean", "lo", "hi"],
             ((result.obs_times[t], *series[t]) for t in range(T)))
    emit("diagnostics.csv", ["time", "beta", "cond", "gain_residual"],
         ((result.obs_times[t], b, result.cond[t, b], result.gain_residual[t, b])
          for t in range(T) for b in range(result.cond.shape[1])))
    emit("forecast_probe.csv", ["time", "temperature"],
         zip(result.forecast_times, result.forecast_probe))
    emit("error_per_time.csv", ["time", "relative_error"],
         zip(result.obs_times, report.per_time_errors))

    report_name = f"error_report_{config.config_hash}.json"
    write_json(outdir / report_name, {
        "config_hash": config.config_hash,
        "spatiotemporal_error": report.spatiotemporal_error,
        "norm": report.norm,
        "coverage": coverage,
        "open_loop": result.open_loop,
        "probe_cell": result.temp_probe_cell,
        "probe_face": result.flux_probe_face,
        "config_snapshot": report.config_snapshot,
    })
    files.append(report_name)
    (outdir / CONFIG_FILE).write_text(config.to_text())
    files.append(CONFIG_FILE)
    watch.lap("write")
    write_manifest(outdir, "assimilation", config, files, watch.laps,
                   extra={"twin_dir": str(twin_dir) if twin_dir else None,
                          "spatiotemporal_error": report.spatiotemporal_error})
    return outdir


# -- sweep --------------------------------------------------------------------

def write_sweep(points, spec, config, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {"config_hash": config.config_hash, "seed": config.run.seed,
            "parameter": spec.parameter}
    curve_name = f"sweep_{spec.parameter}_{config.config_hash}.csv"
    write_csv(outdir / curve_name, ["value", "error", "cond_max", "ok"],
              ((p.value, p.error, p.cond_max, 1 if p.status == "ok" else 0)
               for p in points), meta)
    json_name = f"sweep_{spec.parameter}_{config.config_hash}.json"
    write_json(outdir / json_name, {
        "config_hash": config.config_hash,
        "parameter": spec.parameter,
        "points": [{"value": p.value, "status": p.status, "error": None
                    if np.isnan(p.error) else p.error,
                    "cond_max": None if np.isnan(p.cond_max) else p.cond_max,
                    "message": p.message, "config_hash": p.config_hash}
                   for p in points],
    })
    (outdir / CONFIG_FILE).write_text(config.to_text())
    write_manifest(outdir, "sweep", config, [curve_name, json_name, CONFIG_FILE],
                   {}, extra={"parameter": spec.parameter})
    return outdir / curve_name
