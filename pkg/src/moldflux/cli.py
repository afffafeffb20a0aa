"""Batch command line: twin -> assimilate -> sweep -> report.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from . import runio
from .driver import build_pieces, make_twin, run_filter, score
from .errors import ConfigurationError, NumericalError
from .metrics import coverage_report, total_flux_series
from .sweeps import SweepSpec, run_sweep


def _load_config(args):
    path = Path(args.config)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    config = cfg.from_text(path.read_text())
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    if getattr(args, "kernel", None) is not None:
        config = config.with_kernel(args.kernel)
    return config.validate()


def cmd_twin(args):
    config = _load_config(args)
    twin = make_twin(config)
    outdir = runio.write_twin(twin, config, args.out)
    print(f"twin dataset written to {outdir} "
          f"({len(twin.measurements)} measurement batches, "
          f"twin_hash {config.twin_hash})")
    return 0


def cmd_assimilate(args):
    config = _load_config(args)
    loaded = runio.load_twin(args.twin)
    if loaded.manifest["twin_hash"] != config.twin_hash:
        raise ConfigurationError(
            f"twin dataset {args.twin} was generated from a different twin "
            f"config (hash {loaded.manifest['twin_hash']}, expected "
            f"{config.twin_hash}); refusing to score against a stale twin")
    pieces = build_pieces(config)
    result = run_filter(config, loaded.measurements, pieces,
                        open_loop=args.open_loop)
    report = score(config, result, runio.rehydrate_twin(config, loaded), pieces)
    coverage = coverage_report(result, runio.rehydrate_twin(config, loaded),
                               pieces.grid, config.probes.temperature)
    outdir = runio.write_assimilation(result, report, coverage, config,
                                      args.out, twin_dir=args.twin)
    print(f"assimilation written to {outdir}")
    print(f"spatiotemporal flux error: {report.spatiotemporal_error:.4f} "
          f"({100 * report.spatiotemporal_error:.2f}%)")
    print(f"temperature-probe envelope coverage: {coverage['temperature']:.2f}")
    return 0


def cmd_sweep(args):
    config = _load_config(args)
    if config.sweep is None:
        raise ConfigurationError("config has no [sweep] section")
    spec = SweepSpec(parameter=config.sweep.parameter,
                     values=config.sweep.values, base=config)
    points = run_sweep(spec, workers=args.workers)
    curve = runio.write_sweep(points, spec, config, args.out)
    for p in points:
        status = f"error {p.error:.4f}" if p.status == "ok" else f"FAILED ({p.message})"
        print(f"{spec.parameter} = {p.value:g}: {status}")
    print(f"sweep curve written to {curve}")
    return 0


def cmd_report(args):
    rundir = Path(args.run_dir)
    manifest = runio.verify_manifest(rundir)
    out = Path(args.out) if args.out else rundir
    out.mkdir(parents=True, exist_ok=True)
    kind = manifest.get("kind")
    if kind == "assimilation":
        _report_assimilation(rundir, manifest, out)
    elif kind == "sweep":
        _report_sweep(rundir, manifest, out)
    elif kind == "twin":
        _report_twin(rundir, manifest, out)
    else:
        raise ConfigurationError(f"unknown run kind {kind!r} in {rundir}")
    print(f"report written to {out / 'summary.md'}")
    return 0


def _report_assimilation(rundir, manifest, out):
    import json

    config = cfg.from_text((rundir / runio.CONFIG_FILE).read_text())
    report_path = rundir / f"error_report_{manifest['config_hash']}.json"
    payload = json.loads(report_path.read_text())
    meta = {"config_hash": manifest["config_hash"], "seed": manifest["seed"]}

    lines = [
        "# Assimilation run summary",
        "",
        f"- config hash: `{manifest['config_hash']}`",
        f"- seed: {manifest['seed']}",
        f"- open loop: {payload['open_loop']}",
        "",
        "| kernel | S_n | eta | kappa | shift | dt | obs span | error |",
        "|---|---|---|---|---|---|---|---|",
        f"| {config.rbf.kernel} | {config.filter.ensemble_size} | "
        f"{config.rbf.eta:g} | {config.prior.kappa:g} | {config.prior.shift:g} | "
        f"{config.time.dt:g} | {config.time.obs_span:g} | "
        f"{payload['spatiotemporal_error']:.4f} |",
        "",
        f"Temperature-probe envelope coverage: {payload['coverage']['temperature']:.3f}",
        f"Flux-probe envelope coverage: {payload['coverage']['flux']:.3f}",
    ]

    twin_dir = manifest.get("twin_dir")
    if twin_dir and Path(twin_dir).exists():
        loaded = runio.load_twin(twin_dir)
        twin = runio.rehydrate_twin(config, loaded)
        pieces = build_pieces(config)
        idx, sensor = _sensor_probe(twin, config)
        truth_temp = twin.truth_temperature_at(sensor)[1:]
        _, _, probe = runio.read_csv(rundir / "temp_probe.csv")
        runio.write_csv(out / "temp_probe_compare.csv",
                        ["time", "truth", "mean", "lo", "hi"],
                        np.column_stack([probe[:, 0], truth_temp, probe[:, 1:]]),
                        meta)
        from .metrics import truth_flux_at

        truth_flux = truth_flux_at(twin, pieces.grid,
                                   [b.time for b in twin.measurements])
        truth_total = total_flux_series(truth_flux, pieces.grid.hot_faces.areas)
        _, _, total = runio.read_csv(rundir / "flux_total.csv")
        runio.write_csv(out / "flux_total_compare.csv",
                        ["time", "truth", "mean", "lo", "hi"],
                        np.column_stack([total[:, 0], truth_total, total[:, 1:]]),
                        meta)
        probe_face = payload["probe_face"]
        truth_probe_flux = truth_flux[:, probe_face]
        _, _, fprobe = runio.read_csv(rundir / "flux_probe.csv")
        runio.write_csv(out / "flux_probe_compare.csv",
                        ["time", "truth", "mean", "lo", "hi"],
                        np.column_stack([fprobe[:, 0], truth_probe_flux, fprobe[:, 1:]]),
                        meta)
        lines += ["", "Probe comparison series: `temp_probe_compare.csv`, "
                      "`flux_probe_compare.csv`, `flux_total_compare.csv`."]

    (out / "summary.md").write_text("\n".join(lines) + "\n")


def _sensor_probe(twin, config):
    from .metrics import snap_to_sensor

    return snap_to_sensor(twin.layout, config.probes.temperature)


def _report_sweep(rundir, manifest, out):
    import json

    name = f"sweep_{manifest['parameter']}_{manifest['config_hash']}.json"
    payload = json.loads((rundir / name).read_text())
    lines = [
        "# Sweep summary",
        "",
        f"- parameter: {payload['parameter']}",
        f"- config hash: `{payload['config_hash']}`",
        "",
        "| value | error | max cond(P_y) | status |",
        "|---|---|---|---|",
    ]
    for p in payload["points"]:
        err = "-" if p["error"] is None else f"{p['error']:.4f}"
        cond = "-" if p["cond_max"] is None else f"{p['cond_max']:.3e}"
        status = p["status"] if p["status"] == "ok" else f"failed: {p['message']}"
        lines.append(f"| {p['value']:g} | {err} | {cond} | {status} |")
    (out / "summary.md").write_text("\n".join(lines) + "\n")


def _report_twin(rundir, manifest, out):
    lines = [
        "# Twin dataset summary",
        "",
        f"- config hash: `{manifest['config_hash']}`",
        f"- twin hash: `{manifest['twin_hash']}`",
        f"- measurement batches: {manifest.get('n_batches')}",
        f"- files: {', '.join(manifest['files'])}",
    ]
    (out / "summary.md").write_text("\n".join(lines) + "\n")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="moldflux",
        description="Twin-data reproduction of ensemble flux/state estimation "
                    "for a casting mold slab.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, twin_arg=False):
        p.add_argument("--config", required=True, help="path to a run config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (sweeps); results do not depend on it")
        p.add_argument("--kernel", choices=["gaussian", "multiquadric"],
                       default=None, help="override [rbf] kernel")

    p_twin = sub.add_parser("twin", help="generate the synthetic twin dataset")
    common(p_twin)
    p_twin.set_defaults(func=cmd_twin)

    p_assim = sub.add_parser("assimilate", help="run the filter against a twin")
    p_assim.add_argument("twin", help="twin dataset directory")
    common(p_assim)
    p_assim.add_argument("--open-loop", action="store_true",
                         help="skip measurement updates (baseline run)")
    p_assim.set_defaults(func=cmd_assimilate)

    p_sweep = sub.add_parser("sweep", help="run the [sweep] section of the config")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="summarize a finished run directory")
    p_report.add_argument("run_dir", help="twin/assimilation/sweep output directory")
    p_report.add_argument("--out", default=None, help="where to write the summary")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
