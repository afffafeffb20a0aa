#!/usr/bin/env python3
"""Reproduce the five hyperparameter studies as plot-ready CSV curves.

Each study sweeps one knob of a kernel preset over a bracketing grid while
everything else (twin included, where the knob allows) stays fixed.  With
matplotlib installed, PNG plots land next to the CSVs.
"""

import argparse
from pathlib import Path

import moldflux as mf
from moldflux.runio import write_sweep
from moldflux.sweeps import SweepSpec, run_sweep

STUDIES = {
    "ensemble_size": (110, 150, 225, 300, 450, 700),
    "eta": None,  # per-kernel grids below
    "kappa": (0.05, 0.1, 0.2, 0.4, 0.8),
    "shift": (-0.3, 0.0, 0.3, 0.6),
    "dt": (0.1, 0.2, 0.4),
    "obs_span": (0.4, 0.8, 2.0),
}
ETA_GRIDS = {"gaussian": (0.25, 0.5, 1.0, 2.0), "multiquadric": (0.1, 0.3, 1.0, 3.0, 6.0)}


def plot(points, parameter, kernel, outdir):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    ok = [(p.value, p.error) for p in points if p.status == "ok"]
    bad = [p.value for p in points if p.status != "ok"]
    if not ok:
        return
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(*zip(*ok), "o-", color="tab:blue")
    for v in bad:
        ax.axvline(v, color="tab:red", ls=":", lw=1)
    ax.set_xlabel(parameter)
    ax.set_ylabel("spatiotemporal flux error")
    ax.set_title(f"{kernel}: {parameter}")
    if parameter in ("eta", "ensemble_size"):
        ax.set_xscale("log")
    fig.tight_layout()
    fig.savefig(outdir / f"sweep_{parameter}_{kernel}.png", dpi=130)
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/sweeps", help="output root")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--kernel", choices=["gaussian", "multiquadric", "both"],
                        default="both")
    parser.add_argument("--study", choices=sorted(STUDIES), action="append",
                        help="repeatable; default: all studies")
    args = parser.parse_args()

    kernels = ["gaussian", "multiquadric"] if args.kernel == "both" else [args.kernel]
    studies = args.study or sorted(STUDIES)
    for kernel in kernels:
        base = mf.gaussian_preset() if kernel == "gaussian" else mf.multiquadric_preset()
        for parameter in studies:
            values = ETA_GRIDS[kernel] if parameter == "eta" else STUDIES[parameter]
            spec = SweepSpec(parameter=parameter, values=tuple(values), base=base)
            points = run_sweep(spec, workers=args.workers)
            outdir = Path(args.out) / kernel
            outdir.mkdir(parents=True, exist_ok=True)
            curve = write_sweep(points, spec, base, outdir)
            plot(points, parameter, kernel, outdir)
            print(f"{kernel} {parameter}:")
            for p in points:
                detail = (f"error {p.error:.4f}, max cond {p.cond_max:.3g}"
                          if p.status == "ok" else f"FAILED ({p.message})")
                print(f"  {parameter} = {p.value:g}: {detail}")
            print(f"  -> {curve}")


if __name__ == "__main__":
    main()
