#!/usr/bin/env python3
"""Render probe time-series figures from a finished assimilation run dir.

Reads the ``*_compare.csv`` files produced by ``moldflux report`` (truth,
posterior mean, 5-95% envelope) and draws the three standard figures:
temperature at the probe, flux at the probe face, and total hot-face flux.
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from moldflux.runio import read_csv

FIGS = [
    ("temp_probe_compare.csv", "temperature at probe (K)", "probe_temperature.png"),
    ("flux_probe_compare.csv", "flux at probe face (W/m$^2$)", "probe_flux.png"),
    ("flux_total_compare.csv", "total hot-face flux (W)", "total_flux.png"),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", help="assimilation directory after 'moldflux report'")
    args = parser.parse_args()
    rundir = Path(args.run_dir)

    for name, ylabel, outname in FIGS:
        path = rundir / name
        if not path.exists():
            print(f"skipping {name} (run 'moldflux report' first)")
            continue
        _, cols, data = read_csv(path)
        t, truth, mean, lo, hi = (data[:, cols.index(c)]
                                  for c in ("time", "truth", "mean", "lo", "hi"))
        fig, ax = plt.subplots(figsize=(6.4, 3.6))
        ax.fill_between(t, lo, hi, alpha=0.3, color="tab:orange", label="5-95% envelope")
        ax.plot(t, mean, color="tab:orange", label="posterior mean")
        ax.plot(t, truth, color="tab:blue", lw=1.2, label="truth")
        ax.set_xlabel("time (s)")
        ax.set_ylabel(ylabel)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        fig.savefig(rundir / outname, dpi=130)
        plt.close(fig)
        print(f"wrote {rundir / outname}")


if __name__ == "__main__":
    main()
