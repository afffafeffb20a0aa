#!/usr/bin/env python3
"""Run both reference configurations end to end and print a results table.

For each kernel preset this generates the twin, runs the assimilation and
its open-loop baseline, scores the flux reconstruction, and reports the
envelope coverage at the temperature probe.  Pass --fast for a coarse,
quick variant (useful as a smoke test; its numbers are not the reference
ones).
"""

import argparse
import time

import moldflux as mf
from moldflux.driver import build_pieces, make_twin, run_filter, score
from moldflux.metrics import coverage_report


def shrink(config):
    import dataclasses

    return dataclasses.replace(
        config,
        grid=dataclasses.replace(config.grid, nx=10, ny=6, nz=8),
        sensors=dataclasses.replace(config.sensors, n_x=5, n_z=5),
        filter=dataclasses.replace(config.filter, ensemble_size=60),
        time=dataclasses.replace(config.time, t_f=10.0),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fast", action="store_true", help="coarse quick variant")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    rows = []
    for name, config in (("gaussian", mf.gaussian_preset()),
                         ("multiquadric", mf.multiquadric_preset())):
        if args.fast:
            config = shrink(config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        t0 = time.perf_counter()
        pieces = build_pieces(config)
        twin = make_twin(config, pieces)
        result = run_filter(config, twin.measurements, pieces)
        report = score(config, result, twin, pieces)
        baseline = score(config, run_filter(config, twin.measurements, pieces,
                                            open_loop=True), twin, pieces)
        cov = coverage_report(result, twin, pieces.grid, config.probes.temperature)
        rows.append((name, config, report.spatiotemporal_error,
                     baseline.spatiotemporal_error, cov["temperature"],
                     time.perf_counter() - t0))

    print("\n| kernel | S_n | eta | kappa | shift | dt | span | error | "
          "open-loop | probe coverage | seconds |")
    print("|---|---|---|---|---|---|---|---|---|---|---|")
    for name, c, err, ol, cov, secs in rows:
        print(f"| {name} | {c.filter.ensemble_size} | {c.rbf.eta:g} | "
              f"{c.prior.kappa:g} | {c.prior.shift:g} | {c.time.dt:g} | "
              f"{c.time.obs_span:g} | {err:.4f} | {ol:.4f} | {cov:.2f} | "
              f"{secs:.0f} |")


if __name__ == "__main__":
    main()
