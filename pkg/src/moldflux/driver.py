"""Glue between a RunConfig and the library: build the grid, solver, basis
and priors, generate the twin, run the filter, score the result."""

from dataclasses import dataclass

import numpy as np

from . import config as cfg
from .enkf import NoiseSpec, PriorSpec, run_assimilation
from .heat import HeatSolver, MaterialProps
from .mesh import Grid, build_grid
from .metrics import score_flux
from .rbf import KernelSpec, RbfBasis, build_basis, default_centers, project_flux
from .twin import (SensorLayout, TrueFluxSpec, TwinDataset, default_layout,
                   generate_twin, true_flux)


@dataclass
class RunPieces:
    grid: Grid
    props: MaterialProps
    solver: HeatSolver
    flux_spec: TrueFluxSpec
    layout: SensorLayout
    basis: RbfBasis
    prior: PriorSpec
    noise: NoiseSpec
    projection_residual: float


def build_pieces(config: cfg.RunConfig) -> RunPieces:
    """Instantiate every domain object a run needs; validates on the way."""
    g = config.grid
    grid = build_grid(g.lx, g.ly, g.lz, g.nx, g.ny, g.nz)
    m = config.material
    props = MaterialProps(rho=m.rho, cp=m.cp, ks=m.ks, h=m.h,
                          t_fluid=m.t_fluid, t_init=m.t_init)
    flux_spec = TrueFluxSpec(b=config.flux_truth.b, c=config.flux_truth.c,
                             f_max=config.flux_truth.f_max,
                             t_f=config.time.t_f, ks=m.ks)
    s = config.sensors
    layout = default_layout(grid, plane_y=s.plane_y, n_x=s.n_x, n_z=s.n_z,
                            margin_frac=s.margin_frac)

    kernel = KernelSpec(kind=config.rbf.kernel, eta=config.rbf.eta)
    if config.rbf.centers == "auto":
        centers = default_centers(grid, layout.hot_face_xz)
    else:
        centers = cfg.parse_centers(config.rbf.centers)
    basis = build_basis(centers, grid, kernel)

    # prior weight mean: project the known initial flux onto the basis
    g0 = true_flux(flux_spec, grid.hot_faces.centroids, 0.0)
    weights0, residual = project_flux(g0, basis)
    prior = PriorSpec(weight_mean=weights0.values, kappa=config.prior.kappa,
                      shift=config.prior.shift, state_mean=m.t_init,
                      state_var=config.prior.state_var)
    noise = NoiseSpec(q_var=config.noise.q, r_var=config.noise.r)

    return RunPieces(grid=grid, props=props, solver=HeatSolver(grid, props),
                     flux_spec=flux_spec, layout=layout, basis=basis,
                     prior=prior, noise=noise, projection_residual=residual)


def make_twin(config: cfg.RunConfig, pieces: RunPieces | None = None) -> TwinDataset:
    pieces = pieces or build_pieces(config)
    return generate_twin(pieces.grid, pieces.props, pieces.flux_spec,
                         pieces.layout, config.time.dt, config.time.obs_span,
                         config.noise.r, config.run.seed,
                         refine_factor=config.grid.refine_truth)


def run_filter(config: cfg.RunConfig, measurements, pieces: RunPieces | None = None,
               open_loop=False, method="direct"):
    pieces = pieces or build_pieces(config)
    return run_assimilation(
        solver=pieces.solver, basis=pieces.basis, prior=pieces.prior,
        noise=pieces.noise, sensor_locations=pieces.layout.locations,
        measurements=measurements, s_n=config.filter.ensemble_size,
        beta_max=config.filter.beta_max, dt=config.time.dt,
        obs_span=config.time.obs_span, t_f=config.time.t_f,
        seed=config.run.seed, temp_probe=config.probes.temperature,
        flux_probe=config.probes.flux, open_loop=open_loop, method=method)


def score(config: cfg.RunConfig, result, twin: TwinDataset,
          pieces: RunPieces | None = None, norm="l2"):
    pieces = pieces or build_pieces(config)
    return score_flux(result, twin, pieces.grid, norm=norm,
                      config_snapshot=config.to_dict())


def run_and_score(config: cfg.RunConfig, twin: TwinDataset | None = None,
                  open_loop=False):
    """Convenience: build, assimilate against (possibly fresh) twin, score."""
    pieces = build_pieces(config)
    twin = twin if twin is not None else make_twin(config, pieces)
    result = run_filter(config, twin.measurements, pieces, open_loop=open_loop)
    report = score(config, result, twin, pieces)
    return result, report, twin, pieces
