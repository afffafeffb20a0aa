"""Ensemble-based joint estimation of an unknown boundary heat flux and the
temperature field of a continuous-casting mold slab, from noisy interior
thermocouple readings produced by a synthetic twin."""

__version__ = "0.1.0"

from .config import RunConfig, from_text, gaussian_preset, multiquadric_preset
from .enkf import (JointEnsemble, MeasurementBatch, NoiseSpec, PriorSpec,
                   ensemble_update, forecast, init_ensemble, run_assimilation)
from .errors import ConfigurationError, NumericalError
from .heat import FluxField, HeatSolver, MaterialProps, StateField, step
from .mesh import Grid, build_grid
from .metrics import (ErrorReport, coverage_fraction, coverage_report,
                      score_flux, spatiotemporal_error, total_flux_series)
from .rbf import (KernelSpec, RbfBasis, WeightVector, build_basis,
                  default_centers, eval_kernel, project_flux, reconstruct_flux)
from .sweeps import SweepSpec, run_sweep
from .twin import (SensorLayout, TrueFluxSpec, TwinDataset, default_layout,
                   generate_twin, true_flux)
