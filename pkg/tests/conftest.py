import numpy as np
import pytest

from moldflux import MaterialProps, build_grid
from moldflux.config import (FilterSection, GridSection, NoiseSection,
                             RbfSection, RunConfig, SensorSection, TimeSection)

MOLD_PROPS = dict(rho=5.0, cp=20.0, ks=3.0, h=5.66e4, t_fluid=350.0, t_init=400.0)


@pytest.fixture
def props():
    return MaterialProps(**MOLD_PROPS)


@pytest.fixture
def small_grid():
    return build_grid(1.0, 0.04, 0.8, 5, 4, 4)


@pytest.fixture
def default_grid():
    return build_grid(1.0, 0.04, 0.8, 20, 8, 16)


def small_config(**overrides):
    """A fast, fully valid config: coarse grid, few sensors, short horizon."""
    base = dict(
        grid=GridSection(nx=8, ny=4, nz=6),
        sensors=SensorSection(n_x=4, n_z=4),
        rbf=RbfSection(kernel="multiquadric", eta=3.0),
        filter=FilterSection(ensemble_size=40, beta_max=1),
        time=TimeSection(dt=0.5, obs_span=1.0, t_f=5.0),
        noise=NoiseSection(q=0.5, r=0.034),
    )
    base.update(overrides)
    return RunConfig(**base)
