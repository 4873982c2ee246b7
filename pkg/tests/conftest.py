import numpy as np
import pytest

from hardylab.geometry import Boundary, GeometryConfig, Model, build_grid
from hardylab.weights import (EtaKind, WeightFamily, WeightSpec,
                              make_sin_family, validate_and_normalize)


@pytest.fixture(scope="session")
def cfg_small():
    return GeometryConfig(N=5, k=1, model=Model.REDUCED, R=0.25,
                          grading_gamma=2.0, n_r=16, n_z=8)


@pytest.fixture(scope="session")
def grid_small(cfg_small):
    return build_grid(cfg_small)


@pytest.fixture(scope="session")
def spec_sin(grid_small):
    return validate_and_normalize(
        make_sin_family(0.5, 1.5, 0.0, eta_kind=EtaKind.RHO_SQUARED),
        grid_small)


@pytest.fixture(scope="session")
def spec_const(grid_small):
    raw = WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                     eta_kind=EtaKind.RHO_SQUARED)
    return validate_and_normalize(raw, grid_small)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
