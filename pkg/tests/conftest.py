import hypothesis
import numpy as np
import pytest

from secondgrade import reference as ref
from secondgrade.noise import NoiseConfig, sample_path
from secondgrade.operators import build_model
from secondgrade.solver import SolverConfig

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    return build_model(ref.N_GRID, ref.ALPHA, ref.N_MODES)


@pytest.fixture(scope="session")
def small_model():
    return build_model(8, 0.1, 4)


@pytest.fixture(scope="session")
def path():
    return sample_path(NoiseConfig(epsilon=ref.EPSILON, seed=ref.SEED, t_min=ref.T_MIN,
                                   t_max=ref.T_MAX, dt=ref.DT))


@pytest.fixture(scope="session")
def config():
    return SolverConfig(nu=ref.NU, alpha=ref.ALPHA, epsilon=ref.EPSILON, n=ref.N_MODES,
                        N=ref.N_GRID, dt=ref.DT, t_span=(0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
