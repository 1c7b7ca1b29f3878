import pytest

from blockqmle.blocks import BlockConfig, build_blocks
from blockqmle.models import ConstantDiffusion
from blockqmle.simulate import (
    NoiseConfig,
    PathConfig,
    SamplingConfig,
    simulate_observations,
)


@pytest.fixture(scope="session")
def obs200():
    obs, path = simulate_observations(
        PathConfig(), SamplingConfig(n=200), NoiseConfig(v=(0.001, 0.001)), seed=42
    )
    return obs


@pytest.fixture(scope="session")
def bd200(obs200):
    return build_blocks(obs200, BlockConfig(b_n=200))


@pytest.fixture(scope="session")
def obs2000():
    obs, path = simulate_observations(
        PathConfig(), SamplingConfig(n=2000), NoiseConfig(v=(0.001, 0.001)), seed=7
    )
    return obs


@pytest.fixture(scope="session")
def bd2000(obs2000):
    return build_blocks(obs2000, BlockConfig(b_n=2000))


@pytest.fixture(scope="session")
def model():
    return ConstantDiffusion()
