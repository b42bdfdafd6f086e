import asyncio

import numpy as np
import pytest

from datsim.data.dataset import Dataset
from datsim.data.generators import gen_gaussian_mixture, gen_two_moons
from datsim.models.zoo import ModelSpec


def pytest_addoption(parser):
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="Run long statistical tests",
    )


def pytest_configure(config):
    if not config.option.slow and not config.option.markexpr:
        setattr(config.option, "markexpr", "not slow")


@pytest.fixture(scope="session")
def event_loop(request):
    loop = asyncio.get_event_loop_policy().new_event_loop()
    yield loop
    loop.close()


@pytest.fixture()
def mixture() -> Dataset:
    return gen_gaussian_mixture(2, 3, 40, 4.0, seed=7)


@pytest.fixture()
def moons() -> Dataset:
    return gen_two_moons(64, 0.1, seed=3)


@pytest.fixture()
def linear_spec() -> ModelSpec:
    return ModelSpec.linear(3, 2)


@pytest.fixture()
def gen() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture()
def output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("DATSIM_OUTPUT_DIR", str(tmp_path))
    return tmp_path
