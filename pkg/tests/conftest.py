import numpy as np
import pytest
from hypothesis import settings

from majorminor.builtins import three_path_example
from majorminor.paths import build_path_space

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def example():
    sc = three_path_example()
    return sc, build_path_space(sc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
