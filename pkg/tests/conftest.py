import numpy as np
import pytest

from mcident.generators import random_stochastic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pair(n, seed, density=1.0, symmetric=False):
    return (random_stochastic(n, (seed, 0), density, symmetric),
            random_stochastic(n, (seed, 1), density, symmetric))
