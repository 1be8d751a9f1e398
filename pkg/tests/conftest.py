import numpy as np
import pytest

from cflab.sampler import GaussSampler

# Seeds used for the long statistical runs.  They were fixed once before
# looking at results; the bands are 4 standard errors wide.
STREAM_SEED = 20240611


@pytest.fixture(scope="session")
def sampled_1e6():
    return GaussSampler(STREAM_SEED).draw(10**6 + 16)


@pytest.fixture(scope="session")
def sampled_1e5():
    return GaussSampler(7).draw(10**5)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
