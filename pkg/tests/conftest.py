import numpy as np
import pytest


def crandn(rng, *shape):
    """Complex standard normal array."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
