import numpy as np
import pytest

from epnslab.spectral import SpectralGrid


@pytest.fixture(scope="session")
def grid16():
    return SpectralGrid(16)


@pytest.fixture(scope="session")
def grid32():
    return SpectralGrid(32)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_real_field(grid, rng, band=(1, 4)):
    """Random real physical samples, band-limited, zero mean, O(1) amplitude."""
    from epnslab.solver import band_limited_pattern
    return band_limited_pattern(grid, rng, band)
