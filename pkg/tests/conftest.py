import pytest

from components.cardinal import synthesize
from components.kernel import MultiquadricParams


@pytest.fixture(scope="session")
def table_decaying():
    """alpha = -5/2, c = 1, d = 1 at 1e-9 on [-8, 8]."""
    return synthesize(MultiquadricParams(-2.5, 1.0, 1), 1e-9, 8.0)


@pytest.fixture(scope="session")
def table_growing():
    """alpha = 1/2, c = 1, d = 1 at 1e-9 on [-8, 8]."""
    return synthesize(MultiquadricParams(0.5, 1.0, 1), 1e-9, 8.0)


@pytest.fixture(scope="session")
def table_2d():
    return synthesize(MultiquadricParams(0.5, 1.0, 2), 1e-7, 6.0)
