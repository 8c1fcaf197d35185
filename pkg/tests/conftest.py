import pytest

from csma_aoi.model import SystemParams


@pytest.fixture
def table_point():
    """lambda=0.8, mu=1, gamma=2, w=1: the stationary AoI table operating point."""
    return SystemParams(lam=0.8, mu=1.0, gamma=2.0, w=1.0)


@pytest.fixture
def trajectory_point():
    """lambda=0.8, mu=1, gamma=2, w=2: the density-trajectory operating point."""
    return SystemParams(lam=0.8, mu=1.0, gamma=2.0, w=2.0)


@pytest.fixture
def dense_point():
    """lambda=0.8, mu=1, gamma=5 with costs 0.1/0.2/0.4: a finite-MFE point."""
    return SystemParams(lam=0.8, mu=1.0, gamma=5.0)
