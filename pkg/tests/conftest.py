import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: desk-scale training acceptance runs (minutes to an hour on CPU)"
    )
    config.addinivalue_line(
        "markers", "integration: multi-module tests that write run directories"
    )


@pytest.fixture
def rng():
    """Seeded generator so pytest-style numerical tests are reproducible."""
    return np.random.default_rng(0)


@pytest.fixture
def run_dir(tmp_path):
    """Empty run directory for a single test."""
    path = tmp_path / "run"
    path.mkdir()
    return path
