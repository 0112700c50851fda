"""
Shared pytest configuration and fixtures for Rank Collapse Lab tests

This file provides common fixtures, hypothesis profiles, markers and custom
assertions used across all test modules in the project.
"""

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from src.core.config import RunConfig
from src.core.logging_config import configure_logging
from src.handlers.models import make_rng

# Test constants
TEST_SEED = 20240611
UNIT_ROW_TOL = 1e-12

# =============================================================================
# HYPOTHESIS PROFILES
# =============================================================================

settings.register_profile(
    "default",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("fast", max_examples=10, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

# =============================================================================
# CONFIGURATION FIXTURES
# =============================================================================

@pytest.fixture
def small_config():
    """Small sweep configuration that runs in milliseconds"""
    return RunConfig(
        seed=TEST_SEED,
        block="selective",
        n=4,
        d=3,
        k_layers=5,
        lambda_list=[-2.0, 0.0, 1.0],
        init="gaussian",
    )


@pytest.fixture
def collapse_config():
    """Selective LayerNorm stack with orthogonal init used for the collapse acceptance run"""
    return RunConfig(
        seed=TEST_SEED,
        block="selective",
        n=8,
        d=8,
        k_layers=64,
        lambda_list=[-5.0, 0.0],
        layernorm=True,
        init="orthogonal",
        decay=0.5,
    )


@pytest.fixture
def clean_env(monkeypatch):
    """Remove RANKLAB_* variables so config tests start from defaults"""
    for key in list(os.environ):
        if key.startswith("RANKLAB_") or key in ("LOG_LEVEL", "LOG_FORMAT"):
            monkeypatch.delenv(key, raising=False)
    return monkeypatch

# =============================================================================
# RANDOM DATA FIXTURES
# =============================================================================

@pytest.fixture
def rng():
    """Deterministic generator for tests that draw their own data"""
    return make_rng(TEST_SEED, 7)


@pytest.fixture
def unit_rows(rng):
    """5 x 3 matrix with unit rows"""
    y = rng.normal(size=(5, 3))
    return y / np.linalg.norm(y, axis=1, keepdims=True)

# =============================================================================
# TEMPORARY DIRECTORY FIXTURES
# =============================================================================

@pytest.fixture
def out_dir(tmp_path):
    """Directory for CSV and report artifacts"""
    path = tmp_path / "artifacts"
    path.mkdir()
    return path

# =============================================================================
# LOGGING
# =============================================================================

@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    """Route structlog through stdlib logging at WARNING for the whole session"""
    configure_logging("WARNING", "text")

# =============================================================================
# PYTEST CONFIGURATION
# =============================================================================

def pytest_configure(config):
    """Configure pytest with custom markers and settings"""
    config.addinivalue_line("markers", "unit: fast deterministic unit tests")
    config.addinivalue_line("markers", "property: hypothesis property tests")
    config.addinivalue_line("markers", "oracle: closed-form oracle comparisons")
    config.addinivalue_line("markers", "bounds: bound formulas and trace checks")
    config.addinivalue_line("markers", "suite: verify suites end to end")
    config.addinivalue_line("markers", "cli: command-line interface tests")
    config.addinivalue_line("markers", "config: configuration loading and validation")
    config.addinivalue_line("markers", "slow: marks tests as slow running")

# =============================================================================
# CUSTOM ASSERTIONS
# =============================================================================

def assert_unit_rows(y, tol=UNIT_ROW_TOL):
    """Assert every row of y has Euclidean norm 1 within tol"""
    norms = np.linalg.norm(y, axis=1)
    assert np.all(np.abs(norms - 1.0) <= tol), f"row norms {norms}"


def assert_lower_triangular(m):
    """Assert entries above the diagonal are exactly zero"""
    upper = np.triu(m, 1)
    assert np.all(upper == 0.0), f"upper part {upper}"


def assert_check_passed(check):
    """Assert a BoundCheck recorded at least one comparison and no violations"""
    assert check.checked > 0, f"{check.name} checked nothing"
    assert check.passed, f"{check.name}: {check.details}"


# Export custom assertions for use in tests
pytest.assert_unit_rows = assert_unit_rows
pytest.assert_lower_triangular = assert_lower_triangular
pytest.assert_check_passed = assert_check_passed
