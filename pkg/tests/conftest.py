"""Shared fixtures for the matchain test suite."""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Make the package importable without installation
ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from matchain.data_parser import library_at, parse_refractive_csv
from matchain.timemachine import figure_instance

DATA_DIR = ROOT / "data"
REFRACTIVE_CSV = DATA_DIR / "refractive_index.csv"
PUBLISHED_GROWTH_CSV = DATA_DIR / "published_growth.csv"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: scale tests, deselect with -m 'not slow'")
    config.addinivalue_line("markers", "conjecture: expected properties without a proof; failures are reported, not fatal")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def tungsten_libraries():
    return parse_refractive_csv(str(REFRACTIVE_CSV), substrate="Tungsten")


@pytest.fixture(scope="session")
def tungsten_450(tungsten_libraries):
    """Tungsten at 450 nm with the two-material TiO2/MgF2 library."""
    return library_at(tungsten_libraries, 450, ["TiO2", "MgF2"])


@pytest.fixture(scope="session")
def tungsten_450_all(tungsten_libraries):
    return library_at(tungsten_libraries, 450)


@pytest.fixture
def figure():
    return figure_instance()


@pytest.fixture
def published_growth():
    if not PUBLISHED_GROWTH_CSV.exists():
        pytest.skip(f"{PUBLISHED_GROWTH_CSV.name} not present in data/")
    return str(PUBLISHED_GROWTH_CSV)


@pytest.fixture
def no_telemetry_ipc(monkeypatch):
    monkeypatch.delenv("MATCHAIN_TELEMETRY_IPC", raising=False)
    return os.environ


@pytest.fixture(scope="session")
def refractive_csv():
    return str(REFRACTIVE_CSV)
