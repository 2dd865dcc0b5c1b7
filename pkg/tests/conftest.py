"""Shared fixtures: models, short grids and an isolated settings environment."""

import pytest

from src.bandedge.models import AnisotropicEffMass, FreeSpace, Grid, IsotropicEffMass
from src.core.config import reset_settings


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Point every run at a temporary output directory with default numerics."""
    monkeypatch.setenv("BANDEDGE_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("BANDEDGE_WORKERS", "1")
    monkeypatch.setenv("BANDEDGE_CHUNK_SIZE", "128")
    monkeypatch.setenv("BANDEDGE_DEFAULT_DTAU", "0.01")
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def isotropic():
    return IsotropicEffMass()


@pytest.fixture
def free_space():
    return FreeSpace()


@pytest.fixture
def anisotropic():
    return AnisotropicEffMass(omega_c=50.0)


@pytest.fixture
def short_grid():
    return Grid(tau_max=5.0, dtau=0.01)
