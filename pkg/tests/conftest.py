"""Shared fixtures; the expensive full-resolution map is session scoped."""

import numpy as np
import pytest

from spinopt.fields import AntennaSpec, GridSpec, NVFrame, biot_savart_rabi_map


@pytest.fixture(scope="session")
def default_antenna():
    return AntennaSpec()


@pytest.fixture(scope="session")
def small_map(default_antenna):
    """Coarse Rabi map for fast tests."""
    grid = GridSpec(5.0, 5.0, 120, 120)
    return biot_savart_rabi_map(default_antenna, grid, NVFrame())


@pytest.fixture(scope="session")
def full_map(default_antenna):
    """Full-resolution default map (500x500); shared by acceptance tests."""
    return biot_savart_rabi_map(default_antenna, GridSpec(), NVFrame())
