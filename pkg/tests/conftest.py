# conftest.py
import numpy as np
import pytest

from curveflow.curve_geometry import circle_profile, ellipse_profile
from curveflow.spectral import AngleGrid
from curveflow.symmetry_skeleton import flower_generator


@pytest.fixture
def circle():
    # Symmetrieordnung 4: Zentrum über den Schwerpunkt, ohne Gittersuche
    return circle_profile(1.0, AngleGrid(256), symmetry_order=4)


@pytest.fixture
def ellipse():
    return ellipse_profile(2.0, 1.0, AngleGrid(256))


@pytest.fixture
def flower3():
    return flower_generator(3, 0.05, 1.0, AngleGrid(192))


@pytest.fixture
def flower5():
    return flower_generator(5, 0.01, 1.0, AngleGrid(320))


@pytest.fixture
def flower8():
    return flower_generator(8, 0.005, 1.0, AngleGrid(256))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def flower3_exact():
    """Geschlossene Formen für 1/rho = 1 - 0.4 cos(3 theta)."""
    entropy = -2.0 * np.pi * np.log((1.0 + np.sqrt(0.84)) / 2.0)
    return {
        "sigma": 2.0 * np.pi,
        "lambda": 0.99 * np.pi,
        "h": 2.0 / 0.99,
        "deficit": 0.04 * np.pi ** 2,
        "entropy": entropy,
        "int_rho": 2.0 * np.pi / np.sqrt(0.84),
        "gage_slack": 2.0 * np.pi / np.sqrt(0.84) - 2.0 * np.pi / 0.99,
        "green_osher_slack": entropy - np.pi * np.log(1.0 / 0.99),
    }
