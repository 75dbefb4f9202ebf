"""Pytest configuration and fixtures for thzsense.

Provides the laboratory scene, both band presets, noise-free and noisy
synthesis options, and a helper that builds sweeps from explicit tap lists.
"""

import logging
import math

import numpy as np
import pytest

from thzsense.attenuation import FrequencySweep
from thzsense.constants import SPEED_OF_LIGHT
from thzsense.geometry import BandConfig, Scene, frequency_grid
from thzsense.synth import SynthesisConfig

# Configure logging for tests
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@pytest.fixture(autouse=True)
def reset_thzsense_logger():
    """Undoes the CLI logging setup so caplog sees package records."""
    yield
    package_logger = logging.getLogger('thzsense')
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
        handler.close()
    package_logger.setLevel(logging.NOTSET)
    package_logger.propagate = True


@pytest.fixture(scope='session')
def scene():
    """The laboratory scene: d = 0.92 m, h = 1 m, 4 x 4 x 3 m room."""
    return Scene.laboratory()


@pytest.fixture(scope='session')
def g_band():
    return BandConfig.g_band()


@pytest.fixture(scope='session')
def w_band():
    return BandConfig.w_band()


@pytest.fixture
def quiet():
    """Synthesis without noise."""
    return SynthesisConfig(noise_floor=-math.inf)


@pytest.fixture
def noisy():
    return SynthesisConfig(noise_floor=-60.0, seed=1)


@pytest.fixture
def make_sweep():
    """Builds a sweep from (amplitude, delay_s) taps on a band grid.

    Returns:
        function: make(band, taps, label='') -> FrequencySweep
    """
    def _make(band, taps, label=''):
        f = frequency_grid(band)
        values = np.zeros(f.shape, dtype=np.complex128)
        for amplitude, delay in taps:
            values += amplitude * np.exp(-2j * np.pi * f * delay)
        return FrequencySweep(band, values, label)

    return _make


@pytest.fixture
def bin_delay():
    """Delay of one un-padded DFT bin of a band, in seconds."""
    def _delay(band):
        return 1.0 / (band.n_points * band.spacing)

    return _delay


@pytest.fixture(scope='session')
def speed_of_light():
    return SPEED_OF_LIGHT


# Test markers for categorization
def pytest_configure(config):
    """Configure custom pytest markers."""
    config.addinivalue_line(
        "markers", "geometry: scene, band and image-method geometry"
    )
    config.addinivalue_line(
        "markers", "synth: channel synthesis and knife-edge diffraction"
    )
    config.addinivalue_line(
        "markers", "attenuation: calibration and excess attenuation statistics"
    )
    config.addinivalue_line(
        "markers", "classify: hypothesis distributions, LLRs and majority voting"
    )
    config.addinivalue_line(
        "markers", "cir: power delay profile estimation"
    )
    config.addinivalue_line(
        "markers", "features: multipath component extraction and matching"
    )
    config.addinivalue_line(
        "markers", "localize: regime classification and offset inversion"
    )
    config.addinivalue_line(
        "markers", "io: sweep, model, feature and session files"
    )
    config.addinivalue_line(
        "markers", "cli: command-line subcommands"
    )
    config.addinivalue_line(
        "markers", "slow: tests that take more than 5 seconds"
    )
