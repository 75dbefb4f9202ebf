"""Power delay profile estimation from a complex frequency sweep.

The sweep is windowed, zero padded and inverse transformed; power is
reported against path length z = c * tau on [0, c / delta_f).
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.signal import get_window

from thzsense.constants import SPEED_OF_LIGHT
from thzsense.errors import ConfigException

log = logging.getLogger(__name__)

DEFAULT_BETA = 6.0
DEFAULT_ZERO_PAD = 8

# Energy fraction in the upper half of the delay axis that suggests aliasing.
ALIAS_WARNING_FRACTION = 0.01


class Window(enum.Enum):
    RECTANGULAR = 'rectangular'
    HANN = 'hann'
    KAISER = 'kaiser'


def window_samples(window, n, beta=DEFAULT_BETA):
    window = Window(window)
    if window is Window.KAISER:
        spec = ('kaiser', float(beta))
    elif window is Window.HANN:
        spec = 'hann'
    else:
        spec = 'boxcar'
    return get_window(spec, n, fftbins=False)


def delay_resolution(cfg):
    """Path-length resolution c / (f_stop - f_start) in meters."""
    return SPEED_OF_LIGHT / cfg.span


def alias_free_range(cfg):
    return SPEED_OF_LIGHT / cfg.spacing


@dataclass(frozen=True, eq=False)
class PowerDelayProfile:
    """PDP on a uniform path-length axis, normalized to its peak.

    ``peak_power`` is the unnormalized peak of |ifft|^2, so
    ``linear_power()`` satisfies Parseval for a rectangular window without
    padding. Multiplying sqrt(linear power) by ``amplitude_scale`` gives the
    amplitude of a tap sitting exactly on a bin.
    """
    path_lengths: np.ndarray
    power_db: np.ndarray
    delay_resolution: float
    alias_free_range: float
    window_tag: Window
    zero_pad_factor: int
    peak_power: float
    amplitude_scale: float
    beta: float = None
    label: str = ''
    upper_half_fraction: float = 0.0

    @property
    def delays(self):
        return self.path_lengths / SPEED_OF_LIGHT

    @property
    def bin_length(self):
        """Path-length spacing of the (padded) axis."""
        return float(self.path_lengths[1] - self.path_lengths[0])

    def linear_power(self):
        return self.peak_power * 10.0 ** (self.power_db / 10.0)

    def amplitude_at(self, index):
        """Linear tap amplitude at the given bin(s)."""
        power = self.peak_power * 10.0 ** (self.power_db[index] / 10.0)
        return np.sqrt(power) * self.amplitude_scale

    @property
    def aliasing_suspected(self):
        return self.upper_half_fraction > ALIAS_WARNING_FRACTION

    def peak_path_length(self):
        return float(self.path_lengths[int(np.argmax(self.power_db))])

    def to_frame(self, units='cm'):
        """Plot-ready table, path length in centimeters ('cm') or meters ('m')."""
        if units not in ('cm', 'm'):
            raise ConfigException('units must be cm or m, got %r' % (units,))
        scale = 100.0 if units == 'cm' else 1.0
        return pd.DataFrame({
            'path_length_%s' % units: self.path_lengths * scale,
            'power_db': self.power_db,
        })


def pdp(sweep, window=Window.KAISER, zero_pad_factor=DEFAULT_ZERO_PAD, beta=DEFAULT_BETA,
        warn_aliasing=True):
    """Estimates the power delay profile of one sweep.

    Suspected aliasing is logged as a warning, or at debug level when
    ``warn_aliasing`` is false; it is always recorded on the profile.

    Raises:
        ConfigException: zero_pad_factor is not an integer >= 1.
    """
    window = Window(window)
    if int(zero_pad_factor) != zero_pad_factor or zero_pad_factor < 1:
        raise ConfigException('zero_pad_factor must be an integer >= 1, got %r'
                              % (zero_pad_factor,))
    zero_pad_factor = int(zero_pad_factor)
    band = sweep.band
    n = band.n_points
    m = n * zero_pad_factor

    weights = window_samples(window, n, beta)
    response = np.fft.ifft(sweep.values * weights, n=m)
    power = np.abs(response) ** 2
    peak = float(power.max())

    upper = power[m // 2:].sum() / power.sum()
    if upper > ALIAS_WARNING_FRACTION:
        log.log(logging.WARNING if warn_aliasing else logging.DEBUG,
                '%s sweep %r: %.1f%% of the PDP energy lies beyond half the '
                'alias-free range (%.3f m); long paths may alias',
                band.band_id.value, sweep.label, 100.0 * upper, alias_free_range(band) / 2)

    with np.errstate(divide='ignore'):
        power_db = 10.0 * np.log10(power / peak)
    path_lengths = SPEED_OF_LIGHT * np.arange(m) / (m * band.spacing)
    for array in (path_lengths, power_db):
        array.setflags(write=False)

    return PowerDelayProfile(
        path_lengths=path_lengths,
        power_db=power_db,
        delay_resolution=delay_resolution(band),
        alias_free_range=alias_free_range(band),
        window_tag=window,
        zero_pad_factor=zero_pad_factor,
        peak_power=peak,
        amplitude_scale=m / float(weights.sum()),
        beta=float(beta) if window is Window.KAISER else None,
        upper_half_fraction=float(upper),
        label=sweep.label,
    )
