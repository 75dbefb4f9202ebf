"""Calibration against the target-free sweep and excess-attenuation statistics.

A_k = -20 log10(|T(f_k)| / |T0(f_k)|) by default: VNA transmission
coefficients are voltage ratios. ``Convention.POWER_10LOG`` keeps the
literal -10 log10 reading for sweeps that already hold power-like values.
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from thzsense.errors import BandMismatchException, DataQualityException
from thzsense.geometry import frequency_grid

log = logging.getLogger(__name__)


class Convention(enum.Enum):
    AMPLITUDE_20LOG = 'amplitude_20log'
    POWER_10LOG = 'power_10log'

    @property
    def factor(self):
        return 20.0 if self is Convention.AMPLITUDE_20LOG else 10.0


def _frozen(values, dtype):
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FrequencySweep:
    """Complex transmission coefficients of one band on its frequency grid."""
    band: object
    values: np.ndarray
    label: str = ''

    def __post_init__(self):
        values = _frozen(self.values, np.complex128)
        if values.ndim != 1 or values.size != self.band.n_points:
            raise DataQualityException(
                'sweep %r has %d values but band %s expects %d'
                % (self.label, values.size, self.band.band_id.value, self.band.n_points))
        if not np.all(np.isfinite(values)):
            raise DataQualityException('sweep %r contains non-finite values' % self.label)
        zeros = np.flatnonzero(values == 0)
        if zeros.size:
            raise DataQualityException(
                'sweep %r has exact zeros at %d point(s), first at index %d'
                % (self.label, zeros.size, zeros[0]))
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'label', str(self.label))

    @property
    def frequencies(self):
        return frequency_grid(self.band)

    def scaled(self, factor):
        """The same sweep multiplied by a common complex constant."""
        return FrequencySweep(self.band, self.values * factor, self.label)

    def same_grid(self, other):
        return self.band == other.band


@dataclass(frozen=True, eq=False)
class AttenuationSeries:
    """Per-frequency excess attenuation A_k in dB for one hypothesis."""
    band: object
    a_values: np.ndarray
    hypothesis_label: str = ''

    def __post_init__(self):
        a_values = _frozen(self.a_values, np.float64)
        if a_values.ndim != 1 or a_values.size != self.band.n_points:
            raise DataQualityException(
                'attenuation series %r has %d values, band expects %d'
                % (self.hypothesis_label, a_values.size, self.band.n_points))
        if not np.all(np.isfinite(a_values)):
            raise DataQualityException(
                'attenuation series %r contains non-finite values' % self.hypothesis_label)
        object.__setattr__(self, 'a_values', a_values)

    def __len__(self):
        return self.a_values.size

    def to_frame(self):
        """Two-column table (freq_hz, a_db)."""
        return pd.DataFrame({'freq_hz': frequency_grid(self.band), 'a_db': self.a_values})


@dataclass(frozen=True)
class AttenuationStats:
    mean_db: float
    std_db: float

    def __post_init__(self):
        if self.std_db < 0:
            raise DataQualityException('standard deviation must be >= 0')


def excess_attenuation(measured, baseline, convention=Convention.AMPLITUDE_20LOG):
    """Excess attenuation of ``measured`` relative to the calibration sweep.

    Computed as a difference of logarithms so that A(x, x) is exactly zero
    and swapping the arguments exactly negates the series.

    Raises:
        BandMismatchException: the two sweeps use different grids.
        DataQualityException: a baseline value is zero or the result is not finite.
    """
    convention = Convention(convention)
    if not measured.same_grid(baseline):
        raise BandMismatchException(
            'cannot calibrate %r (%s) against %r (%s): frequency grids differ'
            % (measured.label, measured.band, baseline.label, baseline.band))
    if np.any(baseline.values == 0):
        raise DataQualityException('baseline %r contains zero values' % baseline.label)
    with np.errstate(divide='ignore', invalid='ignore'):
        a_values = -convention.factor * (np.log10(np.abs(measured.values))
                                         - np.log10(np.abs(baseline.values)))
    if not np.all(np.isfinite(a_values)):
        raise DataQualityException(
            'non-finite attenuation for %r against %r' % (measured.label, baseline.label))
    return AttenuationSeries(measured.band, a_values, measured.label)


def stats(series):
    """Mean and standard deviation with 1/N_f normalization."""
    a = np.asarray(series.a_values if hasattr(series, 'a_values') else series, dtype=np.float64)
    if a.size == 0:
        raise DataQualityException('cannot compute statistics of an empty series')
    return AttenuationStats(float(np.mean(a)), float(np.std(a, ddof=0)))


def sample_probability_function(series, edges):
    """Histogram of the series normalized to probabilities, without smoothing.

    ``series`` is an AttenuationSeries or a plain array of A_k values. Used
    for plotting the per-hypothesis probability functions; the classifier
    fits its own smoothed version.
    """
    values = getattr(series, 'a_values', series)
    counts, _ = np.histogram(values, bins=edges)
    total = counts.sum()
    if total == 0:
        return counts.astype(np.float64)
    return counts / total


def summary_table(rows):
    """Builds the (y_cm, mean_db, std_db) table from (y_m, AttenuationStats) pairs."""
    return pd.DataFrame({
        'y_cm': [y * 100.0 for y, _ in rows],
        'mean_db': [s.mean_db for _, s in rows],
        'std_db': [s.std_db for _, s in rows],
    }, columns=['y_cm', 'mean_db', 'std_db'])
