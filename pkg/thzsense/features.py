"""Discrete multipath components of a PDP and their perturbation by a target."""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.signal import find_peaks

from thzsense.constants import SPEED_OF_LIGHT
from thzsense.errors import ConfigException, DataQualityException, FeatureExtractionException

log = logging.getLogger(__name__)

DEFAULT_MAX_COMPONENTS = 9
DEFAULT_MIN_PROMINENCE_DB = 6.0
DEFAULT_MIN_SEPARATION_BINS = 3
DEFAULT_MIN_HEIGHT_DB = -35.0
DEFAULT_TOLERANCE_BINS = 2.0

FEATURE_FORMAT_VERSION = 1


def _amplitude_db(amplitudes):
    return 20.0 * np.log10(amplitudes)


@dataclass(frozen=True, eq=False)
class CirFeatureSet:
    """Multipath components (alpha_k, tau_k), sorted by delay.

    Amplitudes are linear CIR magnitudes; ``delay_resolution`` is the
    delay resolution of the PDP they came from, in seconds.
    """
    amplitudes: np.ndarray
    delays: np.ndarray
    delay_resolution: float = None
    label: str = ''

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.float64).reshape(-1)
        delays = np.array(self.delays, dtype=np.float64).reshape(-1)
        if amplitudes.size != delays.size:
            raise DataQualityException(
                'feature set %r: %d amplitudes for %d delays'
                % (self.label, amplitudes.size, delays.size))
        if np.any(amplitudes <= 0) or not np.all(np.isfinite(amplitudes)):
            raise DataQualityException('feature set %r: amplitudes must be positive' % self.label)
        if np.any(np.diff(delays) <= 0):
            raise DataQualityException('feature set %r: delays must be strictly increasing'
                                       % self.label)
        for array in (amplitudes, delays):
            array.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amplitudes)
        object.__setattr__(self, 'delays', delays)

    @property
    def count(self):
        return int(self.amplitudes.size)

    K = count

    @property
    def path_lengths(self):
        return self.delays * SPEED_OF_LIGHT

    def amplitude_db(self):
        return _amplitude_db(self.amplitudes)

    def relative_db(self):
        """Amplitudes in dB relative to the strongest component."""
        if self.count == 0:
            return np.array([])
        return _amplitude_db(self.amplitudes / self.amplitudes.max())

    def subset(self, indices):
        indices = np.asarray(sorted(indices), dtype=np.int64)
        return CirFeatureSet(self.amplitudes[indices], self.delays[indices],
                             self.delay_resolution, self.label)

    def scaled(self, factor):
        return CirFeatureSet(self.amplitudes * factor, self.delays,
                             self.delay_resolution, self.label)

    def to_frame(self):
        return pd.DataFrame({
            'index': np.arange(self.count),
            'z_m': self.path_lengths,
            'delay_s': self.delays,
            'amplitude': self.amplitudes,
            'amplitude_db': self.amplitude_db(),
        })

    def to_dict(self):
        return {
            'format_version': FEATURE_FORMAT_VERSION,
            'label': self.label,
            'delay_resolution_s': self.delay_resolution,
            'components': [
                {'index': i, 'z_m': float(z), 'delay_s': float(t),
                 'amplitude': float(a), 'amplitude_db': float(db)}
                for i, (z, t, a, db) in enumerate(zip(self.path_lengths, self.delays,
                                                      self.amplitudes, self.amplitude_db()))
            ],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get('format_version') != FEATURE_FORMAT_VERSION:
            raise DataQualityException('unsupported feature file version %r'
                                       % (data.get('format_version'),))
        try:
            components = data['components']
            amplitudes = [c['amplitude'] for c in components]
            delays = [c['delay_s'] for c in components]
        except (KeyError, TypeError) as e:
            raise DataQualityException('malformed feature record: missing %s' % e)
        return cls(amplitudes, delays, data.get('delay_resolution_s'), data.get('label', ''))


def extract_features(pdp, max_components=DEFAULT_MAX_COMPONENTS,
                     min_prominence_db=DEFAULT_MIN_PROMINENCE_DB,
                     min_separation_bins=DEFAULT_MIN_SEPARATION_BINS,
                     min_height_db=DEFAULT_MIN_HEIGHT_DB):
    """Picks the strongest local maxima of the PDP as multipath components.

    Peaks must rise ``min_prominence_db`` above their surroundings, sit at
    least ``min_height_db`` relative to the PDP peak (which keeps window
    sidelobes out) and be ``min_separation_bins`` padded bins apart.

    Raises:
        ConfigException: invalid thresholds.
        FeatureExtractionException: no peak satisfies the thresholds.
    """
    if int(max_components) != max_components or max_components < 1:
        raise ConfigException('max_components must be an integer >= 1')
    if int(min_separation_bins) != min_separation_bins or min_separation_bins < 1:
        raise ConfigException('min_separation_bins must be an integer >= 1')

    power_db = np.nan_to_num(pdp.power_db, neginf=-1000.0)
    peaks, props = find_peaks(power_db, height=min_height_db,
                              prominence=min_prominence_db,
                              distance=int(min_separation_bins))
    if peaks.size == 0:
        raise FeatureExtractionException(
            'no PDP peak of %r passes prominence %.1f dB and height %.1f dB'
            % (pdp.label, min_prominence_db, min_height_db))

    strongest = np.argsort(-props['peak_heights'], kind='stable')[:int(max_components)]
    chosen = np.sort(peaks[strongest])
    log.debug('%r: %d peak(s) found, %d kept', pdp.label, peaks.size, chosen.size)
    return CirFeatureSet(
        amplitudes=pdp.amplitude_at(chosen),
        delays=pdp.delays[chosen],
        delay_resolution=pdp.delay_resolution / SPEED_OF_LIGHT,
        label=pdp.label,
    )


@dataclass(frozen=True, eq=False)
class PerturbationReport:
    """Matching of an observed feature set against the target-free baseline.

    ``matched_pairs`` holds (baseline index, observed index, rho) with
    rho = observed / baseline amplitude; ``rho_db`` is -20 log10(rho), so
    positive values are attenuation.
    """
    baseline: CirFeatureSet
    observed: CirFeatureSet
    matched_pairs: tuple
    new_indices: tuple
    unmatched_baseline: tuple
    delay_tolerance: float

    @property
    def rho_db(self):
        return np.array([-20.0 * math.log10(rho) for _, _, rho in self.matched_pairs])

    @property
    def new_components(self):
        return self.observed.subset(self.new_indices)

    @property
    def delta_k(self):
        return len(self.new_indices)

    @property
    def delay_resolution(self):
        return self.baseline.delay_resolution or self.observed.delay_resolution

    def mean_rho_db(self):
        rho_db = self.rho_db
        return float(rho_db.mean()) if rho_db.size else 0.0

    @property
    def los_index(self):
        """Baseline index of the LoS component: the strongest one.

        The earliest component is not used since long paths can alias to
        delays below the LoS.
        """
        if self.baseline.count == 0:
            return None
        return int(np.argmax(self.baseline.amplitudes))

    def los_rho_db(self):
        """Attenuation of the LoS component; inf if it was lost."""
        los = self.los_index
        if los is None:
            return 0.0
        for b, _, rho in self.matched_pairs:
            if b == los:
                return -20.0 * math.log10(rho)
        return math.inf

    def to_frame(self):
        """Component table with status matched, new or lost."""
        rows = []
        for b, o, rho in self.matched_pairs:
            rows.append((b, o, self.observed.path_lengths[o],
                         20.0 * math.log10(self.observed.amplitudes[o]),
                         -20.0 * math.log10(rho), 'matched'))
        for o in self.new_indices:
            rows.append((None, o, self.observed.path_lengths[o],
                         20.0 * math.log10(self.observed.amplitudes[o]), None, 'new'))
        for b in self.unmatched_baseline:
            rows.append((b, None, self.baseline.path_lengths[b],
                         20.0 * math.log10(self.baseline.amplitudes[b]), None, 'lost'))
        frame = pd.DataFrame(rows, columns=['baseline_index', 'observed_index', 'z_m',
                                            'amplitude_db', 'rho_db', 'status'])
        frame = frame.sort_values('z_m', kind='stable').reset_index(drop=True)
        for column in ('baseline_index', 'observed_index'):
            frame[column] = frame[column].astype('Int64')
        return frame


def match_and_perturb(baseline, observed, delay_tolerance=None):
    """Greedy nearest-delay matching, closest pairs first.

    ``delay_tolerance`` is in seconds and defaults to two delay-resolution
    bins of the baseline. Ties are broken by baseline index, then observed
    index.
    """
    if delay_tolerance is None:
        resolution = baseline.delay_resolution or observed.delay_resolution
        if resolution is None:
            raise ConfigException('delay_tolerance is required when the feature sets '
                                  'carry no delay resolution')
        delay_tolerance = DEFAULT_TOLERANCE_BINS * resolution
    if delay_tolerance < 0:
        raise ConfigException('delay_tolerance must be >= 0')

    distance = np.abs(baseline.delays[:, None] - observed.delays[None, :])
    candidates = sorted(
        (float(distance[b, o]), b, o)
        for b, o in zip(*np.nonzero(distance <= delay_tolerance))
    )
    used_baseline, used_observed = set(), set()
    pairs = []
    for _, b, o in candidates:
        if b in used_baseline or o in used_observed:
            continue
        used_baseline.add(b)
        used_observed.add(o)
        rho = observed.amplitudes[o] / baseline.amplitudes[b]
        pairs.append((int(b), int(o), float(rho)))
    pairs.sort()

    return PerturbationReport(
        baseline=baseline,
        observed=observed,
        matched_pairs=tuple(pairs),
        new_indices=tuple(o for o in range(observed.count) if o not in used_observed),
        unmatched_baseline=tuple(b for b in range(baseline.count) if b not in used_baseline),
        delay_tolerance=float(delay_tolerance),
    )
