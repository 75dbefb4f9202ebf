"""Frequency-domain hypothesis testing on excess-attenuation samples.

Each hypothesis (a target offset) is summarized by a smoothed histogram of
its A_k values. An observed series is classified one frequency sample at a
time: hypothesis i earns the vote for sample k when its log-likelihood
ratio against every other hypothesis is positive there, and the hypothesis
with the most votes wins.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from thzsense.errors import ConfigException, DataQualityException, ModelException
from thzsense.geometry import BandConfig

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-6
MIN_BINS = 8
MAX_BINS = 64

MODEL_FORMAT_VERSION = 1


def _edges_array(edges):
    edges = np.array(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 3:
        raise ConfigException('a distribution needs at least 2 bins (3 edges)')
    if not np.all(np.isfinite(edges)) or np.any(np.diff(edges) <= 0):
        raise ConfigException('bin edges must be finite and strictly increasing')
    edges.setflags(write=False)
    return edges


@dataclass(frozen=True, eq=False)
class SampleDistribution:
    """Smoothed probability of an attenuation sample falling in each bin."""
    bin_edges: np.ndarray
    probabilities: np.ndarray
    smoothing_epsilon: float = DEFAULT_EPSILON
    hypothesis_label: str = ''

    def __post_init__(self):
        edges = _edges_array(self.bin_edges)
        probabilities = np.array(self.probabilities, dtype=np.float64)
        if probabilities.shape != (edges.size - 1,):
            raise ModelException(
                'hypothesis %r: %d probabilities for %d bins'
                % (self.hypothesis_label, probabilities.size, edges.size - 1))
        if np.any(probabilities <= 0):
            raise ModelException(
                'hypothesis %r has empty bins; fit with a positive smoothing epsilon'
                % self.hypothesis_label)
        if abs(probabilities.sum() - 1.0) > 1e-12:
            raise ModelException(
                'hypothesis %r probabilities sum to %.15g' % (self.hypothesis_label,
                                                             probabilities.sum()))
        probabilities.setflags(write=False)
        object.__setattr__(self, 'bin_edges', edges)
        object.__setattr__(self, 'probabilities', probabilities)

    @property
    def bin_count(self):
        return self.probabilities.size

    @property
    def bin_centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def mean_db(self):
        return float(self.bin_centers @ self.probabilities)

    def same_edges(self, other):
        return np.array_equal(self.bin_edges, other.bin_edges)

    def bin_index(self, a):
        """Bin of each value, clamping out-of-range values to the boundary bins.

        Returns (indices, clamped) where ``clamped`` marks values outside the
        edges. The upper edge belongs to the last bin, as in np.histogram.
        """
        a = np.asarray(a, dtype=np.float64)
        index = np.searchsorted(self.bin_edges, a, side='right') - 1
        index = np.clip(index, 0, self.bin_count - 1)
        clamped = (a < self.bin_edges[0]) | (a > self.bin_edges[-1])
        return index, clamped

    def log_probability(self, a):
        index, _ = self.bin_index(a)
        return np.log(self.probabilities[index])

    def to_dict(self):
        return {
            'hypothesis_label': self.hypothesis_label,
            'smoothing_epsilon': self.smoothing_epsilon,
            'probabilities': [float(p) for p in self.probabilities],
        }


def shared_edges(series_list, bin_count=None):
    """Common bin edges spanning the pooled samples of every hypothesis.

    Without ``bin_count`` the Freedman-Diaconis rule picks the number of
    bins, clamped to [8, 64].
    """
    if not series_list:
        raise ConfigException('no training series to bin')
    pooled = np.concatenate([np.asarray(s.a_values) for s in series_list])
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    if bin_count is None:
        bin_count = np.histogram_bin_edges(pooled, bins='fd').size - 1
        bin_count = int(min(max(bin_count, MIN_BINS), MAX_BINS))
    elif int(bin_count) != bin_count or bin_count < 2:
        raise ConfigException('bin_count must be an integer >= 2, got %r' % (bin_count,))
    return np.linspace(lo, hi, int(bin_count) + 1)


def fit_distribution(series, binning, epsilon=DEFAULT_EPSILON, label=None):
    """Histogram of one hypothesis' attenuation samples with additive smoothing.

    ``binning`` is either a bin count (edges span this series) or an array of
    edges. Each bin gets ``epsilon`` probability mass before renormalizing:
    p = (counts / n + epsilon) / (1 + epsilon * bins).

    Raises:
        ConfigException: fewer than 2 bins or a negative epsilon.
        ModelException: every sample falls outside the edges.
    """
    a = np.asarray(series.a_values, dtype=np.float64)
    label = series.hypothesis_label if label is None else label
    if a.size == 0:
        raise ConfigException('cannot fit a distribution to an empty series')
    if epsilon < 0 or not math.isfinite(epsilon):
        raise ConfigException('smoothing epsilon must be finite and >= 0')
    if np.ndim(binning) == 0:
        edges = shared_edges([series], int(binning))
    else:
        edges = _edges_array(binning)

    inside = (a >= edges[0]) & (a <= edges[-1])
    if not inside.any():
        raise ModelException(
            'all %d samples of %r lie outside [%.3f, %.3f] dB'
            % (a.size, label, edges[0], edges[-1]))
    if not inside.all():
        log.warning('%d of %d samples of %r outside the bin range were dropped',
                    a.size - inside.sum(), a.size, label)

    counts, _ = np.histogram(a[inside], bins=edges)
    bins = counts.size
    probabilities = (counts / inside.sum() + epsilon) / (1.0 + epsilon * bins)
    return SampleDistribution(edges, probabilities, float(epsilon), label)


def fit_models(series_list, bin_count=None, epsilon=DEFAULT_EPSILON):
    """One distribution per hypothesis over shared edges, in input order."""
    edges = shared_edges(series_list, bin_count)
    return [fit_distribution(s, edges, epsilon) for s in series_list]


def _check_edges(models):
    reference = models[0]
    for model in models[1:]:
        if not reference.same_edges(model):
            raise ModelException(
                'hypotheses %r and %r use different bin edges'
                % (reference.hypothesis_label, model.hypothesis_label))


def llr(d_i, d_j, a, return_clamped=False):
    """Log-likelihood ratio ln(Pr(a | i) / Pr(a | j)) in nats.

    Values outside the shared edges are evaluated in the nearest boundary bin.
    With ``return_clamped`` the result is a (gamma, clamped) pair where
    ``clamped`` marks those values.
    """
    _check_edges([d_i, d_j])
    index, clamped = d_i.bin_index(a)
    if np.any(clamped):
        log.debug('llr: %d value(s) outside the bin range clamped', int(np.sum(clamped)))
    gamma = np.log(d_i.probabilities[index]) - np.log(d_j.probabilities[index])
    if np.ndim(gamma) == 0:
        gamma, clamped = float(gamma), bool(clamped)
    if return_clamped:
        return gamma, clamped
    return gamma


def separation_db(d_i, d_j):
    """Distance between the means of two hypotheses in dB."""
    return abs(d_i.mean_db - d_j.mean_db)


@dataclass(frozen=True, eq=False)
class ClassificationResult:
    """Outcome of majority voting.

    ``vote_matrix[i, j]`` counts the samples where hypothesis i beats j;
    ``per_sample_votes[i]`` counts the samples where i beats every other
    hypothesis. A sample where no hypothesis beats all others casts no vote.
    """
    winner_index: int
    vote_matrix: np.ndarray
    per_sample_votes: np.ndarray
    ambiguous_flag: bool
    labels: tuple = ()
    out_of_range_count: int = 0

    @property
    def winner_label(self):
        if self.labels:
            return self.labels[self.winner_index]
        return str(self.winner_index)

    def to_dict(self):
        return {
            'winner_index': self.winner_index,
            'winner_label': self.winner_label,
            'ambiguous': self.ambiguous_flag,
            'labels': list(self.labels),
            'per_sample_votes': [int(v) for v in self.per_sample_votes],
            'vote_matrix': [[int(v) for v in row] for row in self.vote_matrix],
            'out_of_range_count': self.out_of_range_count,
        }


def classify(observed, models):
    """Classifies an attenuation series against a set of hypotheses.

    Raises:
        ModelException: fewer than two models or mismatched bin edges.
    """
    if len(models) < 2:
        raise ModelException('classification needs at least 2 hypotheses, got %d' % len(models))
    _check_edges(models)
    a = np.asarray(observed.a_values, dtype=np.float64)
    index, clamped = models[0].bin_index(a)
    out_of_range = int(np.sum(clamped))
    if out_of_range:
        log.debug('classify %r: %d sample(s) clamped to boundary bins',
                  observed.hypothesis_label, out_of_range)

    log_p = np.log(np.stack([m.probabilities[index] for m in models]))
    gamma = log_p[:, None, :] - log_p[None, :, :]
    beats = gamma > 0
    vote_matrix = beats.sum(axis=2)
    diagonal = np.eye(len(models), dtype=bool)[:, :, None]
    wins_all = (beats | diagonal).all(axis=1)
    per_sample_votes = wins_all.sum(axis=1)

    best = per_sample_votes.max()
    tied = np.flatnonzero(per_sample_votes == best)
    winner = int(tied[0])
    return ClassificationResult(
        winner_index=winner,
        vote_matrix=vote_matrix,
        per_sample_votes=per_sample_votes,
        ambiguous_flag=bool(tied.size > 1),
        labels=tuple(m.hypothesis_label for m in models),
        out_of_range_count=out_of_range,
    )


def confusion_matrix(true_indices, predicted_indices, n_hypotheses):
    """Counts of (true, predicted) pairs over repeated trials."""
    matrix = np.zeros((n_hypotheses, n_hypotheses), dtype=np.int64)
    np.add.at(matrix, (np.asarray(true_indices), np.asarray(predicted_indices)), 1)
    return matrix


@dataclass(frozen=True, eq=False)
class ModelSet:
    """A fitted hypothesis set as stored in a model file."""
    models: list
    band: object = None
    convention: str = 'amplitude_20log'
    baseline_path: str = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.models) < 1:
            raise ModelException('a model set needs at least one hypothesis')
        _check_edges(self.models)

    @property
    def labels(self):
        return [m.hypothesis_label for m in self.models]

    def to_dict(self):
        return {
            'format_version': MODEL_FORMAT_VERSION,
            'band': self.band.to_dict() if self.band is not None else None,
            'convention': self.convention,
            'baseline_path': self.baseline_path,
            'bin_edges': [float(e) for e in self.models[0].bin_edges],
            'hypotheses': [m.to_dict() for m in self.models],
            'metadata': dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data):
        version = data.get('format_version')
        if version != MODEL_FORMAT_VERSION:
            raise DataQualityException('unsupported model file version %r' % (version,))
        try:
            edges = data['bin_edges']
            models = [
                SampleDistribution(edges, h['probabilities'],
                                   h.get('smoothing_epsilon', DEFAULT_EPSILON),
                                   h.get('hypothesis_label', ''))
                for h in data['hypotheses']
            ]
        except (KeyError, TypeError) as e:
            raise DataQualityException('malformed model file: missing %s' % e)
        band = BandConfig.from_dict(data['band']) if data.get('band') else None
        return cls(models, band, data.get('convention', 'amplitude_20log'),
                   data.get('baseline_path'), data.get('metadata', {}))
