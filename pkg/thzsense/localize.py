"""Target offset estimation from CIR perturbations.

Three regimes are told apart: the target blocks the LoS, it sits close
enough to attenuate components without adding any, or it adds new
components through single-scatter paths. In the last case the mean length
l of the new paths places the target on the ellipse with foci TX and RX,

    l = sqrt(x^2 + y^2) + sqrt((d - x)^2 + y^2)

and y follows once the along-link coordinate x is assumed.
"""

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from thzsense.constants import SPEED_OF_LIGHT
from thzsense.errors import ConfigException, LocalizationException
from thzsense.session import LocalizeOptions

log = logging.getLogger(__name__)

DEGENERATE_TOLERANCE = 1e-12


class Regime(enum.Enum):
    LOS_BLOCKING = 'los_blocking'
    NEAR_FIELD_ATTENUATION = 'near_field_attenuation'
    SCATTER_PATH = 'scatter_path'


@dataclass(frozen=True)
class Evidence:
    delta_k: int
    mean_rho_db: float
    mean_new_path_length: float = None
    los_rho_db: float = 0.0
    target_detected: bool = True

    def to_dict(self):
        return {
            'delta_k': self.delta_k,
            'mean_rho_db': self.mean_rho_db,
            'mean_new_path_length_m': self.mean_new_path_length,
            'los_rho_db': self.los_rho_db if math.isfinite(self.los_rho_db) else None,
            'los_lost': not math.isfinite(self.los_rho_db),
            'target_detected': self.target_detected,
        }


@dataclass(frozen=True)
class OffsetEstimate:
    """Estimated lateral offset; y_estimate and y_uncertainty are None when unknown."""
    regime: Regime
    y_estimate: float
    y_uncertainty: float
    evidence: Evidence

    def to_dict(self):
        return {
            'regime': self.regime.value,
            'y_m': self.y_estimate,
            'sigma_m': self.y_uncertainty,
            'evidence': self.evidence.to_dict(),
        }


def classify_regime(report, rho_threshold_db=3.0, los_block_db=10.0):
    """Regime of a perturbation report and whether a target was detected.

    New components mean a scatter path. Otherwise a LoS component attenuated
    by ``los_block_db`` or more (or lost) means blocking, and anything else is
    near-field attenuation. Near-field attenuation counts as a detection only
    when the mean matched attenuation reaches ``rho_threshold_db``; an identity
    report comes back as undetected near-field attenuation.

    Returns:
        (Regime, bool) tuple.
    """
    if report.delta_k > 0:
        return Regime.SCATTER_PATH, True
    if report.los_rho_db() >= los_block_db:
        return Regime.LOS_BLOCKING, True
    return Regime.NEAR_FIELD_ATTENUATION, report.mean_rho_db() >= rho_threshold_db


def forward_path_length(scene, y, x=None):
    """Length of the single-scatter path TX -> (x, y) -> RX."""
    d = scene.los_length
    x = 0.5 * d if x is None else x
    return math.hypot(x, y) + math.hypot(d - x, y)


def _ellipse_terms(path_length, scene, x):
    d = scene.los_length
    semi_major = 0.5 * path_length
    focus = 0.5 * d
    u = x - focus
    return semi_major, focus, u


def invert_scatter_path(mean_new_path_length, scene, assumed_x=None):
    """Solves the single-scatter path length for the lateral offset y >= 0.

    Raises:
        LocalizationException: the path is shorter than the LoS, or the
            assumed x lies outside the ellipse.
    """
    d = scene.los_length
    x = 0.5 * d if assumed_x is None else float(assumed_x)
    length = float(mean_new_path_length)
    if length < d - DEGENERATE_TOLERANCE:
        raise LocalizationException(
            'scatter path of %.6f m is shorter than the %.6f m line of sight' % (length, d))
    if length <= d + DEGENERATE_TOLERANCE:
        return 0.0
    semi_major, focus, u = _ellipse_terms(length, scene, x)
    if abs(u) >= semi_major:
        raise LocalizationException(
            'x = %.4f m lies outside the %.4f m scatter ellipse' % (x, length))
    semi_minor2 = semi_major ** 2 - focus ** 2
    return math.sqrt(semi_minor2 * (1.0 - (u / semi_major) ** 2))


def offset_sensitivity(path_length, scene, assumed_x=None):
    """dy/dl of the inversion at a path length longer than the LoS."""
    d = scene.los_length
    x = 0.5 * d if assumed_x is None else assumed_x
    semi_major, focus, u = _ellipse_terms(path_length, scene, x)
    y = invert_scatter_path(path_length, scene, x)
    if y <= 0:
        return math.inf
    return (semi_major - focus ** 2 * u ** 2 / semi_major ** 3) / (2.0 * y)


def _uncertainty(path_length, scene, x, resolution_m):
    y = invert_scatter_path(path_length, scene, x)
    if y > 0:
        return offset_sensitivity(path_length, scene, x) * resolution_m
    return invert_scatter_path(path_length + resolution_m, scene, x)


def _from_attenuation_map(attenuation_map, rho_db):
    table = np.asarray(attenuation_map, dtype=np.float64)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
        raise ConfigException('attenuation_map must be a list of (rho_db, y_m) pairs')
    table = table[np.argsort(table[:, 0])]
    rho = min(rho_db, table[-1, 0]) if math.isfinite(rho_db) else table[-1, 0]
    y = float(np.interp(rho, table[:, 0], table[:, 1]))
    slope = np.abs(np.diff(table[:, 1]) / np.diff(table[:, 0]))
    return y, float(slope.max())


def estimate_offset(report, scene, options=None):
    """Dispatches on the regime and estimates y where the regime allows it."""
    options = options or LocalizeOptions()
    regime, detected = classify_regime(report, options.rho_threshold_db, options.los_block_db)
    mean_rho = report.mean_rho_db()
    los_rho = report.los_rho_db()
    resolution = report.delay_resolution
    if resolution is None:
        raise ConfigException('perturbation report carries no delay resolution')
    resolution_m = resolution * SPEED_OF_LIGHT

    if regime is Regime.SCATTER_PATH:
        mean_length = float(np.mean(report.new_components.path_lengths))
        x = options.assumed_x_m
        y = invert_scatter_path(mean_length, scene, x)
        sigma = _uncertainty(mean_length, scene, x, resolution_m)
        evidence = Evidence(report.delta_k, mean_rho, mean_length, los_rho, True)
        log.info('scatter regime: mean new path %.4f m -> y = %.4f m (+/- %.4f m)',
                 mean_length, y, sigma)
        return OffsetEstimate(regime, y, sigma, evidence)

    evidence = Evidence(report.delta_k, mean_rho, None, los_rho, detected)
    if not detected:
        log.info('no significant perturbation (mean %.2f dB); target not detected', mean_rho)
    if options.attenuation_map:
        y, slope = _from_attenuation_map(options.attenuation_map, los_rho)
        # y error for a 1 dB error in the LoS attenuation
        return OffsetEstimate(regime, y, max(slope, resolution_m), evidence)
    return OffsetEstimate(regime, None, None, evidence)
