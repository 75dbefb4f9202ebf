"""Experiment runs: synthesize, calibrate, classify and localize every offset.

Output layout for a run directory::

    session.json
    <band>/baseline.sweep, baseline_pdp.csv, baseline_features.json
    <band>/y_<offset>cm/measured.sweep, training.sweep, attenuation.csv,
                        pdp.csv, features.json, perturbation.csv, estimate.json
    <band>/summary.csv, models.json, classification.csv, localization.csv

Offsets of a band run concurrently, each writing only to its own directory;
the band-level tables are written after all offsets finish.
"""

import concurrent.futures
import logging
import os
import threading
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from thzsense import cir, features, freqclass, localize, sweepio
from thzsense.attenuation import AttenuationSeries, excess_attenuation, stats, summary_table
from thzsense.errors import ConfigException, LocalizationException
from thzsense.session import save_session
from thzsense.synth import synthesize_sweep

ROLE_MEASURED = 0
ROLE_TRAINING = 1
ROLE_BASELINE = 2


def derive_seed(seed, band_index, slot, role):
    """Stable per-sweep seed independent of scheduling order."""
    state = np.random.SeedSequence([seed, band_index, slot, role]).generate_state(1)
    return int(state[0])


def offset_dirname(y):
    return 'y_%gcm' % round(y * 100.0, 6)


@dataclass
class OffsetResult:
    y: float
    measured: object
    training: object
    attenuation: object
    stats: object
    pdp: object
    features: object
    report: object
    training_attenuation: object = None
    estimate: object = None
    directory: str = None


@dataclass
class BandResult:
    band: object
    baseline: object
    baseline_features: object
    offsets: list = field(default_factory=list)
    summary: object = None
    models: object = None
    classifications: object = None
    directory: str = None


class ExperimentRunner:
    """Runs one session into an output directory."""

    def __init__(self, session, out_dir=None, log=None, workers=None):
        self.session = session
        self.out_dir = out_dir
        self.log = log or logging.getLogger(__name__)
        self.workers = workers if workers is not None else session.workers
        if self.workers is not None and self.workers < 1:
            raise ConfigException('workers must be >= 1, got %r' % (self.workers,))
        self.lock = threading.Lock()
        self.results = {}

    def _path(self, *parts):
        path = os.path.join(self.out_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def _process(self, sweep):
        options = self.session.pdp
        profile = cir.pdp(sweep, options.window, options.zero_pad_factor, options.beta,
                          warn_aliasing=False)
        f = self.session.features
        extracted = features.extract_features(profile, f.max_components, f.min_prominence_db,
                                              f.min_separation_bins, f.min_height_db)
        return profile, extracted

    def _run_offset(self, band_index, slot, y, band_result):
        session = self.session
        band = band_result.band
        target = session.target_at(y)
        syn = session.synthesis
        measured = synthesize_sweep(session.scene, target, band,
                                    syn.with_seed(derive_seed(session.seed, band_index, slot,
                                                              ROLE_MEASURED)))
        training = synthesize_sweep(session.scene, target, band,
                                    syn.with_seed(derive_seed(session.seed, band_index, slot,
                                                              ROLE_TRAINING)))
        convention = session.classifier.convention
        series = excess_attenuation(measured, band_result.baseline, convention)
        training_series = excess_attenuation(training, band_result.baseline, convention)
        training_series = AttenuationSeries(band, training_series.a_values, offset_dirname(y))
        profile, extracted = self._process(measured)
        tolerance = session.features.delay_tolerance_bins * band_result.baseline_features.delay_resolution
        report = features.match_and_perturb(band_result.baseline_features, extracted, tolerance)
        try:
            estimate = localize.estimate_offset(report, session.scene, session.localize)
        except LocalizationException as e:
            self.log.warning('%s %s: localization failed: %s',
                             band.band_id.value, offset_dirname(y), e)
            estimate = None

        result = OffsetResult(y, measured, training, series, stats(series), profile,
                              extracted, report, training_series, estimate)
        if self.out_dir is not None:
            result.directory = self._write_offset(band, y, result)
        self.log.info('%s %s: mean %.2f dB, std %.2f dB, %s',
                      band.band_id.value, offset_dirname(y), result.stats.mean_db,
                      result.stats.std_db,
                      estimate.regime.value if estimate is not None else 'no estimate')
        with self.lock:
            self.results[(band.band_id.value, slot)] = result
        return result

    def _write_offset(self, band, y, result):
        parts = (band.band_id.value, offset_dirname(y))
        if self.session.write_sweeps:
            sweepio.write_sweep(result.measured, self._path(*parts, 'measured.sweep'))
            sweepio.write_sweep(result.training, self._path(*parts, 'training.sweep'))
        sweepio.write_attenuation_csv(result.attenuation, self._path(*parts, 'attenuation.csv'))
        sweepio.write_pdp_csv(result.pdp, self._path(*parts, 'pdp.csv'))
        sweepio.write_features(result.features, self._path(*parts, 'features.json'))
        sweepio.write_table(result.report.to_frame(), self._path(*parts, 'perturbation.csv'))
        estimate = result.estimate.to_dict() if result.estimate is not None else None
        sweepio.write_json({'y_m': y, 'estimate': estimate}, self._path(*parts, 'estimate.json'))
        return os.path.join(self.out_dir, *parts)

    def _run_band(self, band_index, band):
        session = self.session
        baseline = synthesize_sweep(
            session.scene, None, band,
            session.synthesis.with_seed(derive_seed(session.seed, band_index, 0, ROLE_BASELINE)))
        baseline_pdp, baseline_features = self._process(baseline)
        self.log.info('%s baseline: %d components', band.band_id.value, baseline_features.count)
        if baseline_pdp.aliasing_suspected:
            # Room paths longer than the alias-free range fold onto short delays.
            self.log.warning('%s: %.1f%% of the baseline PDP energy lies beyond half the '
                             'alias-free range (%.3f m); long paths alias in every sweep of '
                             'this band', band.band_id.value, 100.0 * baseline_pdp.upper_half_fraction,
                             baseline_pdp.alias_free_range / 2)
        band_result = BandResult(band, baseline, baseline_features)

        if self.out_dir is not None:
            band_dir = band.band_id.value
            band_result.directory = os.path.join(self.out_dir, band_dir)
            sweepio.write_sweep(baseline, self._path(band_dir, 'baseline.sweep'))
            sweepio.write_pdp_csv(baseline_pdp, self._path(band_dir, 'baseline_pdp.csv'))
            sweepio.write_features(baseline_features, self._path(band_dir, 'baseline_features.json'))

        with concurrent.futures.ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(self._run_offset, band_index, slot, y, band_result)
                       for slot, y in enumerate(session.offsets_m)]
            band_result.offsets = [f.result() for f in futures]

        self._summarize(band_result)
        return band_result

    def _summarize(self, band_result):
        band = band_result.band
        offsets = band_result.offsets
        band_result.summary = summary_table([(r.y, r.stats) for r in offsets])

        if len(offsets) >= 2:
            training = [r.training_attenuation for r in offsets]
            options = self.session.classifier
            models = freqclass.fit_models(training, options.bin_count, options.epsilon)
            band_result.models = freqclass.ModelSet(
                models, band, options.convention, 'baseline.sweep',
                {'offsets_m': [r.y for r in offsets]})
            rows = []
            for true_index, r in enumerate(offsets):
                outcome = freqclass.classify(r.attenuation, models)
                nearest = min(freqclass.separation_db(models[true_index], other)
                              for j, other in enumerate(models) if j != true_index)
                if nearest < 1.0:
                    self.log.info('%s: y=%gcm lies within %.2f dB of another hypothesis',
                                  band.band_id.value, r.y * 100.0, nearest)
                rows.append({
                    'y_cm': r.y * 100.0,
                    'true_index': true_index,
                    'winner_index': outcome.winner_index,
                    'winner_y_cm': offsets[outcome.winner_index].y * 100.0,
                    'ambiguous': outcome.ambiguous_flag,
                    'votes': int(outcome.per_sample_votes[outcome.winner_index]),
                    'nearest_separation_db': nearest,
                })
            band_result.classifications = pd.DataFrame(
                rows, columns=['y_cm', 'true_index', 'winner_index', 'winner_y_cm',
                               'ambiguous', 'votes', 'nearest_separation_db'])
        else:
            self.log.info('%s: fewer than two offsets, skipping classification',
                          band.band_id.value)

        if self.out_dir is None:
            return
        band_dir = band.band_id.value
        sweepio.write_table(band_result.summary, self._path(band_dir, 'summary.csv'))
        sweepio.write_table(self._localization_table(offsets),
                            self._path(band_dir, 'localization.csv'))
        if band_result.models is not None:
            sweepio.save_models(band_result.models, self._path(band_dir, 'models.json'))
            sweepio.write_table(band_result.classifications,
                                self._path(band_dir, 'classification.csv'))

    @staticmethod
    def _localization_table(offsets):
        rows = []
        for r in offsets:
            e = r.estimate
            rows.append({
                'y_cm': r.y * 100.0,
                'regime': e.regime.value if e is not None else 'failed',
                'y_estimate_cm': e.y_estimate * 100.0 if e is not None and e.y_estimate is not None else None,
                'sigma_cm': e.y_uncertainty * 100.0 if e is not None and e.y_uncertainty is not None else None,
                'delta_k': r.report.delta_k,
                'mean_rho_db': r.report.mean_rho_db(),
            })
        return pd.DataFrame(rows, columns=['y_cm', 'regime', 'y_estimate_cm', 'sigma_cm',
                                           'delta_k', 'mean_rho_db'])

    def run(self):
        """Runs every band; returns {band_id: BandResult}."""
        if self.out_dir is not None:
            os.makedirs(self.out_dir, exist_ok=True)
            save_session(self.session, os.path.join(self.out_dir, 'session.json'))
        bundle = {}
        for band_index, band in enumerate(self.session.bands):
            self.log.info('running %s band: %d offsets', band.band_id.value,
                          len(self.session.offsets_m))
            bundle[band.band_id.value] = self._run_band(band_index, band)
        return bundle


def run_experiment(session, out_dir=None, log=None, workers=None):
    return ExperimentRunner(session, out_dir, log, workers).run()
