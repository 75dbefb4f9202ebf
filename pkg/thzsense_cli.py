#!/usr/bin/env python
"""Command-line front end for thzsense.

Subcommands mirror the processing chain: simulate sweeps, calibrate them
(attenuate, stats), train and apply the frequency-domain classifier (fit,
classify), estimate and analyse PDPs (pdp, features, localize), or run a
whole session (run, plot, validate).

Exit codes: 0 success, 2 usage error, 3 data or I/O error, 4 model error.
"""

import argparse
import json
import logging
import os
import sys

from thzsense import cir, features, freqclass, localize, sweepio
from thzsense.attenuation import Convention, excess_attenuation, stats
from thzsense.errors import (BandMismatchException, ConfigException, DataException,
                             DataQualityException, ModelException, SweepParseException)
from thzsense.geometry import Scene
from thzsense.runner import ROLE_BASELINE, ROLE_MEASURED, derive_seed, offset_dirname, run_experiment
from thzsense.session import LocalizeOptions, SessionConfig, load_session
from thzsense.synth import synthesize_sweep

EXIT_OK = 0
EXIT_DATA = 3
EXIT_MODEL = 4

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

log = logging.getLogger('thzsense.cli')


def configure_logging(verbose=False, debug=False, log_file=None):
    """Stream handler on stderr plus an optional DEBUG file handler."""
    logger = logging.getLogger('thzsense')
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    level = logging.WARNING
    if verbose:
        level = logging.INFO
    if debug:
        level = logging.DEBUG
    env_level = os.environ.get('THZSENSE_LOG_LEVEL')
    if env_level:
        level = logging.getLevelName(env_level.upper())
        if not isinstance(level, int):
            level = logging.WARNING
    stream = logging.StreamHandler(sys.stderr)
    stream.setLevel(level)
    stream.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    logger.addHandler(stream)
    logger.setLevel(logging.DEBUG if log_file else level)
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(file_handler)
    logger.propagate = False
    return logger


def _emit(data):
    print(json.dumps(data, indent=2, sort_keys=True))


def _session(args):
    session = load_session(args.session) if args.session else SessionConfig.default()
    if getattr(args, 'seed', None) is not None:
        session.seed = args.seed
    return session


def cmd_simulate(args):
    session = _session(args)
    for band_index, band in enumerate(session.bands):
        band_dir = os.path.join(args.out, band.band_id.value)
        os.makedirs(band_dir, exist_ok=True)
        syn = session.synthesis
        baseline = synthesize_sweep(
            session.scene, None, band,
            syn.with_seed(derive_seed(session.seed, band_index, 0, ROLE_BASELINE)))
        sweepio.write_sweep(baseline, os.path.join(band_dir, 'baseline.sweep'))
        for slot, y in enumerate(session.offsets_m):
            sweep = synthesize_sweep(
                session.scene, session.target_at(y), band,
                syn.with_seed(derive_seed(session.seed, band_index, slot, ROLE_MEASURED)))
            sweepio.write_sweep(sweep, os.path.join(band_dir, offset_dirname(y) + '.sweep'))
        print(f'✅ {band.band_id.value} band: baseline + {len(session.offsets_m)} sweeps in {band_dir}')
    return EXIT_OK


def cmd_attenuate(args):
    series = excess_attenuation(sweepio.read_sweep(args.sweep), sweepio.read_sweep(args.baseline),
                                Convention(args.convention))
    sweepio.write_attenuation_csv(series, args.out)
    print(f'✅ wrote {len(series)} attenuation samples to {args.out}')
    return EXIT_OK


def cmd_stats(args):
    measured = sweepio.read_sweep(args.sweep)
    series = excess_attenuation(measured, sweepio.read_sweep(args.baseline),
                                Convention(args.convention))
    result = stats(series)
    _emit({'label': measured.label, 'mean_db': result.mean_db, 'std_db': result.std_db})
    return EXIT_OK


def cmd_fit(args):
    baseline = sweepio.read_sweep(args.baseline)
    convention = Convention(args.convention)
    series = [excess_attenuation(sweepio.read_sweep(path), baseline, convention)
              for path in args.sweeps]
    models = freqclass.fit_models(series, args.bins, args.epsilon)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    model_set = freqclass.ModelSet(models, baseline.band, convention.value,
                                   os.path.relpath(os.path.abspath(args.baseline), out_dir))
    sweepio.save_models(model_set, args.out)
    print(f'✅ fitted {len(models)} hypotheses ({models[0].bin_count} bins) to {args.out}')
    return EXIT_OK


def cmd_classify(args):
    model_set = sweepio.load_models(args.models)
    baseline_path = args.baseline or model_set.baseline_path
    if not baseline_path:
        raise ConfigException('no baseline sweep: pass --baseline or fit the models with one')
    measured = sweepio.read_sweep(args.sweep)
    baseline = sweepio.read_sweep(baseline_path)
    if model_set.band is not None and model_set.band != measured.band:
        raise BandMismatchException('sweep %s is not on the band the models were fitted on'
                                    % args.sweep)
    series = excess_attenuation(measured, baseline, Convention(model_set.convention))
    result = freqclass.classify(series, model_set.models)
    _emit(result.to_dict())
    return EXIT_OK


def _pdp(args, sweep):
    return cir.pdp(sweep, args.window, args.pad, args.beta)


def cmd_pdp(args):
    profile = _pdp(args, sweepio.read_sweep(args.sweep))
    sweepio.write_pdp_csv(profile, args.out, args.units)
    print(f'✅ PDP of {profile.path_lengths.size} bins '
          f'(resolution {profile.delay_resolution * 1000:.2f} mm) written to {args.out}')
    return EXIT_OK


def cmd_features(args):
    profile = _pdp(args, sweepio.read_sweep(args.sweep))
    extracted = features.extract_features(profile, args.max_components, args.min_prominence,
                                          args.min_separation, args.min_height)
    sweepio.write_features(extracted, args.out)
    print(f'✅ {extracted.count} components written to {args.out}')
    return EXIT_OK


def _scene(path):
    if not path:
        return Scene.laboratory()
    with open(path) as f:
        try:
            data = json.load(f)
        except ValueError as e:
            raise DataQualityException('%s: not valid JSON (%s)' % (path, e))
    if not isinstance(data, dict):
        raise SweepParseException('a scene must be a JSON object', path)
    if 'scene' in data:
        data = data['scene']
    try:
        return Scene.from_dict(data)
    except (ConfigException, KeyError, TypeError, ValueError) as e:
        raise SweepParseException('invalid scene: %s' % e, path) from e


def cmd_localize(args):
    baseline = sweepio.read_features(args.baseline)
    observed = sweepio.read_features(args.observed)
    tolerance = None
    resolution = baseline.delay_resolution or observed.delay_resolution
    if resolution is not None:
        tolerance = args.tolerance_bins * resolution
    report = features.match_and_perturb(baseline, observed, tolerance)
    options = LocalizeOptions(rho_threshold_db=args.rho_threshold, los_block_db=args.los_block,
                              assumed_x_m=args.assumed_x)
    estimate = localize.estimate_offset(report, _scene(args.scene), options)
    _emit(estimate.to_dict())
    return EXIT_OK


def cmd_run(args):
    session = _session(args)
    bundle = run_experiment(session, args.out, workers=args.workers)
    for band_id, result in bundle.items():
        print(f'✅ {band_id} band: {len(result.offsets)} offsets in {result.directory}')
    return EXIT_OK


def cmd_plot(args):
    from thzsense.plotting import plot_run

    for path in plot_run(args.run, args.out, args.band):
        print(f'✅ wrote {path}')
    return EXIT_OK


def cmd_validate(args):
    print('🔍 Validating session...')
    session = load_session(args.session)
    print(f'  ✅ scene: d = {session.scene.los_length:.3f} m, h = {session.scene.plane_height_h:g} m')
    print(f'  ✅ bands: {", ".join(b.band_id.value for b in session.bands)}')
    print(f'  ✅ offsets: {", ".join("%g cm" % (y * 100) for y in session.offsets_m)}')
    print('✅ All validation checks passed!')
    return EXIT_OK


def _positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError('%r is not an integer' % value)
    if number < 1:
        raise argparse.ArgumentTypeError('must be >= 1, got %d' % number)
    return number


def _add_convention(parser):
    parser.add_argument('--convention', choices=[c.value for c in Convention],
                        default=Convention.AMPLITUDE_20LOG.value,
                        help='How sweep magnitudes map to dB (default: amplitude_20log)')


def _add_pdp_options(parser):
    parser.add_argument('--window', choices=[w.value for w in cir.Window], default='kaiser')
    parser.add_argument('--beta', type=float, default=cir.DEFAULT_BETA,
                        help='Kaiser window beta')
    parser.add_argument('--pad', type=int, default=cir.DEFAULT_ZERO_PAD,
                        help='Zero padding factor')


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog='thzsense',
        description='Sub-THz target sensing from channel sweeps')
    parser.add_argument('--verbose', action='store_true', help='Log progress (INFO)')
    parser.add_argument('--debug', action='store_true', help='Log everything (DEBUG)')
    parser.add_argument('--log-file', default=None, help='Also write a DEBUG log to this file')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='Synthesize baseline and per-offset sweeps')
    p.add_argument('--session', default=None, help='Session JSON (default: laboratory setup)')
    p.add_argument('--out', required=True)
    p.add_argument('--seed', type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('attenuate', help='Excess attenuation of a sweep as CSV')
    p.add_argument('--sweep', required=True)
    p.add_argument('--baseline', required=True)
    p.add_argument('--out', required=True)
    _add_convention(p)
    p.set_defaults(func=cmd_attenuate)

    p = sub.add_parser('stats', help='Mean and standard deviation of the excess attenuation')
    p.add_argument('--sweep', required=True)
    p.add_argument('--baseline', required=True)
    _add_convention(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser('fit', help='Fit hypothesis distributions from training sweeps')
    p.add_argument('--baseline', required=True)
    p.add_argument('--sweeps', nargs='+', required=True,
                   help='One training sweep per hypothesis, in hypothesis order')
    p.add_argument('--bins', type=int, default=None, help='Bin count (default: automatic)')
    p.add_argument('--epsilon', type=float, default=freqclass.DEFAULT_EPSILON)
    p.add_argument('--out', required=True)
    _add_convention(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('classify', help='Classify a sweep against a model file')
    p.add_argument('--models', required=True)
    p.add_argument('--sweep', required=True)
    p.add_argument('--baseline', default=None,
                   help='Calibration sweep (default: the one recorded in the model file)')
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser('pdp', help='Power delay profile of a sweep as CSV')
    p.add_argument('--sweep', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--units', choices=['m', 'cm'], default='m')
    _add_pdp_options(p)
    p.set_defaults(func=cmd_pdp)

    p = sub.add_parser('features', help='Extract multipath components of a sweep')
    p.add_argument('--sweep', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--max-components', type=int, default=features.DEFAULT_MAX_COMPONENTS)
    p.add_argument('--min-prominence', type=float, default=features.DEFAULT_MIN_PROMINENCE_DB)
    p.add_argument('--min-separation', type=int, default=features.DEFAULT_MIN_SEPARATION_BINS)
    p.add_argument('--min-height', type=float, default=features.DEFAULT_MIN_HEIGHT_DB)
    _add_pdp_options(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser('localize', help='Estimate the target offset from two feature files')
    p.add_argument('--baseline', required=True)
    p.add_argument('--observed', required=True)
    p.add_argument('--scene', default=None, help='Scene or session JSON (default: laboratory)')
    p.add_argument('--assumed-x', type=float, default=None,
                   help='Along-link target coordinate in m (default: link midpoint)')
    p.add_argument('--tolerance-bins', type=float, default=features.DEFAULT_TOLERANCE_BINS)
    p.add_argument('--rho-threshold', type=float, default=3.0)
    p.add_argument('--los-block', type=float, default=10.0)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser('run', help='Run a whole session into a directory')
    p.add_argument('--session', default=None, help='Session JSON (default: laboratory setup)')
    p.add_argument('--out', required=True)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--workers', type=_positive_int, default=None,
                   help='Threads per band (default: THZSENSE_WORKERS or automatic)')
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('plot', help='Draw PDP and probability figures of a run')
    p.add_argument('--run', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--band', action='append', default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser('validate', help='Check a session file without running it')
    p.add_argument('--session', required=True)
    p.set_defaults(func=cmd_validate)

    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    configure_logging(args.verbose, args.debug, args.log_file)
    try:
        return args.func(args)
    except (DataException, OSError) as e:
        log.debug('data error', exc_info=True)
        print(f'❌ {e}', file=sys.stderr)
        return EXIT_DATA
    except (ModelException, ConfigException) as e:
        log.debug('model error', exc_info=True)
        print(f'❌ {e}', file=sys.stderr)
        return EXIT_MODEL


if __name__ == '__main__':
    sys.exit(main())
