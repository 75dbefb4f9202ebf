"""File formats: sweep files, feature records, model sets and CSV tables.

A sweep file is plain text: ``key=value`` header lines, a column line and
one ``freq_hz,re,im`` row per grid point, values written with 17 significant
digits so that doubles survive a round trip bit for bit.

    # thzsense sweep
    format_version=1
    band_id=G
    f_start_hz=170000000000
    f_stop_hz=260000000000
    n_points=1001
    label=baseline
    freq_hz,re,im
    170000000000,0.51234...,-0.98765...
"""

import json
import logging
import math
import os

import numpy as np

from thzsense.attenuation import FrequencySweep
from thzsense.errors import (ConfigException, DataQualityException, SweepParseException,
                             ThzSenseException)
from thzsense.features import CirFeatureSet
from thzsense.freqclass import ModelSet
from thzsense.geometry import BandConfig, frequency_grid

log = logging.getLogger(__name__)

SWEEP_FORMAT_VERSION = 1
SWEEP_MAGIC = '# thzsense sweep'
COLUMNS = 'freq_hz,re,im'
HEADER_KEYS = ('format_version', 'band_id', 'f_start_hz', 'f_stop_hz', 'n_points', 'label')

# Allowed distance between a written integer frequency and the grid formula.
GRID_TOLERANCE_HZ = 0.5


def _format(value):
    return '%.17g' % value


def write_sweep(sweep, path):
    band = sweep.band
    if '\n' in sweep.label:
        raise DataQualityException('sweep labels must be single-line')
    lines = [
        SWEEP_MAGIC,
        'format_version=%d' % SWEEP_FORMAT_VERSION,
        'band_id=%s' % band.band_id.value,
        'f_start_hz=%s' % _format(band.f_start),
        'f_stop_hz=%s' % _format(band.f_stop),
        'n_points=%d' % band.n_points,
        'label=%s' % sweep.label,
        COLUMNS,
    ]
    for f, value in zip(frequency_grid(band), sweep.values):
        lines.append('%d,%s,%s' % (int(round(f)), _format(value.real), _format(value.imag)))
    with open(path, 'w') as out:
        out.write('\n'.join(lines))
        out.write('\n')
    log.debug('wrote sweep %r to %s', sweep.label, path)


def _parse_header(lines, path):
    header = {}
    line_number = 0
    for line_number, raw in lines:
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if line == COLUMNS:
            break
        if '=' not in line:
            raise SweepParseException('expected key=value header line, got %r' % line,
                                      path, line_number)
        key, value = line.split('=', 1)
        key = key.strip()
        if key not in HEADER_KEYS:
            raise SweepParseException('unknown header key %r' % key, path, line_number)
        if key in header:
            raise SweepParseException('duplicate header key %r' % key, path, line_number)
        header[key] = (value if key == 'label' else value.strip(), line_number)
    else:
        raise SweepParseException('missing column line %r' % COLUMNS, path, line_number + 1)

    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise SweepParseException('missing header key(s): %s' % ', '.join(missing),
                                  path, line_number)
    version, version_line = header['format_version']
    if version != str(SWEEP_FORMAT_VERSION):
        raise SweepParseException('unsupported format_version %r' % version, path, version_line)
    try:
        band = BandConfig(
            header['band_id'][0],
            float(header['f_start_hz'][0]),
            float(header['f_stop_hz'][0]),
            int(header['n_points'][0]),
        )
    except (ValueError, ConfigException) as e:
        raise SweepParseException('invalid band header: %s' % e, path, header['band_id'][1])
    return band, header['label'][0], line_number


def read_sweep(path):
    """Reads a sweep file written by ``write_sweep``.

    Raises:
        SweepParseException: malformed header or rows, a row count that
            disagrees with n_points, or frequencies off the band grid. The
            message names the offending line.
    """
    with open(path) as f:
        lines = enumerate(f.read().splitlines(), start=1)
        band, label, columns_line = _parse_header(lines, path)
        rows = [(n, line) for n, line in lines if line.strip()]

    if len(rows) != band.n_points:
        last = rows[-1][0] if rows else columns_line
        raise SweepParseException(
            'expected %d data rows (n_points) but found %d' % (band.n_points, len(rows)),
            path, last)

    grid = frequency_grid(band)
    values = np.empty(band.n_points, dtype=np.complex128)
    for k, (line_number, line) in enumerate(rows):
        fields = line.split(',')
        if len(fields) != 3:
            raise SweepParseException('expected 3 columns, got %d' % len(fields),
                                      path, line_number)
        try:
            freq = int(fields[0])
            re, im = float(fields[1]), float(fields[2])
        except ValueError:
            raise SweepParseException('unparseable row %r' % line, path, line_number)
        if abs(freq - grid[k]) > GRID_TOLERANCE_HZ:
            raise SweepParseException(
                'frequency %d Hz does not match grid point %d (%.1f Hz)' % (freq, k, grid[k]),
                path, line_number)
        if not (math.isfinite(re) and math.isfinite(im)):
            raise SweepParseException('non-finite value', path, line_number)
        values[k] = complex(re, im)

    try:
        sweep = FrequencySweep(band, values, label)
    except DataQualityException as e:
        raise SweepParseException(str(e), path)
    log.debug('read sweep %r (%s, %d points) from %s', label, band.band_id.value,
              band.n_points, path)
    return sweep


def _write_json(data, path):
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


def _read_json(path, what):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DataQualityException('%s: not a valid %s file (%s)' % (path, what, e))


def _parse_record(path, what, build):
    """Builds an object from a JSON file; any content problem names the file."""
    data = _read_json(path, what)
    if not isinstance(data, dict):
        raise SweepParseException('a %s file must hold a JSON object' % what, path)
    try:
        return build(data)
    except SweepParseException:
        raise
    except (ThzSenseException, KeyError, TypeError, ValueError) as e:
        raise SweepParseException(str(e), path) from e


def write_features(features, path):
    _write_json(features.to_dict(), path)


def read_features(path):
    return _parse_record(path, 'feature', CirFeatureSet.from_dict)


def save_models(model_set, path):
    _write_json(model_set.to_dict(), path)
    log.debug('wrote %d hypotheses to %s', len(model_set.models), path)


def load_models(path):
    """Reads a model file; a relative baseline path resolves against the file.

    Raises:
        SweepParseException: the file is not a valid model file.
    """
    model_set = _parse_record(path, 'model', ModelSet.from_dict)
    baseline = model_set.baseline_path
    if baseline and not os.path.isabs(baseline):
        baseline = os.path.join(os.path.dirname(os.path.abspath(path)), baseline)
        model_set = ModelSet(model_set.models, model_set.band, model_set.convention,
                             baseline, model_set.metadata)
    return model_set


def write_json(data, path):
    _write_json(data, path)


def write_table(frame, path):
    """CSV with 17 significant digits and no index column."""
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


def write_pdp_csv(pdp, path, units='cm'):
    write_table(pdp.to_frame(units), path)


def write_attenuation_csv(series, path):
    write_table(series.to_frame(), path)
