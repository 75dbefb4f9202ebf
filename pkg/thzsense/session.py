"""Experiment session configuration.

Run-level options are traitlets ``HasTraits`` objects so values are type
checked and validated on assignment; domain values (scene, bands, synthesis)
stay frozen dataclasses. Sessions are stored as JSON.
"""

import json
import logging
import math
import os

from traitlets import (Bool, Enum, Float, HasTraits, Instance, Int, List, TraitError,
                       Unicode, default, validate)

from thzsense.errors import ConfigException, SweepParseException
from thzsense.geometry import BandConfig, Material, Scene, Target
from thzsense.synth import SynthesisConfig

log = logging.getLogger(__name__)

SESSION_FORMAT_VERSION = 1

LABORATORY_OFFSETS_M = [0.0, 0.03, 0.06, 0.12, 0.25, 0.50]


class _Options(HasTraits):
    """Options object that round-trips through a plain dict."""

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self.class_trait_names())
        if unknown:
            raise ConfigException('unknown %s keys: %s'
                                  % (type(self).__name__, ', '.join(sorted(unknown))))
        try:
            super().__init__(**kwargs)
        except TraitError as e:
            raise ConfigException('%s: %s' % (type(self).__name__, e))

    def to_dict(self):
        return {name: getattr(self, name) for name in sorted(self.class_trait_names())}

    @classmethod
    def from_dict(cls, data):
        return cls(**(data or {}))


class PdpOptions(_Options):
    window = Enum(['rectangular', 'hann', 'kaiser'], default_value='kaiser')
    beta = Float(6.0)
    zero_pad_factor = Int(8)

    @validate('zero_pad_factor')
    def _check_pad(self, proposal):
        if proposal['value'] < 1:
            raise TraitError('zero_pad_factor must be >= 1')
        return proposal['value']

    @validate('beta')
    def _check_beta(self, proposal):
        if proposal['value'] < 0:
            raise TraitError('beta must be >= 0')
        return proposal['value']


class FeatureOptions(_Options):
    max_components = Int(9)
    min_prominence_db = Float(6.0)
    min_separation_bins = Int(3)
    min_height_db = Float(-35.0)
    delay_tolerance_bins = Float(2.0)

    @validate('max_components', 'min_separation_bins')
    def _check_positive(self, proposal):
        if proposal['value'] < 1:
            raise TraitError('%s must be >= 1' % proposal['trait'].name)
        return proposal['value']

    @validate('delay_tolerance_bins')
    def _check_tolerance(self, proposal):
        if proposal['value'] < 0:
            raise TraitError('delay_tolerance_bins must be >= 0')
        return proposal['value']


class ClassifierOptions(_Options):
    bin_count = Int(None, allow_none=True)
    epsilon = Float(1e-6)
    convention = Enum(['amplitude_20log', 'power_10log'], default_value='amplitude_20log')

    @validate('bin_count')
    def _check_bins(self, proposal):
        if proposal['value'] is not None and proposal['value'] < 2:
            raise TraitError('bin_count must be >= 2')
        return proposal['value']

    @validate('epsilon')
    def _check_epsilon(self, proposal):
        if not proposal['value'] > 0:
            raise TraitError('epsilon must be positive')
        return proposal['value']


class LocalizeOptions(_Options):
    rho_threshold_db = Float(3.0)
    los_block_db = Float(10.0)
    assumed_x_m = Float(None, allow_none=True)
    attenuation_map = List(allow_none=True, default_value=None)

    @validate('attenuation_map')
    def _check_map(self, proposal):
        table = proposal['value']
        if table is None:
            return table
        if len(table) < 2 or any(len(row) != 2 for row in table):
            raise TraitError('attenuation_map needs at least two (rho_db, y_m) pairs')
        return [[float(rho), float(y)] for rho, y in table]


def _default_workers():
    value = os.environ.get('THZSENSE_WORKERS')
    if not value:
        return None
    try:
        return max(1, int(value))
    except ValueError:
        log.warning('ignoring THZSENSE_WORKERS=%r: not an integer', value)
        return None


class SessionConfig(_Options):
    """Everything an experiment run needs: scene, target grid, bands and options."""
    scene = Instance(Scene)
    target_diameter = Float(0.06)
    target_height = Float(0.5)
    material = Enum([m.value for m in Material], default_value=Material.CONDUCTING.value)
    offsets_m = List(Float())
    bands = List(Instance(BandConfig))
    synthesis = Instance(SynthesisConfig)
    pdp = Instance(PdpOptions)
    features = Instance(FeatureOptions)
    classifier = Instance(ClassifierOptions)
    localize = Instance(LocalizeOptions)
    seed = Int(7)
    workers = Int(None, allow_none=True)
    label = Unicode('')
    write_sweeps = Bool(True)

    @default('scene')
    def _default_scene(self):
        return Scene.laboratory()

    @default('offsets_m')
    def _default_offsets(self):
        return list(LABORATORY_OFFSETS_M)

    @default('bands')
    def _default_bands(self):
        return [BandConfig.g_band(), BandConfig.w_band()]

    @default('synthesis')
    def _default_synthesis(self):
        return SynthesisConfig()

    @default('pdp')
    def _default_pdp(self):
        return PdpOptions()

    @default('features')
    def _default_features(self):
        return FeatureOptions()

    @default('classifier')
    def _default_classifier(self):
        return ClassifierOptions()

    @default('localize')
    def _default_localize(self):
        return LocalizeOptions()

    @default('workers')
    def _default_workers(self):
        return _default_workers()

    @validate('offsets_m')
    def _check_offsets(self, proposal):
        offsets = [float(y) for y in proposal['value']]
        if len(set(offsets)) != len(offsets):
            raise TraitError('offsets must be distinct, got %r' % offsets)
        if not all(math.isfinite(y) for y in offsets):
            raise TraitError('offsets must be finite')
        return offsets

    @validate('bands')
    def _check_bands(self, proposal):
        bands = proposal['value']
        if not bands:
            raise TraitError('at least one band is required')
        ids = [b.band_id for b in bands]
        if len(set(ids)) != len(ids):
            raise TraitError('bands must be distinct')
        return bands

    @validate('workers')
    def _check_workers(self, proposal):
        if proposal['value'] is not None and proposal['value'] < 1:
            raise TraitError('workers must be >= 1, got %d' % proposal['value'])
        return proposal['value']

    @validate('target_diameter', 'target_height')
    def _check_target(self, proposal):
        if proposal['value'] <= 0:
            raise TraitError('%s must be positive' % proposal['trait'].name)
        return proposal['value']

    @classmethod
    def default(cls):
        """The laboratory experiment: six offsets, G and W bands, seed 7."""
        return cls()

    def target_at(self, y):
        return Target.at_offset(self.scene, y, **self.target_kwargs())

    def target_kwargs(self):
        return {'diameter': self.target_diameter, 'height': self.target_height,
                'material_tag': self.material}

    def band(self, band_id):
        for band in self.bands:
            if band.band_id.value == band_id:
                return band
        raise ConfigException('band %s is not configured in this session' % band_id)

    def to_dict(self):
        return {
            'format_version': SESSION_FORMAT_VERSION,
            'label': self.label,
            'seed': self.seed,
            'workers': self.workers,
            'scene': self.scene.to_dict(),
            'target': {
                'diameter_m': self.target_diameter,
                'height_m': self.target_height,
                'material': self.material,
            },
            'offsets_m': list(self.offsets_m),
            'bands': [b.to_dict() for b in self.bands],
            'synthesis': self.synthesis.to_dict(),
            'pdp': self.pdp.to_dict(),
            'features': self.features.to_dict(),
            'classifier': self.classifier.to_dict(),
            'localize': self.localize.to_dict(),
            'write_sweeps': self.write_sweeps,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        version = data.pop('format_version', SESSION_FORMAT_VERSION)
        if version != SESSION_FORMAT_VERSION:
            raise ConfigException('unsupported session format version %r' % (version,))
        known = set(cls().to_dict()) - {'format_version'}
        unknown = set(data) - known
        if unknown:
            raise ConfigException('unknown session keys: %s' % ', '.join(sorted(unknown)))

        kwargs = {}
        try:
            if 'scene' in data:
                kwargs['scene'] = Scene.from_dict(data['scene'])
            if 'target' in data:
                target = dict(data['target'])
                unknown = set(target) - {'diameter_m', 'height_m', 'material'}
                if unknown:
                    raise ConfigException('unknown target keys: %s' % ', '.join(sorted(unknown)))
                if 'diameter_m' in target:
                    kwargs['target_diameter'] = target['diameter_m']
                if 'height_m' in target:
                    kwargs['target_height'] = target['height_m']
                if 'material' in target:
                    kwargs['material'] = target['material']
            if 'bands' in data:
                kwargs['bands'] = [BandConfig.from_dict(b) for b in data['bands']]
            if 'synthesis' in data:
                kwargs['synthesis'] = SynthesisConfig.from_dict(data['synthesis'])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigException('invalid session: %s' % e)
        for name, options in (('pdp', PdpOptions), ('features', FeatureOptions),
                              ('classifier', ClassifierOptions), ('localize', LocalizeOptions)):
            if name in data:
                kwargs[name] = options.from_dict(data[name])
        for name in ('label', 'seed', 'workers', 'offsets_m', 'write_sweeps'):
            if name in data:
                kwargs[name] = data[name]
        return cls(**kwargs)


def load_session(path):
    """Reads a session JSON file; missing keys take their defaults.

    Raises:
        SweepParseException: the file is not JSON or holds an invalid session.
    """
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SweepParseException('not valid JSON (%s)' % e, path, e.lineno)
    if not isinstance(data, dict):
        raise SweepParseException('a session must be a JSON object', path)
    try:
        session = SessionConfig.from_dict(data)
    except (ConfigException, TypeError, ValueError) as e:
        raise SweepParseException(str(e), path) from e
    log.debug('loaded session %s', path)
    return session


def save_session(session, path):
    with open(path, 'w') as f:
        json.dump(session.to_dict(), f, indent=2, sort_keys=True)
        f.write('\n')
