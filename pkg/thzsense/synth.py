"""Synthetic channel sweeps: image-method ray sum with knife-edge blockage.

T(f_k) = sum_p gain_p(f_k) a_p exp(-j 2 pi f_k l_p / c) + n_k

Rays come from ``geometry.image_paths``; a_p is 1/l_p spreading times the
per-bounce reflection losses; gain_p is the diffraction gain of the
cylinder, modeled as an infinite-height absorbing strip across the ray. A
conducting target also re-radiates one point-scatter ray through its center
once that ray is at least ``scatter_min_excess_m`` longer than the LoS.
"""

import concurrent.futures
import dataclasses
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from thzsense.attenuation import FrequencySweep
from thzsense.constants import SPEED_OF_LIGHT
from thzsense.diffraction import fresnel_field, fresnel_radius, fresnel_scale, strip_field
from thzsense.errors import ConfigException, ModelException
from thzsense.geometry import Material, Target, frequency_grid, image_paths

log = logging.getLogger(__name__)


class BlockageModel(enum.Enum):
    SINGLE_KNIFE_EDGE = 'single_knife_edge'
    DOUBLE_KNIFE_EDGE = 'double_knife_edge'


@dataclass(frozen=True)
class SynthesisConfig:
    """Options of the synthetic channel.

    ``noise_floor`` is the per-point complex noise level in dB relative to
    the LoS amplitude; -inf disables noise.
    """
    noise_floor: float = -60.0
    seed: int = 0
    blockage_model: BlockageModel = BlockageModel.DOUBLE_KNIFE_EDGE
    max_order: int = 1
    include_scatter: bool = True
    scatter_loss_db: float = 6.0
    scatter_min_excess_m: float = 0.01
    fresnel_zones: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, 'blockage_model', BlockageModel(self.blockage_model))
        object.__setattr__(self, 'noise_floor', float(self.noise_floor))
        if math.isnan(self.noise_floor) or self.noise_floor > 0:
            raise ConfigException('noise_floor must be <= 0 dB, got %r' % self.noise_floor)
        if self.scatter_loss_db < 0:
            raise ConfigException('scatter_loss_db must be >= 0 dB')
        if self.scatter_min_excess_m < 0:
            raise ConfigException('scatter_min_excess_m must be >= 0')
        if self.fresnel_zones <= 0:
            raise ConfigException('fresnel_zones must be positive')
        if int(self.max_order) != self.max_order or self.max_order < 0:
            raise ConfigException('max_order must be a non-negative integer')

    def with_seed(self, seed):
        return dataclasses.replace(self, seed=int(seed))

    def to_dict(self):
        return {
            'noise_floor': self.noise_floor if math.isfinite(self.noise_floor) else None,
            'seed': self.seed,
            'blockage_model': self.blockage_model.value,
            'max_order': self.max_order,
            'include_scatter': self.include_scatter,
            'scatter_loss_db': self.scatter_loss_db,
            'scatter_min_excess_m': self.scatter_min_excess_m,
            'fresnel_zones': self.fresnel_zones,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if 'noise_floor' in data and data['noise_floor'] is None:
            data['noise_floor'] = -math.inf
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ConfigException('unknown synthesis keys: %s' % ', '.join(sorted(unknown)))
        return cls(**data)


@dataclass(frozen=True)
class RayComponent:
    """A ray with its frequency-independent amplitude.

    ``kind`` is 'specular' for image-method rays (``path`` set) and
    'scatter' for the target re-radiation ray.
    """
    path_length: float
    amplitude: complex
    blocked_flag: bool = False
    kind: str = 'specular'
    path: object = None

    def __post_init__(self):
        if self.path_length <= 0:
            raise ConfigException('path_length must be positive')


def _mirror_into_cell(value, cell, extent):
    if cell % 2 == 0:
        return cell * extent + value
    return (cell + 1) * extent - value


def _horizontal_spans(path):
    # Floor and ceiling bounces do not move the ray between horizontal cells.
    walls = [t for t, surface in zip(path.crossings, path.surface_sequence)
             if surface.startswith('wall')]
    bounds = [0.0] + walls + [1.0]
    return list(zip(bounds[:-1], bounds[1:]))


def _closest_approaches(scene, target, path):
    """(t, signed clearance) of every span of ``path`` passing beside the target."""
    center = scene.room_point(target.center)
    start = np.array(path.source_image[:2])
    direction = np.array(path.receiver[:2]) - start
    norm2 = float(direction @ direction)
    if norm2 == 0:
        return []
    unit = direction / math.sqrt(norm2)
    extents = (scene.room_width, scene.room_depth)
    result = []
    for t0, t1 in _horizontal_spans(path):
        mid = start + 0.5 * (t0 + t1) * direction
        image = np.array([
            _mirror_into_cell(center[axis], math.floor(mid[axis] / extents[axis]), extents[axis])
            for axis in range(2)
        ])
        t = float((image - start) @ direction) / norm2
        if not (t0 < t < t1):
            continue
        offset = image - (start + t * direction)
        clearance = float(unit[0] * offset[1] - unit[1] * offset[0])
        result.append((t, clearance))
    return result


def blockage_gain(scene, target, ray, f, model=BlockageModel.DOUBLE_KNIFE_EDGE, fresnel_zones=3.0):
    """Complex diffraction gain of the target on one ray, vectorized over f.

    Rays whose closest approach leaves more than ``fresnel_zones`` first-zone
    radii between the ray and the nearer cylinder edge get unit gain.
    """
    f = np.asarray(f, dtype=np.float64)
    gain = np.ones(f.shape, dtype=np.complex128)
    if target is None or ray.kind != 'specular' or ray.path is None:
        return gain
    model = BlockageModel(model)
    radius = target.radius
    length = ray.path_length
    for t, clearance in _closest_approaches(scene, target, ray.path):
        d1 = t * length
        d2 = length - d1
        near = (abs(clearance) - radius) < fresnel_zones * fresnel_radius(d1, d2, f)
        if not np.any(near):
            continue
        scale = fresnel_scale(d1, d2, f)
        nu_low = (clearance - radius) * scale
        nu_high = (clearance + radius) * scale
        if model is BlockageModel.DOUBLE_KNIFE_EDGE:
            field = strip_field(nu_low, nu_high)
        elif clearance >= 0:
            field = fresnel_field(-nu_low)
        else:
            field = fresnel_field(nu_high)
        gain = gain * np.where(near, field, 1.0)
    return gain


def _ray_amplitude(scene, path):
    losses = scene.surface_reflection_loss
    total_db = sum(losses.loss_db(surface) for surface in path.surface_sequence)
    return 10.0 ** (-total_db / 20.0) / path.path_length


def _scatter_ray(scene, target, syn):
    tx = scene.tx_position
    rx = scene.rx_position
    center = target.center
    axis = scene.link_axis
    rel = (center[0] - tx[0], center[1] - tx[1])
    lateral = axis[0] * rel[1] - axis[1] * rel[0]
    if abs(lateral) <= target.radius:
        return None
    length = math.dist(tx, center) + math.dist(center, rx)
    if length - scene.los_length < syn.scatter_min_excess_m:
        # Too close to the LoS to form a separate component.
        return None
    amplitude = 10.0 ** (-syn.scatter_loss_db / 20.0) / length
    return RayComponent(length, complex(amplitude), False, 'scatter', None)


def trace_rays(scene, target=None, syn=None):
    """The rays contributing to the sweep, strongest-first ordering not implied."""
    syn = syn or SynthesisConfig()
    rays = []
    for path in image_paths(scene, syn.max_order):
        blocked = False
        if target is not None:
            blocked = any(abs(c) < target.radius
                          for _, c in _closest_approaches(scene, target, path))
        rays.append(RayComponent(path.path_length, complex(_ray_amplitude(scene, path)),
                                 blocked, 'specular', path))
    if (target is not None and syn.include_scatter
            and target.material_tag is Material.CONDUCTING):
        scatter = _scatter_ray(scene, target, syn)
        if scatter is not None:
            rays.append(scatter)
    return rays


def _label_for(scene, target):
    if target is None:
        return 'baseline'
    axis = scene.link_axis
    rel = (target.center[0] - scene.tx_position[0], target.center[1] - scene.tx_position[1])
    lateral = axis[0] * rel[1] - axis[1] * rel[0]
    return 'y=%gcm' % round(lateral * 100.0, 6)


def synthesize_sweep(scene, target, cfg, syn=None, label=None):
    """Synthesizes one band's sweep with or without the target.

    Raises:
        ModelException: the scene produced no rays.
    """
    syn = syn or SynthesisConfig()
    f = frequency_grid(cfg)
    rays = trace_rays(scene, target, syn)
    if not rays:
        raise ModelException('no propagation paths for this scene')
    values = np.zeros(f.shape, dtype=np.complex128)
    for ray in rays:
        gain = blockage_gain(scene, target, ray, f, syn.blockage_model, syn.fresnel_zones)
        values += gain * ray.amplitude * np.exp(-2j * np.pi * f * ray.path_length / SPEED_OF_LIGHT)
    if math.isfinite(syn.noise_floor):
        sigma = 10.0 ** (syn.noise_floor / 20.0) / scene.los_length
        rng = np.random.default_rng(syn.seed)
        noise = rng.standard_normal((2, f.size))
        values += sigma / math.sqrt(2.0) * (noise[0] + 1j * noise[1])
    label = _label_for(scene, target) if label is None else label
    log.debug('synthesized %s sweep %r: %d rays, seed %d',
              cfg.band_id.value, label, len(rays), syn.seed)
    return FrequencySweep(cfg, values, label)


def synthesize_batch(scene, offsets, cfg, syn, seeds, workers=None, target_kwargs=None):
    """Monte Carlo batch over (offset, seed) pairs, evaluated concurrently.

    An offset of None stands for the target-free sweep. Returns a dict keyed
    by (offset, seed).
    """
    if workers is not None and workers < 1:
        raise ConfigException('workers must be >= 1, got %r' % (workers,))
    target_kwargs = target_kwargs or {}
    jobs = [(offset, seed) for offset in offsets for seed in seeds]

    def run(job):
        offset, seed = job
        target = None if offset is None else Target.at_offset(scene, offset, **target_kwargs)
        return job, synthesize_sweep(scene, target, cfg, syn.with_seed(seed))

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return dict(pool.map(run, jobs))
