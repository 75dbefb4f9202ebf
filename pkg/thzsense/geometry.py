"""Scene geometry, band configuration and image-method ray paths.

Coordinates follow the measurement layout: the horizontal plane at height
``plane_height_h`` carries a 2D frame whose origin is the transmitter and
whose first axis points at the receiver. The target offset ``y`` is measured
laterally from the line of sight. Room surfaces are axis aligned in that
frame; ``room_origin`` places the room's (x_min, y_min) corner in it.

Floor and ceiling bounces are evaluated in 3D; everything else lives in the
horizontal plane.
"""

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from thzsense.errors import ConfigException, GeometryException

log = logging.getLogger(__name__)


class BandId(enum.Enum):
    W = 'W'
    G = 'G'


class Material(enum.Enum):
    ABSORBING = 'perfectly_absorbing'
    CONDUCTING = 'perfectly_conducting'


# Surface names, in the order the image method enumerates axes.
_AXIS_SURFACES = (
    ('wall_x_min', 'wall_x_max'),
    ('wall_y_min', 'wall_y_max'),
    ('floor', 'ceiling'),
)


def surface_class(surface):
    """Maps a surface name onto its loss class (floor, ceiling or wall)."""
    if surface.startswith('wall'):
        return 'wall'
    return surface


def _point2(value, name):
    try:
        x, y = value
        point = (float(x), float(y))
    except (TypeError, ValueError):
        raise ConfigException('%s must be a 2D point, got %r' % (name, value))
    if not all(math.isfinite(c) for c in point):
        raise ConfigException('%s must be finite, got %r' % (name, value))
    return point


@dataclass(frozen=True)
class BandConfig:
    """One VNA band: start/stop frequency (Hz) and number of points."""
    band_id: BandId
    f_start: float
    f_stop: float
    n_points: int

    def __post_init__(self):
        try:
            object.__setattr__(self, 'band_id', BandId(self.band_id))
        except ValueError:
            raise ConfigException('unknown band id %r (expected W or G)' % (self.band_id,))
        object.__setattr__(self, 'f_start', float(self.f_start))
        object.__setattr__(self, 'f_stop', float(self.f_stop))
        if int(self.n_points) != self.n_points:
            raise ConfigException('n_points must be an integer, got %r' % (self.n_points,))
        object.__setattr__(self, 'n_points', int(self.n_points))
        if not (math.isfinite(self.f_start) and math.isfinite(self.f_stop)):
            raise ConfigException('band edges must be finite')
        if self.f_stop <= self.f_start:
            raise ConfigException(
                'f_stop (%g Hz) must exceed f_start (%g Hz)' % (self.f_stop, self.f_start))
        if self.n_points < 2:
            raise ConfigException('n_points must be >= 2, got %d' % self.n_points)

    @property
    def span(self):
        return self.f_stop - self.f_start

    @property
    def spacing(self):
        return self.span / (self.n_points - 1)

    @property
    def center(self):
        return 0.5 * (self.f_start + self.f_stop)

    @classmethod
    def w_band(cls, n_points=1001):
        return cls(BandId.W, 75e9, 110e9, n_points)

    @classmethod
    def g_band(cls, n_points=1001):
        return cls(BandId.G, 170e9, 260e9, n_points)

    @classmethod
    def preset(cls, band_id, n_points=1001):
        band_id = BandId(band_id)
        if band_id is BandId.W:
            return cls.w_band(n_points)
        return cls.g_band(n_points)

    def to_dict(self):
        return {
            'band_id': self.band_id.value,
            'f_start_hz': self.f_start,
            'f_stop_hz': self.f_stop,
            'n_points': self.n_points,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data['band_id'], data['f_start_hz'], data['f_stop_hz'], data['n_points'])


def frequency_grid(cfg):
    """Returns the N_f frequencies f_k = f_start + k * span / (N_f - 1).

    Built from the index formula so that every grid is bit-reproducible and
    the last point is exactly f_stop.
    """
    k = np.arange(cfg.n_points, dtype=np.float64)
    grid = cfg.f_start + (k * cfg.span) / (cfg.n_points - 1)
    grid[-1] = cfg.f_stop
    return grid


@dataclass(frozen=True)
class SurfaceLosses:
    """Reflection loss in dB per bounce for each surface class."""
    floor_db: float = 6.0
    ceiling_db: float = 10.0
    wall_db: float = 8.0

    def __post_init__(self):
        for name in ('floor_db', 'ceiling_db', 'wall_db'):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise ConfigException('%s must be a finite loss >= 0 dB, got %r' % (name, value))
            object.__setattr__(self, name, value)

    def loss_db(self, surface):
        return getattr(self, surface_class(surface) + '_db')


@dataclass(frozen=True)
class Scene:
    """TX/RX placement in the horizontal plane plus the enclosing room."""
    tx_position: tuple = (0.0, 0.0)
    rx_position: tuple = (0.92, 0.0)
    plane_height_h: float = 1.0
    room_width: float = 4.0
    room_depth: float = 4.0
    room_height: float = 3.0
    room_origin: tuple = (-1.0, -1.3)
    surface_reflection_loss: SurfaceLosses = field(default_factory=SurfaceLosses)

    def __post_init__(self):
        object.__setattr__(self, 'tx_position', _point2(self.tx_position, 'tx_position'))
        object.__setattr__(self, 'rx_position', _point2(self.rx_position, 'rx_position'))
        object.__setattr__(self, 'room_origin', _point2(self.room_origin, 'room_origin'))
        for name in ('plane_height_h', 'room_width', 'room_depth', 'room_height'):
            object.__setattr__(self, name, float(getattr(self, name)))
        if isinstance(self.surface_reflection_loss, dict):
            object.__setattr__(self, 'surface_reflection_loss',
                               SurfaceLosses(**self.surface_reflection_loss))
        if self.los_length <= 0:
            raise ConfigException('tx and rx must not coincide')
        if min(self.room_width, self.room_depth, self.room_height) <= 0:
            raise ConfigException('room dimensions must be positive')
        if not 0 < self.plane_height_h < self.room_height:
            raise ConfigException(
                'plane height %g m must lie strictly between floor and ceiling (%g m)'
                % (self.plane_height_h, self.room_height))

    @classmethod
    def laboratory(cls):
        """The laboratory layout: d = 0.92 m, h = 1 m, 4 x 4 x 3 m room."""
        return cls()

    @property
    def los_length(self):
        return math.dist(self.tx_position, self.rx_position)

    @property
    def link_axis(self):
        """Unit vector from TX to RX."""
        dx = self.rx_position[0] - self.tx_position[0]
        dy = self.rx_position[1] - self.tx_position[1]
        length = math.hypot(dx, dy)
        return (dx / length, dy / length)

    def link_point(self, x, y):
        """Converts along-link x / lateral y into plane coordinates."""
        ux, uy = self.link_axis
        return (self.tx_position[0] + x * ux - y * uy,
                self.tx_position[1] + x * uy + y * ux)

    def room_point(self, point, z=None):
        """Plane coordinates -> room coordinates (x, y, z), floor at z = 0."""
        z = self.plane_height_h if z is None else z
        return (point[0] - self.room_origin[0], point[1] - self.room_origin[1], z)

    @property
    def room_size(self):
        return (self.room_width, self.room_depth, self.room_height)

    def to_dict(self):
        losses = self.surface_reflection_loss
        return {
            'tx_position': list(self.tx_position),
            'rx_position': list(self.rx_position),
            'plane_height_h': self.plane_height_h,
            'room_width': self.room_width,
            'room_depth': self.room_depth,
            'room_height': self.room_height,
            'room_origin': list(self.room_origin),
            'surface_reflection_loss': {
                'floor_db': losses.floor_db,
                'ceiling_db': losses.ceiling_db,
                'wall_db': losses.wall_db,
            },
        }

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ConfigException('unknown scene keys: %s' % ', '.join(sorted(unknown)))
        return cls(**data)


@dataclass(frozen=True)
class Target:
    """Cylindrical phantom whose axis projects onto (x, y) in the plane."""
    center: tuple
    diameter: float = 0.06
    height: float = 0.5
    material_tag: Material = Material.CONDUCTING

    def __post_init__(self):
        object.__setattr__(self, 'center', _point2(self.center, 'center'))
        object.__setattr__(self, 'material_tag', Material(self.material_tag))
        object.__setattr__(self, 'diameter', float(self.diameter))
        object.__setattr__(self, 'height', float(self.height))
        if self.diameter <= 0 or self.height <= 0:
            raise ConfigException('target diameter and height must be positive')

    @property
    def radius(self):
        return 0.5 * self.diameter

    @classmethod
    def at_offset(cls, scene, y, x=None, **kwargs):
        """Places the target at lateral offset y, at the link midpoint by default."""
        x = 0.5 * scene.los_length if x is None else x
        return cls(scene.link_point(x, y), **kwargs)


@dataclass(frozen=True)
class ImagePath:
    """One image-method ray.

    ``source_image`` is the unfolded TX image and ``receiver`` the RX, both
    in room coordinates; the straight segment between them has the physical
    path length. ``crossings`` holds, for each bounce, the fraction of the
    path travelled when it happens.
    """
    path_length: float
    bounce_count: int
    surface_sequence: tuple
    source_image: tuple
    receiver: tuple
    crossings: tuple = ()

    def point_at(self, t):
        return tuple(s + t * (r - s) for s, r in zip(self.source_image, self.receiver))


def _inside_room(point, size):
    return all(0.0 < c < extent for c, extent in zip(point, size))


def _axis_crossings(start, stop, extent, surfaces):
    """Bounce fractions and surfaces where the unfolded segment crosses cell walls."""
    result = []
    if start == stop:
        return result
    lo, hi = sorted((start, stop))
    first = math.floor(lo / extent) + 1
    last = math.ceil(hi / extent) - 1
    for m in range(first, last + 1):
        t = (m * extent - start) / (stop - start)
        result.append((t, surfaces[m % 2]))
    return result


def image_paths(scene, max_order=1):
    """Enumerates image-method rays up to ``max_order`` bounces.

    Uses the rectangular-room image construction: along each axis an image
    coordinate is (1 - 2q) * s + 2 n L with q in {0, 1}, and it costs
    |n - q| + |n| bounces. Results are sorted by path length.

    Raises:
        ConfigException: max_order is negative.
        GeometryException: TX or RX is not strictly inside the room.
    """
    if int(max_order) != max_order or max_order < 0:
        raise ConfigException('max_order must be a non-negative integer, got %r' % (max_order,))
    max_order = int(max_order)
    size = scene.room_size
    source = scene.room_point(scene.tx_position)
    receiver = scene.room_point(scene.rx_position)
    for name, point in (('tx', source), ('rx', receiver)):
        if not _inside_room(point, size):
            raise GeometryException(
                '%s at room coordinates (%.3f, %.3f, %.3f) m is outside the %g x %g x %g m room'
                % ((name,) + tuple(point) + tuple(size)))

    per_axis = []
    for axis in range(3):
        options = []
        for n in range(-max_order, max_order + 1):
            for q in (0, 1):
                bounces = abs(n - q) + abs(n)
                if bounces <= max_order:
                    coordinate = (1 - 2 * q) * source[axis] + 2 * n * size[axis]
                    options.append((coordinate, bounces))
        per_axis.append(options)

    paths = []
    for combo in itertools.product(*per_axis):
        bounces = sum(b for _, b in combo)
        if bounces > max_order:
            continue
        image = tuple(c for c, _ in combo)
        hits = []
        for axis in range(3):
            hits.extend(_axis_crossings(image[axis], receiver[axis], size[axis],
                                        _AXIS_SURFACES[axis]))
        hits.sort()
        paths.append(ImagePath(
            path_length=math.dist(image, receiver),
            bounce_count=bounces,
            surface_sequence=tuple(surface for _, surface in hits),
            source_image=image,
            receiver=receiver,
            crossings=tuple(t for t, _ in hits),
        ))

    paths.sort(key=lambda p: (p.path_length, p.surface_sequence))
    log.debug('image method: %d paths up to order %d', len(paths), max_order)
    return paths


def los_path_length(scene):
    """Euclidean TX-RX distance."""
    return scene.los_length
