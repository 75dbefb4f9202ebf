"""Exceptions raised by thzsense.

The CLI maps these onto exit codes: DataException -> 3,
ModelException and ConfigException -> 4.
"""


class ThzSenseException(Exception):
    """Base class for every error raised by the package."""
    pass


class ConfigException(ThzSenseException):
    """A scene, band, target or session setting is invalid."""
    pass


class GeometryException(ConfigException):
    """The scene geometry is degenerate (e.g. a node outside the room)."""
    pass


class DataException(ThzSenseException):
    """Input data is malformed or unusable."""
    pass


class SweepParseException(DataException):
    """A sweep, session, model or feature file could not be parsed.

    Carries the offending path and 1-based line number so the CLI can point
    at the exact place in the file.
    """
    def __init__(self, message, path=None, line_number=None):
        self.path = path
        self.line_number = line_number
        super(SweepParseException, self).__init__(message)

    def __str__(self):
        message = super(SweepParseException, self).__str__()
        if self.path is not None and self.line_number is not None:
            return '%s:%d: %s' % (self.path, self.line_number, message)
        if self.path is not None:
            return '%s: %s' % (self.path, message)
        return message


class DataQualityException(DataException):
    """Values are non-finite or exactly zero where a ratio is needed."""
    pass


class BandMismatchException(DataException):
    """Two sweeps or series do not share the same frequency grid."""
    pass


class ModelException(ThzSenseException):
    """A numerical or model-level failure."""
    pass


class FeatureExtractionException(ModelException):
    """No PDP peak satisfies the extraction thresholds."""
    pass


class LocalizationException(ModelException):
    """A path length cannot be inverted into a physical offset."""
    pass
