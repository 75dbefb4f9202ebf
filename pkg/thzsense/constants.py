"""Physical constants shared across the package."""

# Speed of light in vacuum (m/s).
SPEED_OF_LIGHT = 299792458.0
