"""Sub-THz device-free target sensing from VNA channel sweeps."""

__version__ = '1.0.0'
