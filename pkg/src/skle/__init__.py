"""Komatu-Loewner evolutions on standard slit domains."""

from . import driver, flow, geometry, kernel, locality, oracle
from .geometry import Slit, SlitConfig, distance, scale, translate, validate

__version__ = "0.1.0"

__all__ = [
    "Slit",
    "SlitConfig",
    "validate",
    "distance",
    "scale",
    "translate",
    "geometry",
    "kernel",
    "oracle",
    "flow",
    "driver",
    "locality",
    "__version__",
]
