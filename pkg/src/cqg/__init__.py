"""Conformal-gauge geometry of spin states and EPR coincidence statistics."""

from . import epr, fields, geometry, numerics, spin_states
from .errors import CQGError

__all__ = ["epr", "fields", "geometry", "numerics", "spin_states", "CQGError"]
__version__ = "0.1.0"
