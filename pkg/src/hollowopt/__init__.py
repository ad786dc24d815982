"""Minimal-resistance hollows under the single impact condition."""

__version__ = "0.1.0"

from .resistance import Weight, resistance_F, resistance_radial, resistance_weighted
from .shapes import EdgeSequence, ParabolicShape, PLShape, RadialShape, load_shape, make_u0, save_shape
from .sic import SicReport, check_sic, check_strong_sic

__all__ = [
    "EdgeSequence",
    "ParabolicShape",
    "PLShape",
    "RadialShape",
    "SicReport",
    "Weight",
    "check_sic",
    "check_strong_sic",
    "load_shape",
    "make_u0",
    "resistance_F",
    "resistance_radial",
    "resistance_weighted",
    "save_shape",
]
