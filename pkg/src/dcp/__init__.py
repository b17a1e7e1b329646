"""Mean-field dissipative contact process: particle simulation, limits, fluctuations and spectra."""
from .laws import Mixture, PointMass, StationaryLaw, UniformLaw, atom_at_zero_mixture, law_from_dict
from .model import ModelParams, endemic_point, fixed_points, spiral_thresholds, stability

__all__ = [
    "ModelParams",
    "endemic_point",
    "fixed_points",
    "spiral_thresholds",
    "stability",
    "PointMass",
    "UniformLaw",
    "Mixture",
    "StationaryLaw",
    "atom_at_zero_mixture",
    "law_from_dict",
]
