"""Position-dependent-mass harmonic oscillators: profiles, coordinate maps,
grid operators, spectra and identity checks."""

__version__ = "0.1.0"

from .coord import CoordinateMap, Grid, build_map, build_map_for, invert
from .expr import Compiled, eval_dual, evaluate, parse, serialize
from .kernels import backend_name
from .operators import GridOperator, OrderingParams, OscillatorConfig
from .profiles import (
    ClosedForms,
    DeformationProfile,
    MassProfile,
    Potential,
    builtin,
    deformation_from_mass,
    deformed_potential,
    mass_from_deformation,
)
from .spectra import Spectrum, analytic_energy, eigen_symmetric_tridiagonal
from .verify import ResidualReport

__all__ = [
    "ClosedForms",
    "Compiled",
    "CoordinateMap",
    "DeformationProfile",
    "Grid",
    "GridOperator",
    "MassProfile",
    "OrderingParams",
    "OscillatorConfig",
    "Potential",
    "ResidualReport",
    "Spectrum",
    "analytic_energy",
    "backend_name",
    "build_map",
    "build_map_for",
    "builtin",
    "deformation_from_mass",
    "deformed_potential",
    "eigen_symmetric_tridiagonal",
    "eval_dual",
    "evaluate",
    "invert",
    "mass_from_deformation",
    "parse",
    "serialize",
]
