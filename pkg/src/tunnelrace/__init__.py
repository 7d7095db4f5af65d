"""Races between a tunneling particle and a free one.

Modules: ``grids`` (grid and states), ``potentials``, ``scattering``,
``dynamics``, ``observables`` (arrival-time and localization detectors),
``race``, ``opcheck`` (finite-dimensional operator checks) and ``cli``.
"""
__version__ = "0.1.0"

from .grids import QuantumState, SpatialGrid, build_grid, gaussian_packet, mask_left_of
from .potentials import PotentialSpec, random_barrier, square_barrier
from .scattering import ScatteringCurve, transmission_amplitude, transmission_curve
from .race import RaceConfig, RaceReport, make_config, random_config, run_race

__all__ = [
    "QuantumState", "SpatialGrid", "build_grid", "gaussian_packet", "mask_left_of",
    "PotentialSpec", "random_barrier", "square_barrier",
    "ScatteringCurve", "transmission_amplitude", "transmission_curve",
    "RaceConfig", "RaceReport", "make_config", "random_config", "run_race",
]
