"""Simulation and inference toolkit for locating a single 13C nuclear spin near an NV sensor."""

from .errors import InputError, NumericalError, SpinlocError
from .hamiltonian import HyperfineParams, SensorConfig, conditional_precession
from .spincore import SpinRotation, compose, decompose, rotation_from_axis_angle

__version__ = "0.1.0"

__all__ = [
    "InputError",
    "NumericalError",
    "SpinlocError",
    "HyperfineParams",
    "SensorConfig",
    "conditional_precession",
    "SpinRotation",
    "compose",
    "decompose",
    "rotation_from_axis_angle",
]
