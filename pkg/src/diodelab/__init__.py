"""Coupled-channel scattering of two-level atoms off three Gaussian lasers.

Mirror lasers act as state-selective barriers and a resonant pump couples
the two internal states; together they can pass ground-state atoms in one
direction only.  The package computes exact scattering probabilities, the
adiabatic-frame picture and the velocity window of one-way behaviour.
"""
__version__ = "0.1.0"

from .physics import CaseLabel, ConfigError, DiodeConfig, load_config, potential_matrix
from .solver import (
    AmplitudeSet,
    ConvergenceError,
    GridSpec,
    Incidence,
    Side,
    SMatrix,
    probabilities_signed,
    s_matrix,
    scattering_amplitudes,
    solution_field,
    solve_scattering,
)
from .adiabatic import adiabatic_frame, adiabatic_prediction, asymptotic_frames, lambda_limits, v_ad_max
from .analysis import VelocityGrid, failure_measure, find_window, scan_d, scan_shift

__all__ = [
    "AmplitudeSet",
    "CaseLabel",
    "ConfigError",
    "ConvergenceError",
    "DiodeConfig",
    "GridSpec",
    "Incidence",
    "SMatrix",
    "Side",
    "VelocityGrid",
    "adiabatic_frame",
    "adiabatic_prediction",
    "asymptotic_frames",
    "failure_measure",
    "find_window",
    "lambda_limits",
    "load_config",
    "potential_matrix",
    "probabilities_signed",
    "s_matrix",
    "scan_d",
    "scan_shift",
    "scattering_amplitudes",
    "solution_field",
    "solve_scattering",
    "v_ad_max",
]
