"""Plane-strain crystal-plasticity finite elements for mean-field curves."""

from .material import (
    BOLTZMANN_J_PER_K,
    MaterialParams,
    N_SLIP,
    SlipSystemSet,
    harden,
    hardening_matrix,
    hardening_modulus,
    mean_field,
    resolved_shear,
    rotated_stiffness,
    rotation_z,
    slip_rate,
    slip_systems,
    von_mises,
)
from .solver import (
    LoadCase,
    ResponseCurve,
    SimulationError,
    SolverSettings,
    run_simulation,
)
from .update import (
    BatchState,
    ConvergenceError,
    GrainFrames,
    MaterialState,
    cauchy_stress,
    constitutive_update,
    grain_frames,
    material_update,
)

__all__ = [
    "BOLTZMANN_J_PER_K",
    "BatchState",
    "ConvergenceError",
    "GrainFrames",
    "LoadCase",
    "MaterialParams",
    "MaterialState",
    "N_SLIP",
    "ResponseCurve",
    "SimulationError",
    "SlipSystemSet",
    "SolverSettings",
    "cauchy_stress",
    "constitutive_update",
    "grain_frames",
    "harden",
    "hardening_matrix",
    "hardening_modulus",
    "material_update",
    "mean_field",
    "resolved_shear",
    "rotated_stiffness",
    "rotation_z",
    "run_simulation",
    "slip_rate",
    "slip_systems",
    "von_mises",
]
