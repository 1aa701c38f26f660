"""Vortex-method simulator and verification suite for 2D Euler flow on a
corner domain, with conformal image kernels, trajectory bound checks, the
time-weighted distance energy, and numerical validation of the supporting
inequalities."""

from .geometry import WedgeParams, map_derivative, map_from_halfplane, map_to_halfplane, sector_power
from .kernel import KernelConfig, b_eval, b_zero, kernel_eval, velocity
from .vorticity import InitialVorticity, VortexEnsemble, discretize, half_sector_patch, validate_assumptions
from .flow import FlowTrace, IntegratorControls, corner_probe, integrate, step
from .energy import EnergyTrace, ModelOdeSolution, canonical_alpha, choose_constants, e1, phi, weighted_energy
from .report import BoundCheckReport

__version__ = "0.1.0"

__all__ = [
    "WedgeParams",
    "map_derivative",
    "map_from_halfplane",
    "map_to_halfplane",
    "sector_power",
    "KernelConfig",
    "b_eval",
    "b_zero",
    "kernel_eval",
    "velocity",
    "InitialVorticity",
    "VortexEnsemble",
    "discretize",
    "half_sector_patch",
    "validate_assumptions",
    "FlowTrace",
    "IntegratorControls",
    "corner_probe",
    "integrate",
    "step",
    "EnergyTrace",
    "ModelOdeSolution",
    "canonical_alpha",
    "choose_constants",
    "e1",
    "phi",
    "weighted_energy",
    "BoundCheckReport",
]
