"""Desk-scale simulator for rate-independent coupled elasto-plastic
damage via viscous regularization, with energy-dissipation diagnostics,
arclength reparameterization, and vanishing-parameter sweeps."""

from .constitutive import EnergyParams, MaterialParams, Operators
from .discretization import Grid, LoadingSpec, State, initial_state
from .driver import Trajectory, run_viscous
from .solver import StepResult, incremental_step

__all__ = [
    "EnergyParams",
    "Grid",
    "LoadingSpec",
    "MaterialParams",
    "Operators",
    "State",
    "StepResult",
    "Trajectory",
    "incremental_step",
    "initial_state",
    "run_viscous",
]

__version__ = "0.1.0"
