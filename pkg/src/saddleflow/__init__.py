"""Discontinuous saddle-point dynamics for standard-form linear programs."""
from .disturbances import DisturbanceSignal, variation_integral
from .dynamics import IntegratorConfig, KParameters, Trajectory, integrate, step
from .errors import SaddleflowError
from .lp_model import PerturbationVector, PrimalDualState, StandardFormLP, kkt_residual, perturbed_program
from .network import CommGraph, FailureSchedule, rcg_integrate
from .oracle import OracleSolution, solve, solve_primal_dual

__all__ = [
    "CommGraph",
    "DisturbanceSignal",
    "FailureSchedule",
    "IntegratorConfig",
    "KParameters",
    "OracleSolution",
    "PerturbationVector",
    "PrimalDualState",
    "SaddleflowError",
    "StandardFormLP",
    "Trajectory",
    "integrate",
    "kkt_residual",
    "perturbed_program",
    "rcg_integrate",
    "solve",
    "solve_primal_dual",
    "step",
    "variation_integral",
]
