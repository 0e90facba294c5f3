"""Swarm formation control by distributed estimation of image moments."""

from .moments import (
    BasisKind,
    DensityGrid,
    MomentBasis,
    MomentVector,
    moments_of_grid,
    moments_of_points,
    msre,
    phi,
    phi_jacobian,
    reconstruct,
)
from .estimator import SwarmEstimator, estimator_step
from .controller import ControlParams, gain_matrix
from .swarmsim import Event, Scenario, Target, run

__all__ = [
    "BasisKind",
    "DensityGrid",
    "MomentBasis",
    "MomentVector",
    "moments_of_grid",
    "moments_of_points",
    "msre",
    "phi",
    "phi_jacobian",
    "reconstruct",
    "SwarmEstimator",
    "estimator_step",
    "ControlParams",
    "gain_matrix",
    "Event",
    "Scenario",
    "Target",
    "run",
]
