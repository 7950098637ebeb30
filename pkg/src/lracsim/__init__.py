"""Simulation and verification engine for a long-range lattice Allen-Cahn system.

The lattice couples each node to all neighbours within radius R ~ h^-zeta;
its scaling limit is the stochastic Allen-Cahn equation on the circle.
"""
from .dynamics import DriftSpec, FourierDatum, HittingSpec, SimulationConfig, Trajectory, hitting_time, simulate
from .errors import LracError
from .kernel import DiscreteWeights, WeightKernel, build_weights, fourth_moment, radius_for
from .noise import NoisePlan, increments_for_grid, stochastic_convolution
from .operator import LongRangeOperator, apply, eigenvalue_circulant, eigenvalue_paper
from .semigroup import ContinuousHeatKernel, DiscreteSemigroup, eval_discrete

__version__ = "0.1.0"

__all__ = [
    "DriftSpec", "FourierDatum", "HittingSpec", "SimulationConfig", "Trajectory", "hitting_time", "simulate",
    "LracError", "DiscreteWeights", "WeightKernel", "build_weights", "fourth_moment", "radius_for",
    "NoisePlan", "increments_for_grid", "stochastic_convolution", "LongRangeOperator", "apply",
    "eigenvalue_circulant", "eigenvalue_paper", "ContinuousHeatKernel", "DiscreteSemigroup", "eval_discrete",
]
