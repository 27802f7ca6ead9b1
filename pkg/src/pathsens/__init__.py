"""Path-space sensitivity analysis of stationary stochastic dynamics.

Relative entropy rate (RER) and path-space Fisher information matrix (FIM)
estimated as ergodic averages along simulated trajectories of jump
processes and discrete-time chains, plus exact oracles for small systems.
"""

from .core import (CHUNK, AbsoluteContinuityError, AbsorbingStateError, ChainTrajectory, ConfigError,
                   DimensionError, FimAccumulator, JumpTrajectory, NoDataError, ParameterVector, PathSensError,
                   Perturbation, RerAccumulator, RngStream, WeightedMean, accumulate, axis_directions)

__version__ = "0.1.0"

__all__ = [
    "CHUNK", "AbsoluteContinuityError", "AbsorbingStateError", "ChainTrajectory", "ConfigError",
    "DimensionError", "FimAccumulator", "JumpTrajectory", "NoDataError", "ParameterVector", "PathSensError",
    "Perturbation", "RerAccumulator", "RngStream", "WeightedMean", "accumulate", "axis_directions",
]
