"""Non-intersecting Poisson buses as a numerical laboratory for random-matrix statistics.

Exact finite-N formulas for a model of buses on a line and on a circle,
exact and rejection samplers, the orthogonal-polynomial kernels behind
them, sine-kernel reference curves and the unfolding/statistics pipeline.
"""

from .circle import CircleParams, CyclicConfig, circle_km, qt_table
from .equilibrium import EquilibriumData, unfold
from .experiment import ExperimentConfig, StageError, make_config, run_experiment
from .logspace import LogValue
from .model_line import ArrivalTimes, ModelParams, PositionConfig, arrival_density, position_pmf
from .orthopoly import JacobiBasis, KrawtchoukBasis
from .sampler import JacobiArrivalSampler, Seed, TrajectorySet, sample_bridge_rejection

__all__ = [
    "ArrivalTimes",
    "CircleParams",
    "CyclicConfig",
    "EquilibriumData",
    "ExperimentConfig",
    "JacobiArrivalSampler",
    "JacobiBasis",
    "KrawtchoukBasis",
    "LogValue",
    "ModelParams",
    "PositionConfig",
    "Seed",
    "StageError",
    "TrajectorySet",
    "arrival_density",
    "circle_km",
    "make_config",
    "position_pmf",
    "qt_table",
    "run_experiment",
    "sample_bridge_rejection",
    "unfold",
]
