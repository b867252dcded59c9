"""Coupled agent-environment SDEs, noise-driven online learning and evolved controllers."""

from .ctrnn import CtrnnParams, init_params
from .environments import EnvironmentDistribution, RewardWeights, SdiParams, StochasticDoubleIntegrator
from .exceptions import ConfigError, DimensionMismatch, NonFiniteState, ParseError
from .experiments import ReturnConfig, compare_learning, compute_return, evaluate_intelligence, rollout
from .oua import OuaHyper, build_learning_system
from .sde import NoiseStream, SolverConfig, SolverMethod, SystemDynamics, couple, integrate

__version__ = "0.1.0"
