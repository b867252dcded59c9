"""Environments an agent can be coupled to.

Only the stochastic double integrator (SDI) is provided: a particle with
position ``s1`` and velocity ``s2``, friction ``gamma``, control force
``u`` and additive velocity noise of scale ``epsilon``.
"""

import abc
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_vector, check_positive
from .sde import SystemDynamics

__all__ = [
    "SdiParams",
    "RewardWeights",
    "Environment",
    "StochasticDoubleIntegrator",
    "EnvironmentDistribution",
    "sdi_drift",
    "sdi_diffusion",
    "observe_full",
    "quadratic_reward",
]


@dataclass(frozen=True)
class SdiParams:
    gamma: float = 0.5
    epsilon: float = 0.1
    s0: tuple = (2.0, 0.0)

    def __post_init__(self):
        check_positive(self.gamma, "gamma", strict=False)
        check_positive(self.epsilon, "epsilon", strict=False)
        s0 = tuple(float(v) for v in as_vector(self.s0, 2, "s0"))
        object.__setattr__(self, "s0", s0)


@dataclass(frozen=True)
class RewardWeights:
    w_pos: float = 0.9
    w_ctrl: float = 0.1

    def __post_init__(self):
        check_positive(self.w_pos, "w_pos", strict=False)
        check_positive(self.w_ctrl, "w_ctrl", strict=False)


def sdi_drift(s, u, params=SdiParams()):
    """Deterministic part of the SDI: ``(s2, -gamma*s2 + u)``."""
    u = u[0] if np.ndim(u) else u
    return np.array([s[1], -params.gamma * s[1] + u])


def sdi_diffusion(s, params=SdiParams()):
    """Noise enters the velocity only: column ``(0, epsilon)``."""
    return np.array([[0.0], [params.epsilon]])


def observe_full(s):
    return np.array(s, dtype=np.float64, copy=True)


def quadratic_reward(s, u, weights=RewardWeights()):
    """``-w_pos*s1**2 - w_ctrl*u**2``; never positive."""
    u = u[0] if np.ndim(u) else u
    return -weights.w_pos * s[0] ** 2 - weights.w_ctrl * u**2


class Environment(abc.ABC):
    """State equation, observation map and reward of an environment."""

    dim_state: int
    dim_obs: int
    dim_ctrl: int
    dim_noise: int

    @abc.abstractmethod
    def drift(self, s, u): ...

    @abc.abstractmethod
    def diffusion(self, s): ...

    @abc.abstractmethod
    def observe(self, s): ...

    @abc.abstractmethod
    def reward(self, s, u): ...

    @property
    @abc.abstractmethod
    def initial_state(self): ...

    def as_system(self):
        """Open system driven by the control input."""
        return SystemDynamics(self.dim_state, self.dim_noise, self.drift, self.diffusion,
                              dim_input=self.dim_ctrl, additive=True, name=type(self).__name__)


@dataclass(frozen=True)
class StochasticDoubleIntegrator(Environment):
    params: SdiParams = field(default_factory=SdiParams)
    weights: RewardWeights = field(default_factory=RewardWeights)

    dim_state = 2
    dim_obs = 2
    dim_ctrl = 1
    dim_noise = 1

    def drift(self, s, u):
        return sdi_drift(s, u, self.params)

    def diffusion(self, s):
        return sdi_diffusion(s, self.params)

    def observe(self, s):
        return observe_full(s)

    def reward(self, s, u):
        return quadratic_reward(s, u, self.weights)

    @property
    def initial_state(self):
        return np.array(self.params.s0)

    def to_dict(self):
        return {"gamma": self.params.gamma, "epsilon": self.params.epsilon,
                "s0": list(self.params.s0), "w_pos": self.weights.w_pos,
                "w_ctrl": self.weights.w_ctrl}


@dataclass(frozen=True)
class EnvironmentDistribution:
    """Independent uniform distribution over SDI parameters and initial state.

    Setting ``low == high`` in a range puts all mass on one value.
    """

    gamma_range: tuple = (0.25, 1.0)
    epsilon_range: tuple = (0.05, 0.2)
    s0_range: tuple = (-2.0, 2.0)
    weights: RewardWeights = field(default_factory=RewardWeights)
    s0_fixed: tuple = None  # overrides s0_range when set

    def __post_init__(self):
        for name in ("gamma_range", "epsilon_range", "s0_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name}: high < low")
        if self.gamma_range[0] < 0 or self.epsilon_range[0] < 0:
            raise ValueError("gamma and epsilon must be non-negative")

    @classmethod
    def point_mass(cls, env):
        p = env.params
        return cls((p.gamma, p.gamma), (p.epsilon, p.epsilon), weights=env.weights, s0_fixed=p.s0)

    def sample(self, rng):
        gamma = rng.uniform(*self.gamma_range)
        epsilon = rng.uniform(*self.epsilon_range)
        if self.s0_fixed is not None:
            s0 = tuple(self.s0_fixed)
        else:
            s0 = tuple(rng.uniform(*self.s0_range, size=2))
        return StochasticDoubleIntegrator(SdiParams(gamma, epsilon, s0), self.weights)
