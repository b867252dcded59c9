"""Ornstein-Uhlenbeck adaptation (OUA).

Learning is carried by extra state variables integrated alongside the
agent and the environment:

* ``theta`` explores around ``mu`` as an OU process,
  ``d theta = lambda (mu - theta) dt + sigma dW``;
* ``mu`` follows perturbations that paid off,
  ``d mu = eta * delta * (theta - mu) dt``;
* ``nu`` low-pass filters the reward, ``d nu = rho (r - nu) dt``;

with reward-prediction error ``delta = r - nu``. Nothing is updated
outside the SDE: running the joint system forward *is* the learning.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._validation import check_positive
from .ctrnn import TAU_MIN, flatten_params, init_params, n_params, unflatten_params
from .exceptions import DimensionMismatch
from .sde import SystemDynamics

__all__ = [
    "OuaHyper",
    "OuaState",
    "LearningLayout",
    "rpe",
    "theta_dynamics",
    "mu_dynamics",
    "nu_dynamics",
    "build_learning_system",
    "ou_parameter_system",
]


@dataclass(frozen=True)
class OuaHyper:
    """Rates of the OUA dynamics.

    Zero is accepted for ``sigma`` and ``eta`` so that a non-learning
    control arm can run through the same code path.
    """

    lambda_: float = 2.0
    sigma: float = 0.1
    eta: float = 5.0
    rho: float = 2.0
    adapt_sigma: bool = False

    def __post_init__(self):
        check_positive(self.lambda_, "lambda_")
        check_positive(self.rho, "rho")
        check_positive(self.sigma, "sigma", strict=False)
        check_positive(self.eta, "eta", strict=False)
        if self.adapt_sigma:
            raise NotImplementedError("adaptation of the exploration noise is not supported")

    def disabled(self):
        """Copy with exploration and mean adaptation switched off."""
        return OuaHyper(self.lambda_, 0.0, 0.0, self.rho)


@dataclass
class OuaState:
    theta: np.ndarray
    mu: np.ndarray
    nu: float = 0.0

    @classmethod
    def start(cls, theta0):
        """``mu0 = theta0`` and ``nu0 = 0``."""
        theta0 = np.asarray(theta0, dtype=np.float64)
        return cls(theta0.copy(), theta0.copy(), 0.0)


def rpe(r, nu):
    return r - nu


def theta_dynamics(theta, mu, h):
    """Return ``(drift, diffusion_diag)`` of the exploration process."""
    theta = np.asarray(theta)
    mu = np.asarray(mu)
    if theta.shape != mu.shape:
        raise DimensionMismatch("theta and mu must have the same length")
    return h.lambda_ * (mu - theta), np.full(theta.shape, h.sigma)


def mu_dynamics(theta, mu, delta, h):
    return h.eta * delta * (np.asarray(theta) - np.asarray(mu))


def nu_dynamics(r, nu, h):
    return h.rho * (r - nu)


def ou_parameter_system(mu, h):
    """Exploration process alone with the means frozen at ``mu``.

    This is the parameter block of the learning system with ``eta = 0``;
    it is exposed separately so its statistics can be sampled cheaply.
    """
    mu = np.array(mu, dtype=np.float64)
    g = np.full(mu.shape[0], h.sigma)
    lam = h.lambda_
    return SystemDynamics(mu.shape[0], mu.shape[0], lambda th: lam * (mu - th), lambda th: g,
                          additive=True, diagonal=True, name="ou-parameters")


@dataclass(frozen=True)
class LearningLayout:
    """Index bookkeeping for the joint state ``x = (s, alpha, theta, mu, nu)``."""

    dim_env: int
    k: int
    m: int
    c: int
    n_env_noise: int

    @property
    def n_theta(self):
        return n_params(self.k, self.m, self.c)

    @property
    def s(self):
        return slice(0, self.dim_env)

    @property
    def alpha(self):
        return slice(self.dim_env, self.dim_env + self.k)

    @property
    def theta(self):
        start = self.dim_env + self.k
        return slice(start, start + self.n_theta)

    @property
    def mu(self):
        start = self.dim_env + self.k + self.n_theta
        return slice(start, start + self.n_theta)

    @property
    def nu(self):
        return self.dim_env + self.k + 2 * self.n_theta

    @property
    def dim(self):
        return self.nu + 1

    @property
    def dim_noise(self):
        return self.n_env_noise + self.k + self.n_theta

    def initial_state(self, s0, theta0=None):
        if theta0 is None:
            theta0 = flatten_params(init_params(self.k, self.m, self.c))
        x = np.zeros(self.dim)
        x[self.s] = s0
        x[self.theta] = theta0
        x[self.mu] = theta0
        return x

    def params(self, x, kappa=0.01, which="theta"):
        """Decode the CTRNN parameters held in ``x`` (``which`` is theta or mu)."""
        v = x[self.theta] if which == "theta" else x[self.mu]
        return unflatten_params(v, self.k, self.m, self.c, kappa=kappa, tau_min=TAU_MIN)

    def tau_clamped(self, states):
        """True if any recorded time constant fell below the clamp."""
        tau = np.atleast_2d(states)[:, self.theta][:, : self.k]
        return bool(np.any(tau < TAU_MIN))


def build_learning_system(env, h=OuaHyper(), k=2, kappa=0.01, freeze_tau=False):
    """Joint SDE of environment, CTRNN agent and OUA learning variables.

    Parameters
    ----------
    env : Environment
    h : OuaHyper
    k : int
        Number of neurons. Observation and control sizes come from ``env``.
    kappa : float
        Neuronal noise scale.
    freeze_tau : bool
        Keep time constants out of the exploration noise.

    Returns
    -------
    system : SystemDynamics
        Closed system of dimension ``d_s + k + 2*n_theta + 1``. Noise
        channels are ordered environment, neurons, parameters.
    layout : LearningLayout
    tap : callable
        ``tap(x) -> (u, r, delta)`` evaluated at a joint state.
    """
    m, c = env.dim_obs, env.dim_ctrl
    lay = LearningLayout(env.dim_state, k, m, c, env.dim_noise)
    ds = env.dim_state
    n = lay.n_theta
    th, mu_sl, al, nu_i = lay.theta, lay.mu, lay.alpha, lay.nu
    # offsets into theta: tau, b, A, B, C
    o_b, o_A = k, 2 * k
    o_B = o_A + k * k
    o_C = o_B + k * m

    def unpack(theta):
        tau = np.maximum(theta[:k], TAU_MIN)
        return (tau, theta[o_b:o_A], theta[o_A:o_B].reshape(k, k),
                theta[o_B:o_C].reshape(k, m), theta[o_C:].reshape(c, k))

    def tap(x):
        s, alpha, theta = x[:ds], x[al], x[th]
        C = theta[o_C:].reshape(c, k)
        u = np.tanh(C @ alpha)
        r = env.reward(s, u)
        return u, r, r - x[nu_i]

    def drift(x):
        s, alpha, theta, mu, nu = x[:ds], x[al], x[th], x[mu_sl], x[nu_i]
        tau, b, A, B, C = unpack(theta)
        y = env.observe(s)
        u = np.tanh(C @ alpha)
        r = env.reward(s, u)
        delta = rpe(r, nu)
        out = np.empty(lay.dim)
        out[:ds] = env.drift(s, u)
        out[al] = (-alpha + A @ expit(alpha + b) + B @ y) / tau
        out[th] = h.lambda_ * (mu - theta)
        out[mu_sl] = mu_dynamics(theta, mu, delta, h)
        out[nu_i] = nu_dynamics(r, nu, h)
        return out

    g_theta = np.full(n, h.sigma)
    if freeze_tau:
        g_theta[:k] = 0.0
    additive = getattr(env, "additive_noise", True)
    g_const = np.zeros((lay.dim, lay.dim_noise))
    g_const[:ds, : env.dim_noise] = env.diffusion(np.zeros(ds))
    ne = env.dim_noise
    g_const[al, ne: ne + k] = kappa * np.eye(k)
    g_const[th, ne + k:] = np.diag(g_theta)
    g_const.setflags(write=False)

    if additive:
        def diffusion(x):
            return g_const
    else:
        def diffusion(x):
            g = g_const.copy()
            g[:ds, :ne] = env.diffusion(x[:ds])
            return g

    system = SystemDynamics(lay.dim, lay.dim_noise, drift, diffusion, additive=additive,
                            name="oua-learning")
    return system, lay, tap
