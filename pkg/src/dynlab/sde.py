"""Fixed-step integration of Ito SDEs ``dx = f(x) dt + G(x) dW``.

Systems are plain value objects holding a drift and a diffusion callable.
A system may be *open*, taking an external input (an observation for an
agent, a control for an environment); :func:`couple` closes two open
systems into one joint system that :func:`integrate` can run.
"""

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._validation import as_vector, check_int, check_positive
from .exceptions import DimensionMismatch, NonFiniteState

__all__ = [
    "SystemDynamics",
    "NoiseStream",
    "SolverMethod",
    "SolverConfig",
    "Trajectory",
    "derive_stream_id",
    "step_euler_maruyama",
    "step_heun",
    "integrate",
    "couple",
]


@dataclass(frozen=True)
class SystemDynamics:
    """Drift/diffusion pair over a flat state vector.

    Parameters
    ----------
    dim_state : int
        State dimension ``d``.
    dim_noise : int
        Number of independent Brownian channels ``n``.
    drift : callable
        ``drift(x)`` for closed systems or ``drift(x, inp)`` when
        ``dim_input > 0``; returns an array of length ``d``.
    diffusion : callable
        ``diffusion(x)`` returning a ``(d, n)`` array.
    dim_input : int
        Length of the external input of an open system, 0 when closed.
    additive : bool
        Declares that ``diffusion`` does not depend on ``x``. The solver
        then evaluates it once per integration.
    diagonal : bool
        Square diagonal noise: ``diffusion(x)`` returns the diagonal as a
        vector of length ``d`` instead of the full matrix.
    """

    dim_state: int
    dim_noise: int
    drift: Callable
    diffusion: Callable
    dim_input: int = 0
    additive: bool = False
    name: str = ""
    diagonal: bool = False

    def __post_init__(self):
        check_int(self.dim_state, "dim_state", 1)
        check_int(self.dim_noise, "dim_noise", 0)
        check_int(self.dim_input, "dim_input", 0)
        if self.diagonal and self.dim_noise != self.dim_state:
            raise DimensionMismatch("diagonal noise needs dim_noise == dim_state")

    @property
    def is_closed(self):
        return self.dim_input == 0

    def diffusion_matrix(self, x):
        """Full ``(d, n)`` diffusion matrix at ``x``."""
        g = np.asarray(self.diffusion(x), dtype=np.float64)
        return np.diag(g) if self.diagonal else g.reshape(self.dim_state, self.dim_noise)

    def noise_term(self, x, dW):
        """``G(x) dW`` without forming a dense matrix for diagonal noise."""
        g = self.diffusion(x)
        return g * dW if self.diagonal else g @ dW


def zero_diffusion(dim_state, dim_noise=0):
    g = np.zeros((dim_state, dim_noise))
    g.setflags(write=False)
    return lambda x: g


def derive_stream_id(*parts):
    """Hash an arbitrary path of ints/strings to a 64-bit stream id.

    Used to key noise streams hierarchically, e.g.
    ``derive_stream_id("eval", generation, rollout)``.
    """
    text = "/".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


class NoiseStream:
    """Reproducible source of Brownian increments.

    Two streams with the same ``seed_key`` produce the same increments. A
    stream is stateful and must have a single owner; never share one
    between concurrent integrations.
    """

    def __init__(self, seed_key, dim):
        master, stream = seed_key
        self.seed_key = (int(master), int(stream))
        self.dim = check_int(dim, "dim", 0)
        entropy = [self.seed_key[0] % 2**64, self.seed_key[1] % 2**64]
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def increments(self, n_steps, dt):
        """Draw ``n_steps`` increments, shape ``(n_steps, dim)``, each ~ N(0, dt)."""
        z = self._rng.standard_normal((n_steps, self.dim))
        return z * math.sqrt(dt)

    def __repr__(self):
        return f"NoiseStream(seed_key={self.seed_key}, dim={self.dim})"


class SolverMethod(str, enum.Enum):
    EULER_MARUYAMA = "euler_maruyama"
    HEUN = "heun"


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-step solver settings; defaults follow the controlled-particle setup."""

    t_end: float = 10.0
    dt: float = 0.1
    method: SolverMethod = SolverMethod.HEUN
    record_stride: int = 1

    def __post_init__(self):
        check_positive(self.dt, "dt")
        check_positive(self.t_end, "t_end")
        check_int(self.record_stride, "record_stride", 1)
        object.__setattr__(self, "method", SolverMethod(self.method))
        if self.t_end < self.dt * (1 - 1e-12):
            raise ValueError(f"t_end ({self.t_end}) must be >= dt ({self.dt})")

    @property
    def n_steps(self):
        # the relative slack absorbs representation error in t_end/dt (1000/0.1 etc.)
        return int(math.floor(self.t_end / self.dt * (1 + 1e-12)))

    @property
    def record_dt(self):
        return self.dt * self.record_stride


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_records, d)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def to_csv(self, path, prefix="x"):
        write_csv(path, ["t"] + [f"{prefix}{i}" for i in range(self.states.shape[1])],
                  np.column_stack([self.times, self.states]))


def write_csv(path, header, rows):
    """Write a float table with 17 significant digits (lossless for float64)."""
    np.savetxt(path, np.asarray(rows, dtype=np.float64), delimiter=",", fmt="%.17g",
               header=",".join(header), comments="")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _check_step_args(system, x, dt, dW):
    if not system.is_closed:
        raise DimensionMismatch("cannot step an open system; couple it first")
    x = as_vector(x, system.dim_state, "x")
    dW = as_vector(dW, system.dim_noise, "dW") if system.dim_noise else np.zeros(0)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    check_positive(dt, "dt")
    return x, dW


def _em(system, x, dt, noise_term):
    return x + system.drift(x) * dt + noise_term


def _heun(system, x, dt, noise_term):
    f0 = system.drift(x)
    x_pred = x + f0 * dt + noise_term
    return x + 0.5 * (f0 + system.drift(x_pred)) * dt + noise_term


def step_euler_maruyama(system, x, dt, dW):
    """One Euler-Maruyama step: ``x + f(x) dt + G(x) dW``."""
    x, dW = _check_step_args(system, x, dt, dW)
    with np.errstate(all="ignore"):
        out = _em(system, x, dt, system.noise_term(x, dW))
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(1, dt)
    return out


def step_heun(system, x, dt, dW):
    """One drift-Heun step with Euler treatment of the noise.

    The predictor is an Euler-Maruyama step; the corrector averages the
    drift at both ends and reuses ``G(x) dW``. Second order for ODEs,
    strong order 1 for additive noise.
    """
    x, dW = _check_step_args(system, x, dt, dW)
    with np.errstate(all="ignore"):
        out = _heun(system, x, dt, system.noise_term(x, dW))
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(1, dt)
    return out


_STEPPERS = {SolverMethod.EULER_MARUYAMA: _em, SolverMethod.HEUN: _heun}


def integrate(system, x0, config, noise=None):
    """Integrate a closed system from ``x0`` over ``[0, config.t_end]``.

    Parameters
    ----------
    system : SystemDynamics
    x0 : array_like, shape (d,)
    config : SolverConfig
    noise : NoiseStream, optional
        Required when ``system.dim_noise > 0``. Its dimension must match.

    Returns
    -------
    Trajectory
        ``floor(t_end/dt) // record_stride + 1`` records, the first being ``x0``.

    Raises
    ------
    NonFiniteState
        At the first step whose result contains NaN or Inf.
    """
    if not system.is_closed:
        raise DimensionMismatch("cannot integrate an open system; couple it first")
    x = as_vector(x0, system.dim_state, "x0").copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    n_steps, dt, stride = config.n_steps, config.dt, config.record_stride
    if system.dim_noise:
        if noise is None:
            raise ValueError("a NoiseStream is required for a stochastic system")
        if noise.dim != system.dim_noise:
            raise DimensionMismatch(f"noise dim {noise.dim} != system dim_noise {system.dim_noise}")
        dW = noise.increments(n_steps, dt)
    else:
        dW = np.zeros((n_steps, 0))

    step = _STEPPERS[config.method]
    n_rec = n_steps // stride + 1
    states = np.empty((n_rec, system.dim_state))
    states[0] = x
    if system.additive and system.dim_noise:
        g = np.asarray(system.diffusion(x), dtype=np.float64)
        noise_terms = dW * g if system.diagonal else dW @ g.T
    else:
        noise_terms = None

    rec = 1
    with np.errstate(all="ignore"):
        for i in range(n_steps):
            if noise_terms is not None:
                nt = noise_terms[i]
            elif system.dim_noise:
                nt = system.noise_term(x, dW[i])
            else:
                nt = 0.0
            x = step(system, x, dt, nt)
            if not np.isfinite(x).all():
                exc = NonFiniteState(i + 1, (i + 1) * dt)
                exc.trajectory = Trajectory(np.arange(rec) * (dt * stride), states[:rec].copy())
                raise exc
            if (i + 1) % stride == 0:
                states[rec] = x
                rec += 1
    times = np.arange(n_rec) * (dt * stride)
    return Trajectory(times, states, meta={"seed_key": getattr(noise, "seed_key", None)})


def _block_diag(a, b):
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


def couple(agent, env, observe, control):
    """Close an agent/environment pair into one system over ``x = (z, s)``.

    ``agent`` is driven by observations ``y = observe(s)`` and ``env`` by
    controls ``u = control(z)``, both evaluated at the same instantaneous
    state. Noise channels are stacked agent-first.
    """
    da, ds = agent.dim_state, env.dim_state
    y0 = np.atleast_1d(observe(np.zeros(ds)))
    u0 = np.atleast_1d(control(np.zeros(da)))
    if y0.shape != (agent.dim_input,):
        raise DimensionMismatch(f"observe returns {y0.shape[0]} values, agent expects {agent.dim_input}")
    if u0.shape != (env.dim_input,):
        raise DimensionMismatch(f"control returns {u0.shape[0]} values, env expects {env.dim_input}")

    def drift(x):
        z, s = x[:da], x[da:]
        return np.concatenate([agent.drift(z, observe(s)), env.drift(s, control(z))])

    def diffusion(x):
        return _block_diag(agent.diffusion_matrix(x[:da]), env.diffusion_matrix(x[da:]))

    return SystemDynamics(da + ds, agent.dim_noise + env.dim_noise, drift, diffusion,
                          additive=agent.additive and env.additive,
                          name=f"{agent.name or 'agent'}+{env.name or 'env'}")
