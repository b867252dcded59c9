"""Stochastic continuous-time recurrent neural network agent.

Inference dynamics::

    d alpha = tau^-1 o (-alpha + A sigmoid(alpha + b) + B y) dt + kappa dW

with control read out as ``u = tanh(C alpha)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._validation import as_matrix, as_vector, check_int, check_positive
from .exceptions import DimensionMismatch
from .sde import SystemDynamics

__all__ = [
    "TAU_MIN",
    "CtrnnParams",
    "ctrnn_drift",
    "ctrnn_diffusion",
    "readout",
    "init_params",
    "flatten_params",
    "unflatten_params",
    "n_params",
    "ctrnn_system",
]

#: lower bound applied to time constants decoded from a learned parameter vector
TAU_MIN = 0.05


@dataclass(frozen=True, eq=False)
class CtrnnParams:
    tau: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    kappa: float = 0.01

    def __post_init__(self):
        tau = as_vector(self.tau, name="tau")
        k = tau.shape[0]
        if np.any(tau <= 0):
            raise ValueError("every time constant must be > 0")
        b = as_vector(self.b, k, "b")
        A = as_matrix(self.A, (k, k), "A")
        B = np.asarray(self.B, dtype=np.float64)
        C = np.asarray(self.C, dtype=np.float64)
        if B.ndim != 2 or B.shape[0] != k:
            raise DimensionMismatch(f"B must have shape ({k}, m), got {B.shape}")
        if C.ndim != 2 or C.shape[1] != k:
            raise DimensionMismatch(f"C must have shape (c, {k}), got {C.shape}")
        check_positive(self.kappa, "kappa", strict=False)
        for name, val in zip("tau b A B C".split(), (tau, b, A, B, C)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def k(self):
        return self.tau.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def c(self):
        return self.C.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CtrnnParams):
            return NotImplemented
        return (self.kappa == other.kappa and self.A.shape == other.A.shape
                and self.B.shape == other.B.shape and self.C.shape == other.C.shape
                and np.array_equal(flatten_params(self), flatten_params(other)))

    def __repr__(self):
        return f"CtrnnParams(k={self.k}, m={self.m}, c={self.c}, kappa={self.kappa})"


def n_params(k, m, c):
    """Length of the flattened parameter vector: ``2k + k^2 + k*m + c*k``."""
    return k + k + k * k + k * m + c * k


def ctrnn_drift(alpha, y, p):
    return _drift(alpha, y, p.tau, p.b, p.A, p.B)


def _drift(alpha, y, tau, b, A, B):
    return (-alpha + A @ expit(alpha + b) + B @ y) / tau


def ctrnn_diffusion(p):
    return p.kappa * np.eye(p.k)


def readout(alpha, p):
    return np.tanh(p.C @ alpha)


def init_params(k=2, m=2, c=1, kappa=0.01):
    """Time constants one, everything else zero. The paired initial state is ``zeros(k)``."""
    k, m, c = (check_int(v, n, 1) for v, n in ((k, "k"), (m, "m"), (c, "c")))
    return CtrnnParams(np.ones(k), np.zeros(k), np.zeros((k, k)), np.zeros((k, m)),
                       np.zeros((c, k)), kappa)


def flatten_params(p):
    """Concatenate ``tau, b, A, B, C`` (matrices row-major)."""
    return np.concatenate([p.tau, p.b, p.A.ravel(), p.B.ravel(), p.C.ravel()])


def unflatten_params(v, k, m, c, kappa=0.01, tau_min=None):
    """Inverse of :func:`flatten_params`.

    With ``tau_min`` set, time constants are clamped to ``max(tau, tau_min)``
    so that a vector explored by noise always decodes to a valid network.
    """
    v = np.asarray(v, dtype=np.float64)
    n = n_params(k, m, c)
    if v.shape != (n,):
        raise DimensionMismatch(f"expected {n} parameters for k={k}, m={m}, c={c}, got {v.shape}")
    i = 0
    parts = []
    for size, shape in ((k, (k,)), (k, (k,)), (k * k, (k, k)), (k * m, (k, m)), (c * k, (c, k))):
        parts.append(v[i:i + size].reshape(shape))
        i += size
    if tau_min is not None:
        parts[0] = np.maximum(parts[0], tau_min)
    return CtrnnParams(*parts, kappa=kappa)


def ctrnn_system(p):
    """Open system over ``alpha`` driven by observations."""
    g = ctrnn_diffusion(p)
    return SystemDynamics(p.k, p.k, lambda a, y: ctrnn_drift(a, y, p), lambda a: g,
                          dim_input=p.m, additive=True, name="ctrnn")
