"""Fitness of evolved agents: mean return over a fixed set of noisy rollouts.

An individual defines a drift-only agent ``dz_i = f_i(z, y) dt`` with
``z(0) = 0`` and control ``u = g(z)``. Rollouts against the stochastic
double integrator run in a compiled kernel; any other environment goes
through the generic :func:`individual_to_system` / :func:`rollout` route,
which also serves as the reference the kernel is tested against.
"""

import math

import numpy as np
from numba import njit

from ..environments import StochasticDoubleIntegrator
from ..experiments import ReturnConfig, map_ordered, rollout, rollout_solver
from ..sde import NoiseStream, SolverConfig, SolverMethod, SystemDynamics, couple, zero_diffusion
from .expr import compile_tree, eval_tree

__all__ = [
    "individual_to_system",
    "common_noise",
    "evaluate_fitness",
    "evaluate_population",
    "rollout_individual",
    "seed_set_key",
]


def individual_to_system(ind, env, tanh_readout=False):
    """Open agent system plus control map for an individual.

    Returns
    -------
    agent : SystemDynamics
        ``dz = f(z, y) dt`` without diffusion, input = observation.
    control : callable
        ``control(z) -> u`` (length ``env.dim_ctrl``).
    """
    k = ind.n_state
    trees = ind.state_trees

    def drift(z, y):
        return np.array([eval_tree(t, z, y) for t in trees], dtype=np.float64)

    def control(z):
        u = eval_tree(ind.readout_tree, z, ())
        if tanh_readout:
            u = np.tanh(u)
        return np.full(env.dim_ctrl, u, dtype=np.float64)

    agent = SystemDynamics(k, 0, drift, zero_diffusion(k), dim_input=env.dim_obs, additive=True,
                           name="dgp-agent")
    return agent, control


def rollout_individual(ind, env, sim, rc, seed_key, penalty=None, tanh_readout=False):
    """Generic rollout of an individual coupled to ``env`` (no compiled kernel)."""
    agent, control = individual_to_system(ind, env, tanh_readout)
    joint = couple(agent, env.as_system(), env.observe, control)
    k = ind.n_state
    x0 = np.concatenate([np.zeros(k), env.initial_state])

    def tap(x):
        u = control(x[:k])
        return u, env.reward(x[k:], u)

    return rollout(joint, x0, sim, rc, tap, seed_key, penalty=penalty)


def seed_set_key(seeds):
    return tuple(tuple(int(v) for v in s) for s in seeds)


def common_noise(seeds, dim_noise, sim, rc):
    """Brownian increments for each rollout seed, shape ``(R, n_steps, dim_noise)``.

    Identical to what :func:`~dynlab.sde.integrate` would draw for a system
    with ``dim_noise`` channels under each seed.
    """
    cfg = rollout_solver(sim, rc)
    return np.stack([NoiseStream(s, dim_noise).increments(cfg.n_steps, cfg.dt) for s in seeds])


# ---------------------------------------------------------------------------
# compiled SDI kernel


@njit(nogil=True, cache=True)
def _eval(codes, vals, start, stop, z, y, stack):
    sp = 0
    for i in range(start, stop):
        c = codes[i]
        if c == 0:
            stack[sp] = vals[i]
            sp += 1
        elif c == 1:
            stack[sp] = z[int(vals[i])]
            sp += 1
        elif c == 2:
            stack[sp] = y[int(vals[i])]
            sp += 1
        else:
            a = stack[sp - 1]
            b = stack[sp - 2]
            sp -= 1
            if c == 3:
                stack[sp - 1] = a + b
            elif c == 4:
                stack[sp - 1] = a - b
            else:
                stack[sp - 1] = a * b
    return stack[0]


@njit(nogil=True, cache=True)
def _drift(codes, vals, offs, k, z, s, gamma, tanh_out, stack, dz):
    for i in range(k):
        dz[i] = _eval(codes, vals, offs[i], offs[i + 1], z, s, stack)
    u = _eval(codes, vals, offs[k], offs[k + 1], z, s, stack)
    if tanh_out:
        u = math.tanh(u)
    return s[1], -gamma * s[1] + u, u


@njit(nogil=True, cache=True)
def _sdi_returns(codes, vals, offs, k, s0, gamma, eps, w_pos, w_ctrl, dt, heun, tanh_out,
                 discount, dW, penalty, out):
    n_roll, n_steps = dW.shape
    stack = np.empty(max(codes.shape[0], 1))
    z = np.empty(k)
    zp = np.empty(k)
    f0 = np.empty(k)
    f1 = np.empty(k)
    s = np.empty(2)
    sp = np.empty(2)
    for r in range(n_roll):
        z[:] = 0.0
        s[0] = s0[0]
        s[1] = s0[1]
        acc = 0.0
        ok = True
        for i in range(n_steps):
            g0, g1, u = _drift(codes, vals, offs, k, z, s, gamma, tanh_out, stack, f0)
            rew = -w_pos * s[0] ** 2 - w_ctrl * u**2
            if discount != 0.0:
                rew = math.exp(-discount * (i * dt)) * rew
            acc += rew
            nt = eps * dW[r, i]
            if heun:
                for j in range(k):
                    zp[j] = z[j] + f0[j] * dt + 0.0
                sp[0] = s[0] + g0 * dt + 0.0
                sp[1] = s[1] + g1 * dt + nt
                h0, h1, _ = _drift(codes, vals, offs, k, zp, sp, gamma, tanh_out, stack, f1)
                for j in range(k):
                    z[j] = z[j] + 0.5 * (f0[j] + f1[j]) * dt + 0.0
                s[0] = s[0] + 0.5 * (g0 + h0) * dt + 0.0
                s[1] = s[1] + 0.5 * (g1 + h1) * dt + nt
            else:
                for j in range(k):
                    z[j] = z[j] + f0[j] * dt + 0.0
                s[0] = s[0] + g0 * dt + 0.0
                s[1] = s[1] + g1 * dt + nt
            for j in range(k):
                if not math.isfinite(z[j]):
                    ok = False
            if not (math.isfinite(s[0]) and math.isfinite(s[1])):
                ok = False
            if not ok:
                break
        ret = acc * dt
        if not ok or not math.isfinite(ret):
            ret = penalty
        out[r] = ret


def _pack(ind):
    codes, vals, offs = [], [], [0]
    for t in ind.trees:
        c, v = compile_tree(t)
        codes.append(c)
        vals.append(v)
        offs.append(offs[-1] + len(c))
    return np.concatenate(codes), np.concatenate(vals), np.asarray(offs, dtype=np.int64)


def _kernel_returns(ind, env, dW, cfg, rc, penalty, tanh_readout):
    codes, vals, offs = _pack(ind)
    p, w = env.params, env.weights
    out = np.empty(dW.shape[0])
    _sdi_returns(codes, vals, offs, ind.n_state, np.asarray(p.s0, dtype=np.float64), p.gamma,
                 p.epsilon, w.w_pos, w.w_ctrl, cfg.dt, cfg.method == SolverMethod.HEUN,
                 tanh_readout, rc.discount_rate, np.ascontiguousarray(dW[:, :, 0]), penalty, out)
    return out


def evaluate_fitness(ind, env, seeds, sim=SolverConfig(), rc=ReturnConfig(horizon=50.0),
                     penalty=-1e6, tanh_readout=False, noise=None, use_kernel=True):
    """Mean return of ``ind`` over one rollout per seed; cached on the individual.

    A rollout that produces NaN/Inf contributes ``penalty``. ``noise`` may
    carry precomputed increments from :func:`common_noise` for the same seeds.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one evaluation seed is required")
    cfg = rollout_solver(sim, rc)
    if use_kernel and isinstance(env, StochasticDoubleIntegrator):
        if noise is None:
            noise = common_noise(seeds, env.dim_noise, sim, rc)
        returns = _kernel_returns(ind, env, noise, cfg, rc, float(penalty), tanh_readout)
    else:
        returns = [rollout_individual(ind, env, sim, rc, s, penalty, tanh_readout).return_
                   for s in seeds]
    fitness = float(np.mean(returns))
    ind.fitness = fitness
    ind.fitness_key = seed_set_key(seeds)
    return fitness


def evaluate_population(inds, env, seeds, sim, rc, penalty=-1e6, tanh_readout=False,
                        threads=1):
    """Evaluate every individual on the same seed set (common random numbers)."""
    noise = common_noise(seeds, env.dim_noise, sim, rc)
    return map_ordered(lambda ind: evaluate_fitness(ind, env, seeds, sim, rc, penalty,
                                                    tanh_readout, noise), inds, threads)
