"""Rollouts, returns and agent comparisons.

The return of a rollout is the left-rectangle quadrature of the
(optionally exponentially discounted) reward on the solver grid.
"""

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_positive
from .ctrnn import CtrnnParams, ctrnn_system, readout
from .environments import EnvironmentDistribution, StochasticDoubleIntegrator
from .exceptions import NonFiniteState
from .oua import OuaHyper, build_learning_system
from .sde import NoiseStream, SolverConfig, couple, derive_stream_id, integrate

__all__ = [
    "ReturnConfig",
    "RolloutRecord",
    "compute_return",
    "rollout",
    "rollout_solver",
    "LearningRun",
    "ComparisonReport",
    "run_learning",
    "compare_learning",
    "evaluate_intelligence",
    "map_ordered",
]


@dataclass(frozen=True)
class ReturnConfig:
    """Objective settings.

    ``discount_rate`` is the exponential discount of future reward and is
    unrelated to the OUA reversion rate.
    """

    discount_rate: float = 0.0
    horizon: float = 1000.0

    def __post_init__(self):
        check_positive(self.discount_rate, "discount_rate", strict=False)
        check_positive(self.horizon, "horizon")


@dataclass
class RolloutRecord:
    trajectory: object
    controls: np.ndarray
    rewards: np.ndarray
    return_: float
    seed_key: tuple = None
    diverged: bool = False
    meta: dict = field(default_factory=dict)


def compute_return(rewards, times, rc=ReturnConfig()):
    """Left-rectangle quadrature ``sum_i exp(-lambda t_i) r_i dt`` over ``[0, T)``.

    ``times`` must be uniformly spaced. The last sample only closes the
    final interval and does not contribute.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if rewards.shape != times.shape:
        raise ValueError("rewards and times must have equal lengths")
    if len(times) < 2:
        return 0.0
    dt = times[1] - times[0]
    n = min(len(times) - 1, int(math.floor(rc.horizon / dt * (1 + 1e-12))))
    r = rewards[:n]
    if rc.discount_rate:
        r = np.exp(-rc.discount_rate * times[:n]) * r
    return float(np.sum(r) * dt)


def rollout_solver(sim, rc):
    """Solver settings for a rollout over the return horizon."""
    return dataclasses.replace(sim, t_end=rc.horizon)


def rollout(joint, x0, sim, rc, reward_tap, seed_key, penalty=None):
    """Integrate ``joint`` and score it.

    Parameters
    ----------
    joint : SystemDynamics
        Closed agent-environment system.
    reward_tap : callable
        ``reward_tap(x) -> (u, r)`` evaluated at every recorded state.
    penalty : float, optional
        When given, a blow-up yields a record with ``return_ = penalty``
        and ``diverged = True`` instead of raising.
    """
    cfg = rollout_solver(sim, rc)
    noise = NoiseStream(seed_key, joint.dim_noise) if joint.dim_noise else None
    try:
        traj = integrate(joint, x0, cfg, noise)
    except NonFiniteState as exc:
        if penalty is None:
            raise
        partial = exc.trajectory
        return RolloutRecord(partial, np.empty((0,)), np.empty((0,)), float(penalty),
                             tuple(seed_key), diverged=True, meta={"failed_step": exc.step})
    controls, rewards = _tap_all(traj.states, reward_tap)
    ret = compute_return(rewards, traj.times, rc)
    diverged = not math.isfinite(ret)
    if diverged and penalty is not None:
        ret = float(penalty)
    return RolloutRecord(traj, controls, rewards, ret, tuple(seed_key), diverged)


def _tap_all(states, reward_tap):
    controls, rewards = [], []
    with np.errstate(all="ignore"):
        for x in states:
            u, r = reward_tap(x)
            controls.append(np.atleast_1d(u))
            rewards.append(r)
    return np.array(controls), np.array(rewards, dtype=np.float64)


def map_ordered(fn, items, threads=1):
    """Map in input order; results never depend on completion order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# online learning


@dataclass
class LearningRun:
    """One integration of the learning system (either arm)."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    rewards: np.ndarray
    deltas: np.ndarray
    return_: float
    layout: object
    diverged: bool = False
    failed_time: float = None
    tau_clamped: bool = False

    @property
    def cumulative_return(self):
        if len(self.rewards) < 2:
            return np.zeros(len(self.rewards))
        dt = self.times[1] - self.times[0]
        return np.concatenate([[0.0], np.cumsum(self.rewards[:-1]) * dt])

    def final_abs_position(self, fraction=0.2):
        n = len(self.times)
        if self.diverged:
            return math.inf
        start = int(math.floor(n * (1 - fraction)))
        return float(np.mean(np.abs(self.states[start:, self.layout.s][:, 0])))


def run_learning(env, h, sim, rc, seed_key, k=2, kappa=0.01, freeze_tau=False,
                 on_nonfinite="raise"):
    """Integrate the CTRNN + OUA learning system once.

    With ``on_nonfinite="record"`` a blow-up returns a run marked
    ``diverged`` with return ``-inf`` and the states recorded so far.
    """
    system, lay, tap = build_learning_system(env, h, k=k, kappa=kappa, freeze_tau=freeze_tau)
    cfg = rollout_solver(sim, rc)
    x0 = lay.initial_state(env.initial_state)
    try:
        traj = integrate(system, x0, cfg, NoiseStream(seed_key, system.dim_noise))
        diverged, failed = False, None
    except NonFiniteState as exc:
        if on_nonfinite == "raise":
            raise
        traj, diverged, failed = exc.trajectory, True, exc.time
    with np.errstate(all="ignore"):
        taps = [tap(x) for x in traj.states]
    controls = np.array([np.atleast_1d(t[0]) for t in taps]).reshape(len(taps), -1)
    rewards = np.array([t[1] for t in taps], dtype=np.float64)
    deltas = np.array([t[2] for t in taps], dtype=np.float64)
    ret = -math.inf if diverged else compute_return(rewards, traj.times, rc)
    return LearningRun(traj.times, traj.states, controls, rewards, deltas, ret, lay, diverged,
                       failed, lay.tau_clamped(traj.states))


@dataclass
class ComparisonReport:
    seeds: list
    learning: list  # LearningRun per seed
    baseline: list

    def rows(self):
        out = []
        for i, (a, b) in enumerate(zip(self.learning, self.baseline)):
            out.append({
                "seed_index": i,
                "seed_key": list(self.seeds[i]),
                "return_learning": a.return_,
                "return_baseline": b.return_,
                "final_abs_s1_learning": a.final_abs_position(),
                "final_abs_s1_baseline": b.final_abs_position(),
                "learning_diverged": a.diverged,
                "baseline_diverged": b.diverged,
                "tau_clamped": a.tau_clamped,
            })
        return out

    @property
    def wins(self):
        return sum(a.return_ > b.return_ for a, b in zip(self.learning, self.baseline))

    def summary(self):
        rows = self.rows()
        return {
            "n_seeds": len(rows),
            "learning_wins": self.wins,
            "learning_diverged": sum(r["learning_diverged"] for r in rows),
            "median_return_learning": _median([r["return_learning"] for r in rows]),
            "median_return_baseline": _median([r["return_baseline"] for r in rows]),
            "median_final_abs_s1_learning": _median([r["final_abs_s1_learning"] for r in rows]),
            "median_final_abs_s1_baseline": _median([r["final_abs_s1_baseline"] for r in rows]),
            "tau_clamp_active": any(r["tau_clamped"] for r in rows),
        }


def _median(values):
    return float(np.median(np.asarray(values, dtype=np.float64)))


def compare_learning(env, seeds, h=OuaHyper(), sim=SolverConfig(), rc=ReturnConfig(), k=2,
                     kappa=0.01, freeze_tau=False, threads=1, on_nonfinite="record"):
    """Paired runs with and without OUA on identical noise streams.

    The baseline arm uses the same system with ``eta = sigma = 0``, so it
    keeps the initial (zero-readout) network throughout.
    """
    seeds = [tuple(s) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed is required")
    h_off = h.disabled()
    jobs = [(s, arm) for s in seeds for arm in (h, h_off)]

    def work(job):
        seed, hyper = job
        return run_learning(env, hyper, sim, rc, seed, k, kappa, freeze_tau, on_nonfinite)

    runs = map_ordered(work, jobs, threads)
    return ComparisonReport(seeds, runs[0::2], runs[1::2])


# ---------------------------------------------------------------------------
# expected return over environments


def _ctrnn_rollout(p, env, sim, rc, seed_key):
    agent = ctrnn_system(p)
    joint = couple(agent, env.as_system(), env.observe, lambda a: readout(a, p))
    x0 = np.concatenate([np.zeros(p.k), env.initial_state])

    def tap(x):
        u = readout(x[: p.k], p)
        return u, env.reward(x[p.k:], u)

    return rollout(joint, x0, sim, rc, tap, seed_key).return_


def evaluate_intelligence(agent, distribution=EnvironmentDistribution(), n_env=10,
                          rollouts_per_env=4, master_seed=0, sim=SolverConfig(),
                          rc=ReturnConfig(horizon=50.0), penalty=-1e6, tanh_readout=False,
                          threads=1):
    """Monte-Carlo estimate of expected return over an environment distribution.

    ``agent`` is either a DGP :class:`~dynlab.dgp.Individual` or fixed
    :class:`~dynlab.ctrnn.CtrnnParams`. Environment ``i`` and its rollouts
    are keyed by ``master_seed``, so two agents evaluated with the same
    seed face identical environments and noise.

    Returns
    -------
    mean : float
    per_env : list of dict
    """
    from .dgp.fitness import evaluate_fitness

    check_int(n_env, "n_env", 1)
    check_int(rollouts_per_env, "rollouts_per_env", 1)
    per_env = []
    for i in range(n_env):
        rng = np.random.default_rng([master_seed % 2**64, derive_stream_id("env", i)])
        env = distribution.sample(rng)
        seeds = [(master_seed, derive_stream_id("intelligence", i, r)) for r in range(rollouts_per_env)]
        if isinstance(agent, CtrnnParams):
            rets = map_ordered(lambda s: _ctrnn_rollout(agent, env, sim, rc, s), seeds, threads)
            score = float(np.mean(rets))
        else:
            probe = agent.copy()
            score = evaluate_fitness(probe, env, seeds, sim, rc, penalty, tanh_readout)
        per_env.append({"env": env.to_dict(), "mean_return": score})
    return float(np.mean([e["mean_return"] for e in per_env])), per_env


def spec_hash(obj):
    """Short stable digest of a JSON-serialisable description."""
    text = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(text).hexdigest()[:16]
