"""scikit-learn style front end for the two learners.

Both controllers are fitted against an environment rather than a data
matrix: ``fit(X=None)`` builds the stochastic double integrator from the
constructor parameters, or uses an :class:`~dynlab.environments.Environment`
passed as ``X``. Once fitted, an agent is a deterministic filter from an
observation sequence to internal states (``transform``) and controls
(``predict``).
"""

import dataclasses
import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .ctrnn import ctrnn_drift, readout
from .dgp import GpConfig, evaluate_fitness, eval_tree, run_dgp
from .environments import Environment, EnvironmentDistribution, RewardWeights, SdiParams, StochasticDoubleIntegrator
from .experiments import ReturnConfig, evaluate_intelligence, run_learning
from .oua import OuaHyper
from .sde import SolverConfig, derive_stream_id

__all__ = ["OuaController", "DgpController"]


class _AgentController(BaseEstimator):
    """Shared plumbing: environment construction and open-loop filtering."""

    def _environment(self, X):
        if isinstance(X, Environment):
            return X
        if X is not None:
            raise TypeError("fit expects None or an Environment instance")
        return StochasticDoubleIntegrator(SdiParams(self.gamma, self.epsilon, tuple(self.s0)),
                                          RewardWeights())

    def _solver(self):
        return SolverConfig(dt=self.dt, method=self.method)

    def _check_obs(self, Y):
        check_is_fitted(self, self._fitted_attr)
        Y = check_array(Y, ensure_min_samples=1)
        if Y.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} observation columns, got {Y.shape[1]}")
        return Y

    def _filter(self, Y):
        """Heun integration of the agent with observations held over each step."""
        dt = self.dt
        z = np.zeros(self._n_state())
        states = np.empty((len(Y), z.shape[0]))
        for i, y in enumerate(Y):
            states[i] = z
            if i + 1 == len(Y):
                break
            f0 = self._agent_drift(z, y)
            if self.method == "heun":
                z = z + 0.5 * (f0 + self._agent_drift(z + f0 * dt, y)) * dt
            else:
                z = z + f0 * dt
        return states

    def transform(self, Y):
        """Agent state after each observation row, shape ``(n_samples, n_state)``.

        Row ``i`` is the state at time ``i*dt``, before observation ``i`` acts.
        """
        return self._filter(self._check_obs(Y))

    def predict(self, Y):
        """Controls emitted along the observation sequence, shape ``(n_samples, n_ctrl)``."""
        Z = self.transform(Y)
        return np.array([self._control(z) for z in Z])


class OuaController(_AgentController):
    """CTRNN agent trained online by Ornstein-Uhlenbeck adaptation.

    Parameters
    ----------
    n_neurons : int
    lambda_, sigma, eta, rho : float
        OUA reversion rate, exploration noise, learning rate and reward
        filter rate.
    kappa : float
        Neuronal noise scale during learning.
    gamma, epsilon : float
        Friction and noise scale of the default environment.
    s0 : tuple
        Initial particle state of the default environment.
    horizon, dt : float
        Learning run length and solver step.
    method : {"heun", "euler_maruyama"}
    freeze_tau : bool
        Exclude time constants from exploration.
    score_horizon : float
        Rollout length used by :meth:`score`.
    n_score_rollouts : int
    random_state : int
        Master seed; learning and scoring use disjoint streams under it.

    Attributes
    ----------
    params_ : CtrnnParams
        Learned mean parameters at the end of the run.
    run_ : LearningRun
    diverged_ : bool
    """

    # ``lambda_`` is a hyper-parameter, so fittedness cannot be inferred from trailing underscores
    _fitted_attr = "params_"

    def __init__(self, n_neurons=2, lambda_=2.0, sigma=0.1, eta=5.0, rho=2.0, kappa=0.01,
                 gamma=0.5, epsilon=0.1, s0=(0.0, 0.0), horizon=1000.0, dt=0.1, method="heun",
                 freeze_tau=False, score_horizon=50.0, n_score_rollouts=4, random_state=0):
        self.n_neurons = n_neurons
        self.lambda_ = lambda_
        self.sigma = sigma
        self.eta = eta
        self.rho = rho
        self.kappa = kappa
        self.gamma = gamma
        self.epsilon = epsilon
        self.s0 = s0
        self.horizon = horizon
        self.dt = dt
        self.method = method
        self.freeze_tau = freeze_tau
        self.score_horizon = score_horizon
        self.n_score_rollouts = n_score_rollouts
        self.random_state = random_state

    def fit(self, X=None, y=None):
        env = self._environment(X)
        h = OuaHyper(self.lambda_, self.sigma, self.eta, self.rho)
        seed = (int(self.random_state), derive_stream_id("estimator", "learn"))
        run = run_learning(env, h, self._solver(), ReturnConfig(horizon=self.horizon), seed,
                           k=self.n_neurons, kappa=self.kappa, freeze_tau=self.freeze_tau,
                           on_nonfinite="record")
        if run.diverged:
            warnings.warn(f"learning run became non-finite at t={run.failed_time:.6g}; "
                          "keeping the last finite parameters", RuntimeWarning, stacklevel=2)
        self.run_ = run
        self.diverged_ = run.diverged
        self.env_ = env
        self.params_ = run.layout.params(run.states[-1], kappa=self.kappa, which="mu")
        self.return_ = run.return_
        self.n_features_in_ = env.dim_obs
        return self

    def _n_state(self):
        return self.params_.k

    def _agent_drift(self, z, y):
        return ctrnn_drift(z, y, self.params_)

    def _control(self, z):
        return readout(z, self.params_)

    def score(self, X=None, y=None):
        """Mean return of the learned network, frozen, over fresh rollouts."""
        check_is_fitted(self, self._fitted_attr)
        env = self._environment(X) if X is not None else self.env_
        mean, _ = evaluate_intelligence(
            dataclasses.replace(self.params_), EnvironmentDistribution.point_mass(env), n_env=1,
            rollouts_per_env=self.n_score_rollouts, master_seed=int(self.random_state) + 1,
            sim=self._solver(), rc=ReturnConfig(horizon=self.score_horizon))
        return mean


class DgpController(_AgentController):
    """Symbolic agent evolved by island-model differential genetic programming.

    Parameters mirror :class:`~dynlab.dgp.GpConfig` plus the environment,
    solver and evaluation settings. ``threads`` only affects scheduling.

    Attributes
    ----------
    best_ : Individual
        Best individual of the final generation.
    report_ : EvolutionReport
    """

    _fitted_attr = "best_"

    def __init__(self, n_islands=10, pop_size=100, n_generations=50, tournament_size=5,
                 p_crossover=0.7, elitism_count=1, migration_interval=10, migration_count=2,
                 rollouts_per_eval=4, n_state=2, tanh_readout=False, gamma=0.5, epsilon=0.1,
                 s0=(2.0, 0.0), horizon=50.0, dt=0.1, method="heun", n_score_seeds=20,
                 random_state=0, threads=1):
        self.n_islands = n_islands
        self.pop_size = pop_size
        self.n_generations = n_generations
        self.tournament_size = tournament_size
        self.p_crossover = p_crossover
        self.elitism_count = elitism_count
        self.migration_interval = migration_interval
        self.migration_count = migration_count
        self.rollouts_per_eval = rollouts_per_eval
        self.n_state = n_state
        self.tanh_readout = tanh_readout
        self.gamma = gamma
        self.epsilon = epsilon
        self.s0 = s0
        self.horizon = horizon
        self.dt = dt
        self.method = method
        self.n_score_seeds = n_score_seeds
        self.random_state = random_state
        self.threads = threads

    def gp_config(self):
        return GpConfig(n_islands=self.n_islands, pop_size=self.pop_size,
                        n_generations=self.n_generations, tournament_size=self.tournament_size,
                        p_crossover=self.p_crossover, elitism_count=self.elitism_count,
                        migration_interval=self.migration_interval,
                        migration_count=self.migration_count,
                        rollouts_per_eval=self.rollouts_per_eval, n_state=self.n_state,
                        tanh_readout=self.tanh_readout)

    def fit(self, X=None, y=None):
        env = self._environment(X)
        report = run_dgp(self.gp_config(), env, int(self.random_state), self._solver(),
                         ReturnConfig(horizon=self.horizon), threads=self.threads)
        self.report_ = report
        self.best_ = report.final_best
        self.env_ = env
        self.n_features_in_ = env.dim_obs
        return self

    def _n_state(self):
        return self.best_.n_state

    def _agent_drift(self, z, y):
        return np.array([eval_tree(t, z, y) for t in self.best_.state_trees])

    def _control(self, z):
        u = eval_tree(self.best_.readout_tree, z, ())
        return np.atleast_1d(np.tanh(u) if self.tanh_readout else u)

    def score(self, X=None, y=None):
        """Mean return of the best individual on seeds not used during evolution."""
        check_is_fitted(self, self._fitted_attr)
        env = self._environment(X) if X is not None else self.env_
        seeds = [(int(self.random_state), derive_stream_id("estimator", "score", i))
                 for i in range(self.n_score_seeds)]
        return evaluate_fitness(self.best_.copy(), env, seeds, self._solver(),
                                ReturnConfig(horizon=self.horizon), tanh_readout=self.tanh_readout)
