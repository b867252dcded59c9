"""Island-model evolution of multitree agents."""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .._validation import check_int, check_positive, check_probability
from ..experiments import ReturnConfig
from ..sde import SolverConfig, derive_stream_id
from .expr import serialize_individual
from .fitness import evaluate_population
from .operators import TreeSpec, crossover, mutate, random_tree

__all__ = [
    "GpConfig",
    "IslandRates",
    "EvolutionReport",
    "island_rates",
    "init_population",
    "tournament",
    "select_elites",
    "evolve_generation",
    "migrate",
    "run_dgp",
    "generation_seeds",
]


@dataclass(frozen=True)
class GpConfig:
    n_islands: int = 10
    pop_size: int = 100
    n_generations: int = 50
    tournament_size: int = 5
    p_crossover: float = 0.7
    p_mutate_subtree: float = 0.15
    p_mutate_point: float = 0.1
    p_mutate_const: float = 0.05
    const_jitter_std: float = 0.5
    elitism_count: int = 1
    migration_interval: int = 10
    migration_count: int = 2
    const_init_range: tuple = (-5.0, 5.0)
    max_depth: int = 8
    max_nodes: int = 64
    init_max_depth: int = 4
    mutation_subtree_depth: int = 3
    rollouts_per_eval: int = 4
    penalty_fitness: float = -1e6
    n_state: int = 2
    tanh_readout: bool = False

    def __post_init__(self):
        for name in ("n_islands", "pop_size", "tournament_size", "max_depth", "max_nodes",
                     "init_max_depth", "mutation_subtree_depth", "rollouts_per_eval",
                     "migration_interval", "n_state"):
            check_int(getattr(self, name), name, 1)
        for name in ("n_generations", "elitism_count", "migration_count"):
            check_int(getattr(self, name), name, 0)
        for name in ("p_crossover", "p_mutate_subtree", "p_mutate_point", "p_mutate_const"):
            check_probability(getattr(self, name), name)
        check_positive(self.const_jitter_std, "const_jitter_std", strict=False)
        if self.tournament_size > self.pop_size:
            raise ValueError("tournament_size cannot exceed pop_size")
        if self.elitism_count > self.pop_size:
            raise ValueError("elitism_count cannot exceed pop_size")
        if self.migration_count > self.pop_size:
            raise ValueError("migration_count cannot exceed pop_size")
        lo, hi = self.const_init_range
        if hi < lo:
            raise ValueError("const_init_range: high < low")
        object.__setattr__(self, "const_init_range", (float(lo), float(hi)))

    def specs(self, n_obs):
        return ([TreeSpec.for_slot(self, self.n_state, n_obs, readout=False)] * self.n_state
                + [TreeSpec.for_slot(self, self.n_state, n_obs, readout=True)])


@dataclass(frozen=True)
class IslandRates:
    p_crossover: float
    p_subtree: float
    p_point: float
    p_const: float


def island_rates(config, island):
    """Operator rates of one island: base rates times ``0.5 + i/(n-1)``, capped at 1."""
    n = config.n_islands
    scale = 1.0 if n == 1 else 0.5 + island / (n - 1)
    cap = lambda p: min(1.0, p * scale)
    return IslandRates(cap(config.p_crossover), cap(config.p_mutate_subtree),
                       cap(config.p_mutate_point), cap(config.p_mutate_const))


def generation_seeds(master_seed, generation, n):
    """Evaluation seed keys shared by every individual of a generation."""
    return [(master_seed, derive_stream_id("eval", generation, r)) for r in range(n)]


def _rng(master_seed, *path):
    return np.random.default_rng([master_seed % 2**64, derive_stream_id(*path)])


def _rank_key(ind):
    return (-ind.fitness, ind.size, ind.id)


def init_population(config, specs, rng, island=0):
    """Ramped half-and-half: depths cycle through ``2..init_max_depth``, methods alternate."""
    from .expr import Individual

    depths = list(range(2, config.init_max_depth + 1)) or [1]
    pop = []
    for j in range(config.pop_size):
        depth = depths[(j // 2) % len(depths)]
        method = "full" if j % 2 == 0 else "grow"
        trees = [random_tree(rng, s, depth, method) for s in specs]
        pop.append(Individual(tuple(trees[:-1]), trees[-1], id=(0, island, j)))
    return pop


def tournament(pop, rng, size):
    """Best of ``size`` distinct individuals drawn uniformly."""
    idx = rng.choice(len(pop), size=size, replace=False)
    return min((pop[i] for i in idx), key=_rank_key)


def select_elites(pop, count):
    return sorted(pop, key=_rank_key)[:count]


def breed(pop, config, specs, rates, rng, generation, island):
    """Elites plus unevaluated offspring for the next generation."""
    elites = [e.copy() for e in select_elites(pop, config.elitism_count)]
    children = []
    n_needed = config.pop_size - len(elites)
    while len(children) < n_needed:
        a = tournament(pop, rng, config.tournament_size)
        b = tournament(pop, rng, config.tournament_size)
        if rng.random() < rates.p_crossover:
            pair = crossover(a, b, rng, specs)
        else:
            pair = (a.with_trees(a.trees), b.with_trees(b.trees))
        for child in pair:
            if len(children) == n_needed:
                break
            child = mutate(child, rng, specs, rates.p_subtree, rates.p_point, rates.p_const,
                           config.const_jitter_std, config.mutation_subtree_depth)
            child = child.with_trees(child.trees, id=(generation, island, len(elites) + len(children)))
            children.append(child)
    return elites, children


def evolve_generation(pop, config, env, seeds, rng, specs=None, rates=None, sim=SolverConfig(),
                      rc=ReturnConfig(horizon=50.0), generation=1, island=0, threads=1):
    """Produce the next population of one island.

    Elites keep their cached fitness; every other member is evaluated on
    ``seeds``.
    """
    specs = specs or config.specs(env.dim_obs)
    rates = rates or island_rates(config, island)
    elites, children = breed(pop, config, specs, rates, rng, generation, island)
    evaluate_population(children, env, seeds, sim, rc, config.penalty_fitness,
                        config.tanh_readout, threads)
    return elites + children


def migrate(islands, config, rng=None):
    """Ring migration: each island's best replace the next island's worst.

    Emigrants are chosen before any replacement happens, so the result
    does not depend on the order islands are visited. ``rng`` is accepted
    for interface symmetry; the scheme is deterministic.
    """
    n = len(islands)
    m = config.migration_count
    if n < 2 or m == 0:
        return [list(p) for p in islands]
    emigrants = [[ind.copy() for ind in select_elites(p, m)] for p in islands]
    out = []
    for i, pop in enumerate(islands):
        incoming = emigrants[(i - 1) % n]
        keep = sorted(pop, key=_rank_key)[: len(pop) - m]
        out.append(keep + incoming)
    return out


@dataclass
class EvolutionReport:
    config: GpConfig
    master_seed: int
    records: list = field(default_factory=list)  # dicts: generation, island, best, mean
    best_per_generation: list = field(default_factory=list)
    islands: list = field(default_factory=list)

    @property
    def final_best(self):
        return self.best_per_generation[-1]

    def max_fitness(self):
        """Max cached fitness over all islands, per generation."""
        return [b.fitness for b in self.best_per_generation]

    def rows(self):
        return [(r["generation"], r["island"], r["best_fitness"], r["mean_fitness"])
                for r in self.records]

    def best_expressions(self):
        return [serialize_individual(b) for b in self.best_per_generation]


def _record(report, generation, islands):
    best_all = None
    for i, pop in enumerate(islands):
        fits = np.array([ind.fitness for ind in pop])
        best = select_elites(pop, 1)[0]
        report.records.append({"generation": generation, "island": i,
                               "best_fitness": float(fits.max()), "mean_fitness": float(fits.mean())})
        if best_all is None or _rank_key(best) < _rank_key(best_all):
            best_all = best
    report.best_per_generation.append(best_all.copy())


def run_dgp(config, env, master_seed=0, sim=SolverConfig(), rc=ReturnConfig(horizon=50.0),
            threads=1, progress=None):
    """Evolve ``n_islands`` populations for ``n_generations``.

    The run is a pure function of ``(config, env, master_seed, sim, rc)``;
    ``threads`` only changes how fitness evaluations are scheduled.
    """
    specs = config.specs(env.dim_obs)
    report = EvolutionReport(config, master_seed)
    R = config.rollouts_per_eval
    islands = [init_population(config, specs, _rng(master_seed, "init", i), i)
               for i in range(config.n_islands)]
    flat = [ind for pop in islands for ind in pop]
    evaluate_population(flat, env, generation_seeds(master_seed, 0, R), sim, rc,
                        config.penalty_fitness, config.tanh_readout, threads)
    _record(report, 0, islands)
    if progress:
        progress(0, report)

    for gen in range(1, config.n_generations + 1):
        seeds = generation_seeds(master_seed, gen, R)
        bred = [breed(pop, config, specs, island_rates(config, i), _rng(master_seed, "gp", gen, i),
                      gen, i) for i, pop in enumerate(islands)]
        children = [c for _, kids in bred for c in kids]
        evaluate_population(children, env, seeds, sim, rc, config.penalty_fitness,
                            config.tanh_readout, threads)
        islands = [elites + kids for elites, kids in bred]
        if gen % config.migration_interval == 0:
            islands = migrate(islands, config)
        _record(report, gen, islands)
        if progress:
            progress(gen, report)
    report.islands = islands
    return report


def with_overrides(config, **kw):
    return dataclasses.replace(config, **kw)
