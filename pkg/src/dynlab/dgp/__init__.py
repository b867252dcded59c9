"""Differential genetic programming: evolving the state equations of an agent."""

from .evolution import (
    EvolutionReport,
    GpConfig,
    evolve_generation,
    generation_seeds,
    init_population,
    island_rates,
    migrate,
    run_dgp,
    select_elites,
    tournament,
)
from .expr import (
    ExprTree,
    Individual,
    Var,
    eval_tree,
    parse_individual,
    parse_tree,
    serialize_individual,
    serialize_tree,
)
from .fitness import evaluate_fitness, evaluate_population, individual_to_system, rollout_individual
from .operators import TreeSpec, check_individual, crossover, mutate, random_individual, random_tree

REFERENCE_AGENT = """\
(mul -1.15 y1)
(sub (mul -6.14 z2) (mul 2.07 y1))
(add (mul 2 z1) (mul 6 z2))
"""

NULL_CONTROLLER = """\
0.0
0.0
0.0
"""


def reference_individual():
    """Fixed two-state agent used as a comparison point against the null controller."""
    return parse_individual(REFERENCE_AGENT)


def null_individual(n_state=2):
    zero = ExprTree([0.0])
    return Individual((zero,) * n_state, zero, id=("null",))
