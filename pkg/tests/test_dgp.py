import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynlab.dgp import (
    REFERENCE_AGENT,
    ExprTree,
    GpConfig,
    Individual,
    Var,
    crossover,
    eval_tree,
    evaluate_fitness,
    evolve_generation,
    init_population,
    island_rates,
    migrate,
    mutate,
    null_individual,
    reference_individual,
    parse_individual,
    parse_tree,
    random_individual,
    random_tree,
    rollout_individual,
    run_dgp,
    select_elites,
    serialize_individual,
    serialize_tree,
    tournament,
)
from dynlab.dgp.operators import TreeSpec, check_individual, tree_violations
from dynlab.environments import SdiParams, StochasticDoubleIntegrator
from dynlab.exceptions import ParseError
from dynlab.experiments import ReturnConfig
from dynlab.sde import SolverConfig

from _oracles import naive_eval

SPECS = GpConfig().specs(2)
SMALL = GpConfig(n_islands=2, pop_size=12, n_generations=3, tournament_size=3, rollouts_per_eval=2,
                 migration_interval=2)
RC = ReturnConfig(horizon=10.0)


def rand_ind(seed, depth=4):
    return random_individual(np.random.default_rng(seed), SPECS, depth)


class TestEvaluation:
    def test_panel_d_first_tree(self):
        t = parse_tree("(mul -1.15 y1)")
        assert eval_tree(t, [0.0, 0.0], [2.0, 0.0]) == pytest.approx(-2.3)

    def test_panel_d_second_tree(self):
        t = parse_tree("(sub (mul -6.14 z2) (mul 2.07 y1))")
        assert eval_tree(t, [0.0, 1.0], [1.0, 0.0]) == pytest.approx(-8.21)

    @given(st.floats(-1e6, 1e6), st.lists(st.floats(-10, 10), min_size=2, max_size=2))
    def test_constant_tree(self, c, z):
        assert eval_tree(ExprTree([c]), z, z) == c

    @given(st.integers(0, 2**32 - 1))
    def test_matches_naive_evaluator(self, seed):
        rng = np.random.default_rng(seed)
        tree = random_tree(rng, SPECS[0], int(rng.integers(1, 8)))
        z, y = rng.normal(size=2) * 3, rng.normal(size=2) * 3
        assert eval_tree(tree, z, y) == naive_eval(tree.tokens, z, y)


class TestSerialization:
    def test_panel_d_readout(self):
        t = parse_tree("(add (mul 2 z1) (mul 6 z2))")
        assert t.tokens == ("add", "mul", 2.0, Var("z", 0), "mul", 6.0, Var("z", 1))

    def test_reference_individual_shape(self):
        ind = reference_individual()
        assert ind.n_state == 2 and len(ind.trees) == 3

    @pytest.mark.parametrize("text", ["(add z1)", "(add z1 z2 z1)", "(mul 2 z1", "(pow z1 z2)",
                                      "z1 z2", ")", "(add z0 1)"])
    def test_malformed(self, text):
        with pytest.raises(ParseError):
            parse_tree(text)

    def test_error_position(self):
        with pytest.raises(ParseError) as info:
            parse_individual("(add z1 z2)\n(mul 3 q7)\n1\n")
        assert info.value.line == 2 and info.value.column == 8

    def test_aliases_and_comments(self):
        ind = parse_individual("# agent\n(* -1.15 y1)\n(- z2 1)\n\n(+ z1 z2)\n")
        assert serialize_tree(ind.trees[0]) == "(mul -1.15 y1)"

    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, seed):
        ind = rand_ind(seed, 6)
        back = parse_individual(serialize_individual(ind))
        assert back.same_genotype(ind)


class TestOperators:
    def test_depth_one_is_leaf(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert random_tree(rng, SPECS[0], 1).size == 1

    def test_random_trees_respect_caps(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            t = random_tree(rng, SPECS[0], int(rng.integers(1, 9)))
            assert tree_violations(t, SPECS[0]) == []

    def test_random_tree_deterministic(self):
        a = random_tree(np.random.default_rng(9), SPECS[0], 5)
        b = random_tree(np.random.default_rng(9), SPECS[0], 5)
        assert a == b

    def test_readout_never_sees_observations(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            t = random_tree(rng, SPECS[-1], 5)
            assert all(not (isinstance(v, Var) and v.kind == "y") for v in t.tokens)

    def test_self_crossover_at_same_locus(self):
        x = rand_ind(3)

        class SameDraws:
            def integers(self, n):
                return 0

        a, b = crossover(x, x, SameDraws(), SPECS)
        assert a.same_genotype(x) and b.same_genotype(x)

    @given(st.integers(0, 2**32 - 1))
    def test_crossover_preserves_invariants(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rand_ind(seed), rand_ind(seed + 1)
        for child in crossover(a, b, rng, SPECS):
            assert check_individual(child, SPECS) == []
            assert child.fitness is None

    def test_zero_rates_are_identity(self):
        x = rand_ind(4)
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert mutate(x, rng, SPECS, 0.0, 0.0, 0.0) is x

    def test_jitter_keeps_shape(self):
        rng = np.random.default_rng(5)
        for seed in range(100):
            x = rand_ind(seed)
            y = mutate(x, rng, SPECS, 0.0, 0.0, 1.0)
            for ta, tb in zip(x.trees, y.trees):
                shape = lambda t: [tok if not isinstance(tok, float) else "c" for tok in t.tokens]
                assert shape(ta) == shape(tb)

    @given(st.integers(0, 2**32 - 1))
    def test_mutation_preserves_invariants(self, seed):
        rng = np.random.default_rng(seed)
        x = rand_ind(seed, 7)
        for _ in range(20):
            x = mutate(x, rng, SPECS, 0.4, 0.3, 0.3)
            assert check_individual(x, SPECS) == []


class TestFitness:
    env = StochasticDoubleIntegrator()
    seeds = [(0, i) for i in range(3)]

    def test_null_controller_finite_negative(self):
        f = evaluate_fitness(null_individual(), self.env, self.seeds, rc=RC)
        assert np.isfinite(f) and f < 0

    def test_null_controller_closed_form(self):
        # no control, no noise: s1(t) = 2 + (1 - exp(-t/2)) / 0.5 with s0 = (2, 1)
        env = StochasticDoubleIntegrator(SdiParams(epsilon=0.0, s0=(2.0, 1.0)))
        rec = rollout_individual(null_individual(), env, SolverConfig(), RC, (0, 0))
        t = rec.trajectory.times
        s1 = 2 + (1 - np.exp(-0.5 * t)) / 0.5
        np.testing.assert_allclose(rec.rewards, -0.9 * s1**2, rtol=1e-3)

    def test_huge_constant_control_worse_than_null(self):
        bad = parse_individual("0\n0\n1000000\n")
        null = evaluate_fitness(null_individual(), self.env, self.seeds, rc=RC)
        assert evaluate_fitness(bad, self.env, self.seeds, rc=RC) <= null

    def test_divergence_gets_penalty(self):
        blow = parse_individual("(add 1 (mul z1 z1))\n0\n0\n")
        assert evaluate_fitness(blow, self.env, self.seeds, rc=RC) == -1e6

    def test_deterministic_and_cached(self):
        x = rand_ind(11)
        a = evaluate_fitness(x, self.env, self.seeds, rc=RC)
        b = evaluate_fitness(x.copy(), self.env, self.seeds, rc=RC)
        assert a == b and x.fitness == a and x.fitness_key == ((0, 0), (0, 1), (0, 2))

    @pytest.mark.parametrize("method", ["heun", "euler_maruyama"])
    @pytest.mark.parametrize("seed", range(6))
    def test_kernel_matches_generic_route(self, method, seed):
        x = rand_ind(100 + seed)
        sim = SolverConfig(method=method)
        fast = evaluate_fitness(x.copy(), self.env, self.seeds, sim, RC)
        slow = evaluate_fitness(x.copy(), self.env, self.seeds, sim, RC, use_kernel=False)
        if fast == -1e6 or slow == -1e6:
            assert fast == slow
        else:
            assert fast == pytest.approx(slow, rel=1e-9, abs=1e-9)

    def test_discounted_kernel_matches_generic(self):
        x = reference_individual()
        rc = ReturnConfig(discount_rate=0.3, horizon=10.0)
        fast = evaluate_fitness(x.copy(), self.env, self.seeds, rc=rc)
        slow = evaluate_fitness(x.copy(), self.env, self.seeds, rc=rc, use_kernel=False)
        assert fast == pytest.approx(slow, rel=1e-9)


class TestEvolution:
    env = StochasticDoubleIntegrator()

    def _pop(self, config=SMALL, seed=0):
        from dynlab.dgp.fitness import evaluate_population

        specs = config.specs(2)
        pop = init_population(config, specs, np.random.default_rng(seed))
        evaluate_population(pop, self.env, [(0, 0)], SolverConfig(), RC)
        return pop, specs

    def test_full_elitism_keeps_population(self):
        cfg = GpConfig(n_islands=1, pop_size=6, tournament_size=2, elitism_count=6)
        pop, specs = self._pop(cfg)
        new = evolve_generation(pop, cfg, self.env, [(0, 1)], np.random.default_rng(0), specs,
                                rc=RC)
        assert sorted(i.fitness for i in new) == sorted(i.fitness for i in pop)
        assert all(any(n.same_genotype(p) for p in pop) for n in new)

    def test_full_tournament_picks_best(self):
        pop, _ = self._pop()
        rng = np.random.default_rng(0)
        best = select_elites(pop, 1)[0]
        for _ in range(10):
            assert tournament(pop, rng, len(pop)) is best

    def test_ring_of_two(self):
        a, _ = self._pop(seed=1)
        b, _ = self._pop(seed=2)
        best_a = select_elites(a, 1)[0]
        out = migrate([a, b], SMALL)
        assert any(x.same_genotype(best_a) and x.fitness == best_a.fitness for x in out[1])
        assert [len(p) for p in out] == [len(a), len(b)]

    def test_no_migration_is_independent(self):
        cfg = GpConfig(n_islands=2, pop_size=10, tournament_size=3, n_generations=2,
                       migration_count=0, rollouts_per_eval=1)
        a = run_dgp(cfg, self.env, 4, rc=RC)
        one = GpConfig(n_islands=1, pop_size=10, tournament_size=3, n_generations=2,
                       migration_count=0, rollouts_per_eval=1)
        b = run_dgp(one, self.env, 4, rc=RC)
        island0 = [r for r in a.records if r["island"] == 0]
        assert [r["best_fitness"] for r in island0] == [r["best_fitness"] for r in b.records]

    def test_zero_generations(self):
        cfg = GpConfig(n_islands=2, pop_size=8, tournament_size=2, n_generations=0,
                       rollouts_per_eval=1)
        rep = run_dgp(cfg, self.env, 0, rc=RC)
        assert len(rep.best_per_generation) == 1 and len(rep.records) == 2

    def test_max_fitness_non_decreasing(self):
        rep = run_dgp(SMALL, self.env, 3, rc=RC)
        m = rep.max_fitness()
        assert all(b >= a for a, b in zip(m, m[1:]))

    def test_threads_do_not_change_results(self):
        a = run_dgp(SMALL, self.env, 5, rc=RC, threads=1)
        b = run_dgp(SMALL, self.env, 5, rc=RC, threads=3)
        assert a.rows() == b.rows() and a.best_expressions() == b.best_expressions()

    def test_island_rates(self):
        cfg = GpConfig()
        assert island_rates(cfg, 0).p_crossover == pytest.approx(0.35)
        assert island_rates(cfg, 9).p_crossover == 1.0
        assert island_rates(GpConfig(n_islands=1), 0).p_crossover == 0.7

    def test_full_scale_defaults(self):
        cfg = GpConfig()
        assert (cfg.n_islands, cfg.pop_size, cfg.n_generations) == (10, 100, 50)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GpConfig(p_crossover=1.5)
        with pytest.raises(ValueError):
            GpConfig(pop_size=3, tournament_size=5)
