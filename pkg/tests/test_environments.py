import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynlab.environments import (
    EnvironmentDistribution,
    RewardWeights,
    SdiParams,
    StochasticDoubleIntegrator,
    observe_full,
    quadratic_reward,
    sdi_diffusion,
    sdi_drift,
)

finite = st.floats(-1e3, 1e3)


@pytest.mark.parametrize("s,u,expected", [
    ((0.0, 0.0), 0.0, (0.0, 0.0)),
    ((1.0, 2.0), 0.0, (2.0, -1.0)),
    ((0.0, 1.0), 0.5, (1.0, 0.0)),
])
def test_drift_by_substitution(s, u, expected):
    np.testing.assert_allclose(sdi_drift(np.array(s), u), expected)


def test_diffusion_column():
    np.testing.assert_array_equal(sdi_diffusion(np.zeros(2)), [[0.0], [0.1]])
    np.testing.assert_array_equal(sdi_diffusion(np.zeros(2), SdiParams(epsilon=0.0)), [[0.0], [0.0]])


@given(finite, finite)
def test_diffusion_independent_of_state(a, b):
    np.testing.assert_array_equal(sdi_diffusion(np.array([a, b])), sdi_diffusion(np.zeros(2)))


def test_observation_is_full_state():
    np.testing.assert_array_equal(observe_full(np.array([1.5, -2.0])), [1.5, -2.0])
    env = StochasticDoubleIntegrator()
    assert env.dim_obs == env.dim_state == 2


@pytest.mark.parametrize("s,u,expected", [((0.0, 7.0), 0.0, 0.0), ((1.0, 0.0), 1.0, -1.0),
                                          ((2.0, 0.0), 0.0, -3.6)])
def test_reward_values(s, u, expected):
    assert quadratic_reward(np.array(s), u) == pytest.approx(expected, abs=1e-15)


@given(finite, finite, finite)
def test_reward_never_positive(s1, s2, u):
    assert quadratic_reward(np.array([s1, s2]), u) <= 0.0


def test_defaults_match_reported_constants():
    p = SdiParams()
    assert (p.gamma, p.epsilon) == (0.5, 0.1)
    assert RewardWeights() == RewardWeights(0.9, 0.1)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        SdiParams(gamma=-1.0)
    with pytest.raises(ValueError):
        SdiParams(s0=(1.0, 2.0, 3.0))


def test_distribution_point_mass_and_sampling():
    env = StochasticDoubleIntegrator(SdiParams(0.7, 0.2, (1.0, -1.0)))
    d = EnvironmentDistribution.point_mass(env)
    got = d.sample(np.random.default_rng(0))
    assert got.to_dict() == env.to_dict()
    d = EnvironmentDistribution()
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = d.sample(rng).params
        assert 0.25 <= p.gamma <= 1.0 and 0.05 <= p.epsilon <= 0.2
        assert all(-2.0 <= v <= 2.0 for v in p.s0)
