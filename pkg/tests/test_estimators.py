import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dynlab.environments import SdiParams, StochasticDoubleIntegrator
from dynlab.estimators import DgpController, OuaController


def test_params_round_trip_through_clone():
    m = OuaController(eta=3.0, horizon=20.0)
    c = clone(m)
    assert c.get_params() == m.get_params()
    d = DgpController(n_islands=3).set_params(pop_size=7)
    assert d.get_params()["pop_size"] == 7


def test_unfitted_predict_raises():
    with pytest.raises(NotFittedError):
        OuaController().predict(np.zeros((3, 2)))


def test_oua_fit_predict_score():
    m = OuaController(horizon=20.0, score_horizon=5.0, n_score_rollouts=2).fit()
    assert m.params_.k == 2 and np.isfinite(m.return_)
    u = m.predict(np.zeros((10, 2)))
    assert u.shape == (10, 1) and np.all(np.abs(u) < 1)
    assert m.transform(np.ones((4, 2))).shape == (4, 2)
    assert m.score() <= 0


def test_oua_without_learning_keeps_initial_network():
    m = OuaController(sigma=0.0, eta=0.0, horizon=10.0).fit()
    assert not np.any(m.predict(np.ones((5, 2))))


def test_predict_validates_columns():
    m = OuaController(horizon=5.0).fit()
    with pytest.raises(ValueError):
        m.predict(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        m.predict(np.array([[np.nan, 0.0]]))


def test_dgp_fit_predict_score():
    d = DgpController(n_islands=2, pop_size=8, n_generations=2, tournament_size=2,
                      horizon=5.0, n_score_seeds=2).fit()
    assert d.best_.fitness is not None
    assert d.predict(np.zeros((6, 2))).shape == (6, 1)
    assert np.isfinite(d.score())


def test_fit_accepts_environment():
    env = StochasticDoubleIntegrator(SdiParams(gamma=1.0, s0=(1.0, 0.0)))
    d = DgpController(n_islands=1, pop_size=6, n_generations=1, tournament_size=2,
                      horizon=5.0).fit(env)
    assert d.env_ is env
    with pytest.raises(TypeError):
        DgpController().fit(np.zeros((2, 2)))


def test_filter_matches_hand_integration():
    d = DgpController(n_islands=1, pop_size=6, n_generations=0, tournament_size=2, horizon=5.0).fit()
    from dynlab.dgp import parse_individual

    d.best_ = parse_individual("y1\n(mul -1 z2)\nz1\n")
    Y = np.array([[1.0, 0.0]] * 3)
    # z1 grows at rate 1 under constant y1 = 1; z2 stays 0
    np.testing.assert_allclose(d.transform(Y)[:, 0], [0.0, 0.1, 0.2])
    np.testing.assert_allclose(d.predict(Y)[:, 0], [0.0, 0.1, 0.2])
