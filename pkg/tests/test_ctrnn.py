import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dynlab.ctrnn import (
    CtrnnParams,
    ctrnn_diffusion,
    ctrnn_drift,
    ctrnn_system,
    flatten_params,
    init_params,
    n_params,
    readout,
    unflatten_params,
)
from dynlab.exceptions import DimensionMismatch


def params(k=1, **kw):
    base = dict(tau=np.ones(k), b=np.zeros(k), A=np.zeros((k, k)), B=np.zeros((k, 1)),
                C=np.zeros((1, k)))
    base.update({name: np.asarray(v, dtype=float) for name, v in kw.items()})
    return CtrnnParams(**base)


def test_zero_network_is_stationary():
    p = init_params()
    np.testing.assert_array_equal(ctrnn_drift(np.zeros(2), np.array([3.0, -1.0]), p), [0.0, 0.0])


def test_recurrent_sigmoid_term():
    p = params(A=[[2.0]])
    assert ctrnn_drift(np.zeros(1), np.zeros(1), p)[0] == pytest.approx(1.0)


def test_input_and_time_constant():
    p = params(tau=[2.0], B=[[1.0]])
    assert ctrnn_drift(np.ones(1), np.array([3.0]), p)[0] == pytest.approx(1.0)


def test_independent_drift_oracle():
    rng = np.random.default_rng(0)
    k, m = 3, 2
    p = CtrnnParams(rng.uniform(0.5, 2, k), rng.normal(size=k), rng.normal(size=(k, k)),
                    rng.normal(size=(k, m)), rng.normal(size=(1, k)))
    a, y = rng.normal(size=k), rng.normal(size=m)
    want = [(-a[i] + sum(p.A[i, j] / (1 + np.exp(-(a[j] + p.b[j]))) for j in range(k))
             + sum(p.B[i, j] * y[j] for j in range(m))) / p.tau[i] for i in range(k)]
    np.testing.assert_allclose(ctrnn_drift(a, y, p), want, rtol=1e-12)


def test_diffusion():
    np.testing.assert_array_equal(ctrnn_diffusion(init_params()), 0.01 * np.eye(2))
    np.testing.assert_array_equal(ctrnn_diffusion(init_params(kappa=0.0)), np.zeros((2, 2)))


def test_readout():
    p = params(k=2, C=[[1.0, 0.0]])
    assert readout(np.array([10.0, 5.0]), p)[0] == pytest.approx(0.9999999958, abs=1e-10)
    assert readout(np.zeros(2), init_params())[0] == 0.0


@given(arrays(np.float64, 2, elements=st.floats(-1e6, 1e6)),
       arrays(np.float64, (1, 2), elements=st.floats(-1e3, 1e3)))
def test_readout_bounded(alpha, C):
    u = readout(alpha, params(k=2, C=C))
    assert np.all(np.abs(u) <= 1.0)


def test_init_params_layout():
    p = init_params(2, 2, 1)
    v = flatten_params(p)
    assert v.shape == (14,) and n_params(2, 2, 1) == 14
    np.testing.assert_array_equal(v[:2], [1.0, 1.0])
    assert not v[2:].any()


@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_flatten_round_trip(k, m, c, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n_params(k, m, c))
    v[:k] = np.abs(v[:k]) + 0.1
    p = unflatten_params(v, k, m, c)
    np.testing.assert_array_equal(flatten_params(p), v)
    assert unflatten_params(flatten_params(p), k, m, c) == p


def test_flatten_is_linear():
    rng = np.random.default_rng(2)
    mk = lambda: unflatten_params(np.abs(rng.normal(size=14)) + 0.1, 2, 2, 1)
    p, q = mk(), mk()
    s = CtrnnParams(p.tau + q.tau, p.b + q.b, p.A + q.A, p.B + q.B, p.C + q.C)
    np.testing.assert_allclose(flatten_params(s), flatten_params(p) + flatten_params(q))


def test_flatten_order_is_tau_b_a_b_c():
    v = np.arange(1.0, 15.0)
    p = unflatten_params(v, 2, 2, 1)
    np.testing.assert_array_equal(p.tau, [1, 2])
    np.testing.assert_array_equal(p.b, [3, 4])
    np.testing.assert_array_equal(p.A, [[5, 6], [7, 8]])
    np.testing.assert_array_equal(p.B, [[9, 10], [11, 12]])
    np.testing.assert_array_equal(p.C, [[13, 14]])


def test_tau_clamp():
    v = flatten_params(init_params())
    v[0] = -0.3
    assert unflatten_params(v, 2, 2, 1, tau_min=0.05).tau[0] == 0.05
    with pytest.raises(ValueError):
        unflatten_params(v, 2, 2, 1)


def test_validation():
    with pytest.raises(DimensionMismatch):
        unflatten_params(np.zeros(13), 2, 2, 1)
    with pytest.raises(ValueError):
        CtrnnParams(np.zeros(1), np.zeros(1), np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))


def test_system_is_open_and_additive():
    s = ctrnn_system(init_params())
    assert s.dim_input == 2 and s.additive and s.dim_noise == 2
