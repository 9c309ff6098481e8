import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from unbalanced_sbm.model import (
    derive_params,
    overlap_from_psucc,
    params_from_abc,
    params_from_dict,
    poisson_tv,
    transition_matrix,
)

valid_p = st.floats(min_value=1e-3, max_value=0.5)
valid_d = st.floats(min_value=0.5, max_value=1e4)


@st.composite
def valid_params(draw):
    p = draw(valid_p)
    d = draw(valid_d)
    lam = draw(st.floats(min_value=0.0, max_value=1.0)) * d
    return derive_params(p, d, lam)


def test_symmetric_example():
    P = derive_params(0.5, 100, 1)
    assert P.epsilon == pytest.approx(0.1, abs=1e-12)
    assert (P.a, P.b, P.c) == pytest.approx((1.1, 0.9, 1.1), abs=1e-12)


def test_no_signal_example():
    P = derive_params(0.5, 4, 0)
    assert (P.a, P.b, P.c) == (1.0, 1.0, 1.0)


def test_unbalanced_example():
    P = derive_params(0.25, 400, 4)
    assert P.epsilon == pytest.approx(0.1, abs=1e-12)
    assert (P.a, P.b, P.c) == pytest.approx((1.3, 0.9, 31 / 30), abs=1e-12)


@pytest.mark.parametrize("p,d,lam", [(0.0, 1, 0.5), (0.6, 1, 0.5), (0.3, 0, 0.5),
                                     (0.3, 2, 3), (0.3, 2, -1)])
def test_derive_rejects(p, d, lam):
    with pytest.raises(ValueError):
        derive_params(p, d, lam)


def test_abc_examples(p25):
    assert params_from_abc(0.5, 4, 1.5, 0.5, 1.5).lam == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        params_from_abc(0.5, 4, 2, 0.5, 1.5)
    assert p25.lam == pytest.approx(1.0, abs=1e-12)
    assert p25.epsilon == pytest.approx(0.1, abs=1e-12)


def test_balance_tolerance_accepts_decimal_input():
    # 1.0333333333 is 31/30 to ten digits; the balance error is ~2.5e-11
    assert params_from_abc(0.25, 100, 1.3, 0.9, 1.0333333333).lam == pytest.approx(1.0)
    with pytest.raises(ValueError):
        params_from_abc(0.25, 100, 1.3, 0.9, 1.0334)


@settings(max_examples=200, deadline=None)
@given(valid_params())
def test_invariants(P):
    p, eps = P.p, P.epsilon
    assert p * P.a + (1 - p) * P.b == pytest.approx(1, abs=1e-12)
    assert p * P.b + (1 - p) * P.c == pytest.approx(1, abs=1e-12)
    assert P.a == pytest.approx(1 + (1 - p) / p * eps, abs=1e-12)
    assert P.c == pytest.approx(1 + p / (1 - p) * eps, abs=1e-12)
    assert P.lam == pytest.approx(P.d * (1 - P.b) ** 2, rel=1e-12, abs=1e-12)
    assert P.h == pytest.approx(math.log(p / (1 - p)))


@settings(max_examples=200, deadline=None)
@given(valid_params())
def test_round_trip(P):
    Q = params_from_abc(P.p, P.d, P.a, P.b, P.c)
    assert Q.lam == pytest.approx(P.lam, abs=1e-10 * max(1, P.d))
    assert Q.epsilon == pytest.approx(P.epsilon, abs=1e-10)
    for form in ("lambda", "abc"):
        R = params_from_dict(P.as_dict(form))
        assert R.lam == pytest.approx(P.lam, abs=1e-10 * max(1, P.d))


def test_params_from_dict_rejects_incomplete():
    with pytest.raises(ValueError):
        params_from_dict({"p": 0.3, "d": 2})


def test_transition_examples(p25):
    R = transition_matrix(params_from_abc(0.5, 4, 1.5, 0.5, 1.5))
    np.testing.assert_allclose(R, [[0.75, 0.25], [0.25, 0.75]], atol=1e-15)
    R = transition_matrix(derive_params(0.3, 5, 0))
    np.testing.assert_allclose(R, [[0.3, 0.7], [0.3, 0.7]], atol=1e-15)
    R = transition_matrix(p25)
    np.testing.assert_allclose(R, [[0.325, 0.675], [0.225, 0.775]], atol=1e-12)
    assert sorted(np.linalg.eigvals(R).real) == pytest.approx([0.1, 1.0], abs=1e-10)


def test_transition_is_read_only(p25):
    with pytest.raises(ValueError):
        transition_matrix(p25)[0, 0] = 1.0


def test_transition_rows_and_eigenvalues_random():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        p = rng.uniform(1e-3, 0.5)
        d = rng.uniform(0.5, 100)
        P = derive_params(p, d, rng.uniform(0, 1) * d)
        R = transition_matrix(P)
        np.testing.assert_allclose(R.sum(axis=1), 1.0, atol=1e-12)
        # closed-form 2x2 eigenvalues: the trace minus the unit eigenvalue
        assert R[0, 0] + R[1, 1] - 1 == pytest.approx(1 - P.b, abs=1e-10)
        assert np.linalg.det(R) == pytest.approx(1 - P.b, abs=1e-10)


def test_poisson_tv_examples():
    assert poisson_tv(3, 3) == 0.0
    k = np.arange(200)
    oracle = 0.5 * np.abs(stats.poisson.pmf(k, 1) - stats.poisson.pmf(k, 2)).sum()
    assert poisson_tv(1, 2) == pytest.approx(oracle, abs=1e-12)
    assert poisson_tv(0.001, 10) == pytest.approx(1.0, abs=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 50), st.floats(0.01, 50))
def test_poisson_tv_symmetric_and_bounded(m1, m2):
    t = poisson_tv(m1, m2)
    assert 0.0 <= t <= 1.0
    assert t == pytest.approx(poisson_tv(m2, m1), abs=1e-12)


def test_balanced_degrees_are_uninformative():
    P = derive_params(0.2, 7, 3)
    d1 = P.d * (P.p * P.a + (1 - P.p) * P.b)
    d2 = P.d * (P.p * P.b + (1 - P.p) * P.c)
    assert poisson_tv(d1, d2) == pytest.approx(0.0, abs=1e-12)


def test_overlap_examples():
    assert overlap_from_psucc(0.5, 1) == 0.25
    assert overlap_from_psucc(0.3, 0) == 0.0
    assert overlap_from_psucc(0.25, 0.4) == pytest.approx(0.075)
