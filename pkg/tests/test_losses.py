import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from intreg.losses import DomainError, evaluate_loss, loss_arrays

finite_a = st.floats(-10, 10, allow_nan=False)


def test_squared_examples():
    assert tuple(evaluate_loss("squared", 3.0, 3.0)) == (0.0, 0.0, 1.0)
    assert tuple(evaluate_loss("squared", 0.0, 2.0)) == (2.0, 2.0, 1.0)


def test_logistic_at_origin():
    v, d1, d2 = evaluate_loss("logistic", 0, 0.0)
    assert v == pytest.approx(math.log(2), abs=1e-15)
    assert d1 == 0.5 and d2 == 0.25


def test_logistic_rejects_non_binary_response():
    with pytest.raises(DomainError):
        evaluate_loss("logistic", 0.5, 0.0)
    with pytest.raises(DomainError):
        evaluate_loss("poisson", 1.0, 0.0)


def test_logistic_is_stable_for_large_predictors():
    v, d1, d2 = evaluate_loss("logistic", 1, 800.0)
    assert math.isfinite(v) and v == pytest.approx(0.0, abs=1e-300)
    v, d1, d2 = evaluate_loss("logistic", 0, 800.0)
    assert v == pytest.approx(800.0)
    v, d1, d2 = evaluate_loss("logistic", 0, -800.0)
    assert math.isfinite(v) and d2 >= 0


@given(y=st.sampled_from([0, 1]), a=finite_a)
def test_logistic_curvature_bounds(y, a):
    d2 = evaluate_loss("logistic", y, a).d2
    assert 0 < d2 <= 0.25


@given(y=st.floats(-5, 5), a=finite_a)
def test_squared_symmetry(y, a):
    assert evaluate_loss("squared", y, a).value == evaluate_loss("squared", a, y).value


@pytest.mark.parametrize("kind,ys", [("squared", [-2.0, 0.0, 3.5]), ("logistic", [0, 1])])
def test_derivatives_match_finite_differences(kind, ys):
    h = 1e-5
    a = np.linspace(-10, 10, 201)
    for y in ys:
        yv = np.full_like(a, y)
        val, d1, d2 = loss_arrays(kind, yv, a)
        vp, d1p, _ = loss_arrays(kind, yv, a + h)
        vm, d1m, _ = loss_arrays(kind, yv, a - h)
        np.testing.assert_allclose(d1, (vp - vm) / (2 * h), atol=1e-6)
        np.testing.assert_allclose(d2, (d1p - d1m) / (2 * h), atol=1e-6)


def test_vectorised_matches_scalar():
    a = np.array([-30.0, -1.0, 0.0, 2.0, 30.0])
    y = np.array([0, 1, 1, 0, 1])
    val, d1, d2 = loss_arrays("logistic", y, a)
    for i in range(a.size):
        t = evaluate_loss("logistic", int(y[i]), float(a[i]))
        assert (t.value, t.d1, t.d2) == pytest.approx((val[i], d1[i], d2[i]), rel=1e-14, abs=1e-300)
