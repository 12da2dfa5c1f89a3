import numpy as np
import pytest

from intreg.datagen import Scenario, gen_design, gen_scenario
from intreg.debias import (DegenerateColumnError, build_precision, coherence_report,
                           debiased_estimate, default_nodewise_lambda, fit_nodewise,
                           weighted_design)
from intreg.lasso import default_lambda, fit_penalized
from intreg.local import PipelineConfig, local_fit
from intreg.model import AggregationSpec, Dataset


def hadamard_design(n=8, d=4):
    # columns of a Sylvester-Hadamard matrix: (1/n) X'X = I exactly
    H = np.array([[1.0]])
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    return H[:, :d]


def two_column_design(rho=0.5):
    # (1/n) x1'x1 = (1/n) x2'x2 = 1 and (1/n) x1'x2 = rho, built from Hadamard columns
    H = hadamard_design(8, 2)
    x1 = H[:, 0]
    x2 = rho * H[:, 0] + np.sqrt(1 - rho ** 2) * H[:, 1]
    return np.column_stack([x1, x2])


def test_weighted_design_squared_is_identity_map():
    X = np.random.default_rng(0).standard_normal((5, 3))
    ds = Dataset(X, np.zeros(5))
    np.testing.assert_array_equal(weighted_design(ds, "squared", np.ones(3)), X)


def test_weighted_design_logistic_at_zero_halves_rows():
    X = np.random.default_rng(1).standard_normal((5, 3))
    ds = Dataset(X, [0, 1, 0, 1, 1])
    np.testing.assert_allclose(weighted_design(ds, "logistic", np.zeros(3)), 0.5 * X)


def test_weighted_design_logistic_weight_floor():
    X = np.array([[20.0, 0.0], [0.0, 1.0]])
    ds = Dataset(X, [1, 0])
    w = weighted_design(ds, "logistic", np.array([1.0, 0.0]))
    # rho''(20) ~ 2e-9 is below the floor, so the row scale is sqrt(1e-5)
    assert w[0, 0] == pytest.approx(20.0 * np.sqrt(1e-5))


def test_orthonormal_nodewise():
    X = hadamard_design()
    for j in range(4):
        f = fit_nodewise(X, j, 0.1)
        assert np.all(f.gamma == 0) and f.tau_sq == 1.0
        np.testing.assert_array_equal(f.row, np.eye(4)[j])
    prec = build_precision(X, 0.1)
    np.testing.assert_array_equal(prec.theta, np.eye(4))
    rep = coherence_report(X, prec)
    assert rep.unit_diag_error == 0 and rep.max_coherence == 0


def test_two_variable_closed_form():
    X = two_column_design(0.5)
    f = fit_nodewise(X, 0, 0.0)
    assert f.gamma[0] == pytest.approx(0.5, abs=1e-10)
    assert f.tau_sq == pytest.approx(0.75, abs=1e-10)
    f = fit_nodewise(X, 0, 0.5)
    assert f.gamma[0] == 0.0 and f.tau_sq == pytest.approx(1.0, abs=1e-14)


def test_row_structure():
    X = np.random.default_rng(3).standard_normal((50, 6))
    f = fit_nodewise(X, 2, 0.1)
    assert f.row[2] == pytest.approx(1 / f.tau_sq)
    np.testing.assert_allclose(np.delete(f.row, 2), -f.gamma / f.tau_sq)


def test_build_precision_matches_single_fits():
    X = np.random.default_rng(4).standard_normal((60, 8))
    prec = build_precision(X, 0.15)
    for j in range(8):
        np.testing.assert_allclose(prec.theta[j], fit_nodewise(X, j, 0.15).row, atol=1e-9)


def test_degenerate_column():
    X = np.random.default_rng(5).standard_normal((20, 3))
    X[:, 1] = 0.0
    with pytest.raises(DegenerateColumnError) as err:
        build_precision(X, 0.1)
    assert err.value.column == 1


def test_equicorrelated_precision_recovery():
    d, rho, n = 10, 0.3, 2000
    S = (1 - rho) * np.eye(d) + rho * np.ones((d, d))
    X = np.random.default_rng(6).multivariate_normal(np.zeros(d), S, size=n)
    prec = build_precision(X, default_nodewise_lambda(n, d) * 0.2)
    assert np.abs(prec.theta - np.linalg.inv(S)).max() <= 0.2


def test_one_step_on_orthonormal_single_feature():
    x = np.array([1.0, -1.0, 1.0, -1.0])
    ds = Dataset(x[:, None], 3.0 * x)
    fit = fit_penalized(ds, "squared", 1.0)
    # d = 1 has no nodewise regression; the precision of an identity Gram is 1
    from intreg.debias import PrecisionEstimate
    prec = PrecisionEstimate(theta=np.eye(1), tau_sq=np.ones(1), nodewise_lambda=1.0,
                             converged=np.ones(1, bool))
    assert debiased_estimate(ds, "squared", fit.coef, prec)[0] == pytest.approx(3.0)


def test_zero_penalty_is_fixed_point():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((40, 4))
    ds = Dataset(X, X @ [1.0, 0.0, -1.0, 2.0] + rng.standard_normal(40))
    fit = fit_penalized(ds, "squared", 0.0, tol=1e-13)
    prec = build_precision(X, 0.1)
    np.testing.assert_allclose(debiased_estimate(ds, "squared", fit.coef, prec), fit.coef,
                               atol=1e-9)


@pytest.mark.parametrize("d", [20, 100])
def test_coherence_bounds_on_trichotomized_design(d):
    X = gen_design(200, d, seed=d)
    prec = build_precision(X, default_nodewise_lambda(200, d))
    rep = coherence_report(X, prec)
    assert rep.unit_diag_error <= 1e-6
    assert rep.all_ok


def test_logistic_weighted_coherence():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((200, 15))
    y = (rng.uniform(size=200) < 1 / (1 + np.exp(-X[:, 0]))).astype(float)
    ds = Dataset(X, y)
    fit = fit_penalized(ds, "logistic", 0.05)
    wd = weighted_design(ds, "logistic", fit.coef)
    rep = coherence_report(wd, build_precision(wd, default_nodewise_lambda(200, 15)))
    assert rep.unit_diag_error <= 1e-6 and rep.all_ok


def _sup_errors(seed, nodewise_constant):
    datasets, truth, eta = gen_scenario(Scenario("grow_n", m=2, n=200, d=100, seed=seed))
    cfg = PipelineConfig(AggregationSpec.constant(eta, 100), nodewise_constant=nodewise_constant)
    summary, _ = local_fit(datasets[0], cfg)
    tk = truth.local_coefs[0]
    return np.abs(summary.debiased_coef - tk).max(), np.abs(summary.lasso_coef - tk).max()


def test_debiasing_reduces_worst_coordinate_error():
    # node-side defaults (pilot noise scale, unit nodewise constant)
    wins = sum(a < b for a, b in map(lambda s: _sup_errors(s, 1.0), range(20)))
    assert wins >= 15


def test_debiasing_reduces_worst_coordinate_error_with_smaller_nodewise_penalty():
    wins = sum(a < b for a, b in map(lambda s: _sup_errors(s, 0.2), range(20)))
    assert wins >= 15
