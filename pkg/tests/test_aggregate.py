import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from intreg.aggregate import (LocationProblem, aggregate_columns, aggregate_location,
                              aggregate_vector, baseline_location, check_cluster_assumption,
                              oracle_grid_min, psi)
from intreg.model import AggregationSpec, DomainError, LocalSummary
from strategies import cluster_configuration, random_problem

values_st = st.lists(st.floats(-10, 10, allow_nan=False, allow_infinity=False), min_size=1,
                     max_size=30)


def test_psi_examples():
    assert psi(0, 5) == 0 and psi(3, 5) == 9 and psi(10, 5) == 25
    with pytest.raises(DomainError):
        psi(1.0, 0.0)


def test_majority_value():
    sol = aggregate_location(LocationProblem.of([0, 0, 0, 0, 10], eta=1.0))
    assert sol.minimizer == 0 and sol.objective == 1.0
    assert sol.inlier_set == (0, 1, 2, 3) and sol.unique


def test_large_eta_is_mean():
    assert aggregate_location(LocationProblem.of([1, 2, 3], eta=100)).minimizer == 2.0


def test_inlier_mean_exact():
    p = LocationProblem.of([0.9, 1.0, 1.1, 5.0], eta=0.5)
    sol = aggregate_location(p)
    assert sol.minimizer == pytest.approx(1.0, abs=1e-15)
    x, f = oracle_grid_min(p)
    assert x == pytest.approx(1.0, abs=1e-6)
    assert sol.objective <= f + 1e-12
    rep = check_cluster_assumption(p.values, None, 0.5, 0.3)
    assert rep.holds and rep.mu == pytest.approx(1.0) and rep.delta == pytest.approx(0.1)
    assert rep.delta2 == pytest.approx(3.9)


def test_weighted_mean_without_outliers():
    p = LocationProblem.of([1.0, 3.0], weights=[3.0, 1.0], eta=100)
    assert aggregate_location(p).minimizer == 1.5


def test_empty_and_invalid_problems():
    with pytest.raises(DomainError):
        LocationProblem.of([])
    with pytest.raises(DomainError):
        LocationProblem.of([1.0], weights=[0.0])
    with pytest.raises(DomainError):
        LocationProblem.of([1.0], eta=-1)


def test_single_value():
    p = LocationProblem.of([3.25], eta=0.1)
    assert aggregate_location(p).minimizer == 3.25
    assert oracle_grid_min(p) == (3.25, 0.0)


def test_oracle_resolution_guard():
    with pytest.raises(DomainError):
        oracle_grid_min(LocationProblem.of([1.0, 2.0]), resolution=10)


def test_symmetric_tie_flagged():
    # two equal clusters: the smaller representative is returned
    sol = aggregate_location(LocationProblem.of([-5, -5, 5, 5], eta=5))
    assert not sol.unique
    assert sol.minimizer == -5.0


def test_tie_prefers_more_inliers():
    # f(0) = f(10) = 2 with equal inlier mass, but x=0 has two inliers and x=10 one
    p = LocationProblem.of([0.0, 0.0, 10.0], weights=[1.0, 1.0, 2.0], eta=1.0)
    sol = aggregate_location(p)
    assert not sol.unique and sol.minimizer == 0.0


def test_oracle_equivalence_random():
    rng = np.random.default_rng(12345)
    for _ in range(300):
        p = LocationProblem(*random_problem(rng))
        _, fo = oracle_grid_min(p)
        assert aggregate_location(p).objective <= fo + 1e-9


def test_objective_is_as_evaluated():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = LocationProblem(*random_problem(rng))
        sol = aggregate_location(p)
        assert sol.objective == p.objective(sol.minimizer)
        assert sol.inlier_set == tuple(np.flatnonzero(np.abs(p.values - sol.minimizer) <= p.eta))


@given(values=values_st, a=st.floats(-100, 100), eta=st.floats(0.1, 20))
def test_translation_equivariance(values, a, eta):
    v = np.array(values)
    x0 = aggregate_location(LocationProblem.of(v, eta=eta))
    x1 = aggregate_location(LocationProblem.of(v + a, eta=eta))
    if x0.unique:
        assert x1.minimizer == pytest.approx(x0.minimizer + a, abs=1e-12 * max(1, abs(a)) * 10)


@given(values=values_st, c=st.floats(0.01, 100), eta=st.floats(0.1, 20))
def test_scale_equivariance(values, c, eta):
    v = np.array(values)
    x0 = aggregate_location(LocationProblem.of(v, eta=eta))
    x1 = aggregate_location(LocationProblem.of(c * v, eta=c * eta))
    if x0.unique:
        assert x1.minimizer == pytest.approx(c * x0.minimizer, abs=1e-10 * max(1.0, c * 10))


@given(values=values_st, w=st.floats(0.01, 1000), eta=st.floats(0.1, 20))
def test_constant_weights_do_not_matter(values, w, eta):
    a = aggregate_location(LocationProblem.of(values, eta=eta)).minimizer
    b = aggregate_location(LocationProblem.of(values, weights=np.full(len(values), w), eta=eta))
    assert b.minimizer == pytest.approx(a, abs=1e-12 * 20)


@given(values=values_st, weights=st.lists(st.floats(0.1, 10), min_size=30, max_size=30))
def test_large_eta_gives_weighted_mean(values, weights):
    v = np.array(values)
    w = np.array(weights[: v.size])
    eta = max(v.max() - v.min(), 1e-3)
    sol = aggregate_location(LocationProblem(v, w, eta))
    assert sol.minimizer == pytest.approx(np.average(v, weights=w), abs=1e-12)


@pytest.mark.parametrize("weighted", [False, True])
def test_cluster_exactness(weighted):
    rng = np.random.default_rng(7 + weighted)
    for _ in range(60):
        v, w, eta, alpha, rep = cluster_configuration(rng, weighted)
        sol = aggregate_location(LocationProblem(v, w, eta))
        idx = np.array(rep.inliers)
        assert abs(sol.minimizer - np.average(v[idx], weights=w[idx])) <= 1e-12
        assert sol.inlier_set == rep.inliers


def test_cluster_failures():
    rep = check_cluster_assumption(np.arange(0, 5, 0.5), None, 0.3, 0.3)
    assert not rep.holds and "forbidden annulus occupied" in rep.messages
    # eta exactly twice delta
    rep = check_cluster_assumption([0.9, 1.0, 1.1, 5.0], None, 0.2, 0.3)
    assert not rep.holds and "eta must exceed 2*delta strictly" in rep.messages
    rep = check_cluster_assumption([0.9, 1.0, 1.1, 2.0], None, 0.5, 0.3)
    assert not rep.holds
    rep = check_cluster_assumption([1.0, 1.0, 9.0], None, 1.0, 0.5)
    assert not rep.holds and "alpha outside [0, 3/7)" in rep.messages


def test_huber_example():
    v = np.r_[np.zeros(9), 10.0]
    assert baseline_location("huber", v, lam=1.0) == pytest.approx(1 / 9, abs=1e-12)


def huber_objective(v, lam, x):
    r = np.abs(v - x)
    return np.where(r <= lam, 0.5 * r * r, lam * r - 0.5 * lam * lam).sum()


def test_huber_matches_reference():
    # the Huber objective can be flat at its minimum, so compare objective values
    rng = np.random.default_rng(3)
    for _ in range(30):
        v = rng.normal(size=int(rng.integers(2, 20))) * 3
        lam = float(rng.uniform(0.1, 3))
        ref = optimize.minimize_scalar(lambda x: huber_objective(v, lam, x),
                                       bounds=(v.min(), v.max()), method="bounded",
                                       options={"xatol": 1e-12})
        x = baseline_location("huber", v, lam=lam)
        assert huber_objective(v, lam, x) <= ref.fun + 1e-10


def test_huber_flat_minimum_returns_midpoint():
    # two far-apart points: every x between v1 + lam and v2 - lam is optimal
    assert baseline_location("huber", [0.0, 10.0], lam=1.0) == 5.0


@pytest.mark.parametrize("lam", np.logspace(-3, 3, 50))
def test_huber_never_zero(lam):
    v = np.r_[np.zeros(9), 10.0]
    assert abs(baseline_location("huber", v, lam=lam)) > 1e-9


def test_median_ridge_example():
    v = np.r_[np.zeros(9), 10.0]
    x = baseline_location("median_ridge", v, lam=0.5)
    assert x == pytest.approx(0.6, abs=1e-12)
    assert abs(x - v.mean()) <= 0.5


@given(values=st.lists(st.floats(-10, 10), min_size=1, max_size=25),
       lam=st.floats(1e-3, 20), seed=st.integers(0, 2 ** 16))
def test_median_ridge_within_lambda_of_mean(values, lam, seed):
    v = np.array(values)
    w = np.random.default_rng(seed).uniform(0.1, 3, v.size)
    x = baseline_location("median_ridge", v, w, lam=lam)
    assert abs(x - np.average(v, weights=w)) <= lam + 1e-12


def test_median_examples():
    assert baseline_location("median", 2.0 * np.arange(1, 8)) == 8.0
    assert baseline_location("median", [1.0, 2.0, 3.0, 4.0]) == 2.0  # lower median
    assert baseline_location("median", [1.0, 5.0], [1.0, 3.0]) == 5.0
    assert baseline_location("mean", [1.0, 3.0], [3.0, 1.0]) == 1.5


def test_baseline_errors():
    with pytest.raises(DomainError):
        baseline_location("median", [])
    with pytest.raises(DomainError):
        baseline_location("huber", [1.0, 2.0])
    with pytest.raises(DomainError):
        baseline_location("mode", [1.0])


def summaries_from(V, n=100):
    return [LocalSummary(row, row, n, 1.0) for row in np.atleast_2d(V)]


def test_aggregate_vector_single_node():
    v = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(aggregate_vector(summaries_from(v), AggregationSpec.constant(1, 3)), v)


def test_aggregate_vector_large_eta_is_mean():
    V = np.random.default_rng(0).normal(size=(6, 4))
    x = aggregate_vector(summaries_from(V), AggregationSpec.constant(1e6, 4))
    np.testing.assert_allclose(x, V.mean(axis=0), atol=1e-14)


def test_aggregate_vector_dimension_mismatch():
    s = summaries_from(np.zeros((2, 3))) + summaries_from(np.zeros(2))
    with pytest.raises(DomainError):
        aggregate_vector(s, AggregationSpec.constant(1, 3))


def test_aggregate_columns_matches_scalar():
    rng = np.random.default_rng(5)
    V = rng.normal(size=(9, 7)) * 4
    w = rng.uniform(1, 3, 9)
    x, unique = aggregate_columns(V, w, 2.0)
    for j in range(7):
        sol = aggregate_location(LocationProblem(V[:, j], w, 2.0))
        assert x[j] == sol.minimizer and unique[j] == sol.unique
