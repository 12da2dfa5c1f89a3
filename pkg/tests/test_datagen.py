import numpy as np
import pytest

from intreg.datagen import (CUTOFF, DESIGN, ParseError, Scenario, block_coefficients,
                            dump_dataset, gen_design, gen_scenario, latent_design,
                            load_dataset, stream)
from intreg.model import Dataset, DomainError


def test_cutoff_is_upper_quartile():
    assert CUTOFF == pytest.approx(0.6744897501960817, abs=1e-15)


def test_codomain_and_determinism():
    X = gen_design(300, 130, seed=4)
    assert set(np.unique(X)) <= {-1.0, 0.0, 1.0}
    np.testing.assert_array_equal(X, gen_design(300, 130, seed=4))
    assert not np.array_equal(X, gen_design(300, 130, seed=5))


def test_iid_coordinate_frequencies():
    X = gen_design(10000, 105, seed=0)
    p_plus = (X[:, 100:] == 1).mean(axis=0)
    p_minus = (X[:, 100:] == -1).mean(axis=0)
    assert np.all(np.abs(p_plus - 0.25) <= 0.02)
    assert np.all(np.abs(p_minus - 0.25) <= 0.02)


def test_latent_ar1_structure():
    z = latent_design(10000, 120, stream(0, 0, DESIGN))
    lag1 = [np.corrcoef(z[:, j], z[:, j + 1])[0, 1] for j in range(99)]
    assert np.all(np.abs(np.array(lag1) - 0.75) <= 0.05)
    assert np.all(np.abs(z[:, :100].std(axis=0) - 1) <= 0.05)
    # the iid block is uncorrelated with its neighbour
    assert abs(np.corrcoef(z[:, 100], z[:, 101])[0, 1]) <= 0.05


def test_coefficient_blocks_match_literal_matrix():
    truth = block_coefficients(10, 12)
    row_plus = [5] * 5 + [5] * 5 + [0, 0]
    row_minus = [5] * 5 + [-5] * 5 + [0, 0]
    row_out = [5] * 5 + [-5] * 5 + [40, 40]
    expected = np.array([row_plus] * 5 + [row_minus] * 4 + [row_out], dtype=float)
    np.testing.assert_array_equal(truth.local_coefs, expected)
    np.testing.assert_array_equal(truth.global_coef, [5] * 5 + [0] * 7)


def test_grow_m_four_machines():
    _, truth, eta = gen_scenario(Scenario("grow_m", m=4, n=20, d=15, seed=0))
    C = truth.local_coefs
    assert np.all(C[:2, 5:10] == 5) and np.all(C[2:, 5:10] == -5)
    assert np.all(C[3, 10:12] == 40) and np.all(C[:3, 10:12] == 0)
    assert eta == 5.0


def test_truth_identity():
    _, truth, _ = gen_scenario(Scenario("grow_n", m=6, n=20, d=30, seed=1))
    np.testing.assert_array_equal(truth.global_coef + truth.local_deltas, truth.local_coefs)


def test_shared_coordinate_aggregates_to_five():
    from intreg.aggregate import LocationProblem, aggregate_location
    _, truth, eta = gen_scenario(Scenario("grow_n", m=10, n=20, d=12, seed=0))
    assert aggregate_location(LocationProblem.of(truth.local_coefs[:, 2], eta=eta)).minimizer == 5.0


def test_responses_follow_model():
    data, truth, _ = gen_scenario(Scenario("grow_n", m=3, n=5000, d=20, noise_sd=0.05, seed=2))
    for ds, coef in zip(data, truth.local_coefs):
        resid = ds.response - ds.design @ coef
        assert abs(resid.std() - 0.05) < 0.003


def test_per_node_sizes_and_ids():
    data, _, _ = gen_scenario(Scenario("grow_n", m=3, n=[30, 40, 50], d=12, seed=0))
    assert [ds.n for ds in data] == [30, 40, 50]
    assert [ds.node_id for ds in data] == [0, 1, 2]


def test_reproducible():
    a, _, _ = gen_scenario(Scenario("grow_m", m=4, n=30, d=20, seed=9))
    b, _, _ = gen_scenario(Scenario("grow_m", m=4, n=30, d=20, seed=9))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.design, y.design)
        np.testing.assert_array_equal(x.response, y.response)


def test_scenario_validation():
    with pytest.raises(DomainError):
        Scenario("grow_n", m=3, n=10, d=11)
    with pytest.raises(DomainError):
        Scenario("grow_x", m=3, n=10, d=20)


def test_location_scenarios():
    data, truth, _ = gen_scenario(Scenario("median_fail_1d", m=11, n=50, noise_sd=1.0, seed=0))
    np.testing.assert_array_equal(truth.local_coefs[:, 0], 2.0 * np.arange(1, 12))
    assert data[0].d == 1 and data[0].n == 50
    data, truth, eta = gen_scenario(Scenario("cluster_1d", m=10, n=50, noise_sd=0.1, seed=0))
    from intreg.aggregate import check_cluster_assumption
    assert check_cluster_assumption(truth.local_coefs[:, 0] + 1e-3 * np.arange(10), None, eta,
                                    0.4).holds


def test_text_round_trip(tmp_path):
    data, _, _ = gen_scenario(Scenario("grow_n", m=1, n=7, d=13, seed=3))
    p = tmp_path / "node.txt"
    dump_dataset(data[0], p)
    back = load_dataset(p)
    np.testing.assert_array_equal(back.design, data[0].design)
    np.testing.assert_array_equal(back.response, data[0].response)


@pytest.mark.parametrize("text,line", [("3\n", 1), ("a b\n", 1), ("1 2\n1 2\n", 2),
                                       ("2 1\n1 2\n1 x\n", 3), ("2 1\n1 2\n", 2)])
def test_parse_errors_name_line(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as err:
        load_dataset(p)
    assert err.value.line == line
