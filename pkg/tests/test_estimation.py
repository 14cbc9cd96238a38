import numpy as np
import pytest

from coherent_deal.core.errors import DomainError, ShapeError
from coherent_deal.core.estimation import (
    EmpiricalValuation,
    equal_frequency_bins,
    est_alpha_var,
    est_beta_var,
    est_factor_risk,
    est_factor_risk_contribution,
    est_risk_contribution,
    est_sup_expectation,
    est_upper_price,
    est_wvar,
)
from coherent_deal.core.spectral import make_alphavar_grid, make_tailvar


def _stratified(size):
    return (np.arange(size) + 0.5) / size


def test_est_wvar_examples():
    half = make_tailvar(0.5)
    assert est_wvar(_stratified(1000), half) == pytest.approx(-0.25)
    assert est_wvar([3.0, 1.0, 2.0], make_tailvar(1.0)) == pytest.approx(-2.0)
    assert est_wvar([4.0, -1.0, 7.0, 0.0], make_tailvar(0.25)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        est_wvar([], half)
    with pytest.raises(DomainError):
        est_wvar([1.0, np.inf], half)


def test_bootstrap_uniform_examples():
    samples = _stratified(1000)
    assert est_alpha_var(samples, 2, 20000, 7).estimate == pytest.approx(-1.0 / 3.0, abs=0.01)
    assert est_alpha_var(samples, 3, 20000, 7).estimate == pytest.approx(-0.25, abs=0.01)
    assert est_beta_var(samples, 3, 3, 20000, 7).estimate == pytest.approx(-0.5, abs=0.01)
    assert est_beta_var(samples, 3, 2, 20000, 7).estimate == pytest.approx(-0.375, abs=0.01)
    assert est_alpha_var(samples, 2, 20000, 7).std_error < 0.005


def test_bootstrap_is_reproducible_across_threads():
    samples = np.random.default_rng(3).normal(size=500)
    single = est_beta_var(samples, 5, 2, 20000, 42, threads=1)
    pooled = est_beta_var(samples, 5, 2, 20000, 42, threads=4)
    assert single == pooled
    assert est_beta_var(samples, 5, 2, 20000, 43).estimate != single.estimate


def test_bootstrap_edge_cases():
    estimate = est_alpha_var([2.5] * 10, 4, 100, 1)
    assert estimate.estimate == -2.5
    assert estimate.std_error == 0.0
    with pytest.raises(DomainError):
        est_beta_var([1.0, 2.0], 2, 3, 100, 1)
    with pytest.raises(DomainError):
        est_alpha_var([1.0, 2.0], 0, 100, 1)
    with pytest.raises(DomainError):
        est_alpha_var([1.0, 2.0], 2, 0, 1)


def test_risk_contribution_estimate():
    pairs = list(zip([10.0, 20.0, 30.0, 40.0], [4.0, 1.0, 3.0, 2.0]))
    estimate = est_risk_contribution(pairs, make_tailvar(0.5))
    assert estimate.value == pytest.approx(30.0)
    assert estimate.unique
    tied = list(zip([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 2.0, 3.0]))
    assert not est_risk_contribution(tied, make_tailvar(0.5)).unique
    with pytest.raises(ShapeError):
        est_risk_contribution([[1.0, 2.0, 3.0]], make_tailvar(0.5))


def test_equal_frequency_bins():
    np.testing.assert_array_equal(equal_frequency_bins(np.array([3.0, 1.0, 4.0, 2.0]), 2), [1, 0, 1, 0])
    # ties share the bin of their first occurrence
    np.testing.assert_array_equal(equal_frequency_bins(np.array([1.0, 1.0, 1.0, 2.0]), 2), [0, 0, 0, 1])
    with pytest.raises(DomainError):
        equal_frequency_bins(np.array([1.0, 2.0]), 3)


def test_factor_estimates():
    half = make_tailvar(0.5)
    pairs = list(zip([1.0, 3.0, 5.0, 7.0], [0.0, 0.0, 1.0, 1.0]))
    assert est_factor_risk(pairs, half, 2) == pytest.approx(-2.0)
    assert est_factor_risk(pairs, half, 4) == pytest.approx(est_wvar([1.0, 3.0, 5.0, 7.0], half))
    triples = list(zip([1.0, 3.0, 5.0, 7.0], [0.0, 0.0, 1.0, 1.0], [7.0, 5.0, 3.0, 1.0]))
    # g = (6, 6, 2, 2) puts the mass on the second bin where f = 6
    assert est_factor_risk_contribution(triples, half, 2).value == pytest.approx(6.0)


def test_empirical_valuation_kinds():
    half = make_tailvar(0.5)
    x = np.array([1.0, 3.0, 5.0, 7.0])
    assert EmpiricalValuation(half).sup_expectation(x) == pytest.approx(6.0)
    factor = EmpiricalValuation(half, "factor", factor=np.array([0.0, 0.0, 1.0, 1.0]), bins=2)
    assert factor.sup_expectation(x) == pytest.approx(6.0)
    contribution = EmpiricalValuation(half, "contribution", wealth=np.array([4.0, 1.0, 3.0, 2.0]))
    assert contribution.sup_expectation(x) == pytest.approx(5.0)
    with pytest.raises(DomainError):
        EmpiricalValuation(half, "utility")
    with pytest.raises(DomainError):
        EmpiricalValuation(half, "factor")
    with pytest.raises(ShapeError):
        contribution.sup_expectation(x[:3])


def test_sup_expectation_over_a_hull():
    x = np.array([1.0, 3.0, 5.0, 7.0])
    group = [EmpiricalValuation(make_tailvar(1.0)), EmpiricalValuation(make_tailvar(0.5))]
    assert est_sup_expectation(x, group) == pytest.approx(6.0)
    assert est_sup_expectation(x, make_tailvar(1.0)) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        est_sup_expectation(x, [])


def test_upper_price_over_candidates():
    half = make_tailvar(0.5)
    claim = [1.0, 0.0]
    grid = [[h, -h] for h in (0.0, 0.25, 1.0)]
    assert est_upper_price(claim, [], [half]) == pytest.approx(1.0)
    assert est_upper_price(claim, grid, [half]) == pytest.approx(0.75)
    assert est_upper_price(claim, grid + [[0.5, -0.5]], [half]) == pytest.approx(0.5)
    assert est_upper_price(claim, grid, half) == pytest.approx(0.75)
    with pytest.raises(ShapeError):
        est_upper_price(claim, [[1.0, 2.0, 3.0]], [half])
    with pytest.raises(DomainError):
        est_upper_price(claim, grid, [])


@pytest.mark.slow
def test_bootstrap_matches_the_alphavar_grid():
    samples = np.random.default_rng(11).normal(size=5000)
    for alpha in (2, 4):
        boot = est_alpha_var(samples, alpha, 200000, 5, threads=4)
        plug_in = est_wvar(samples, make_alphavar_grid(float(alpha), 400))
        assert boot.estimate == pytest.approx(plug_in, abs=0.02)


@pytest.mark.slow
def test_large_sample_wvar_converges():
    samples = np.random.default_rng(12).uniform(size=200000)
    assert est_wvar(samples, make_tailvar(0.2)) == pytest.approx(-0.1, abs=0.005)


@pytest.mark.slow
@pytest.mark.parametrize("alpha, beta, expected", [(2, 1, -1.0 / 3.0), (3, 1, -0.25), (3, 2, -0.375)])
def test_bootstrap_uniform_within_three_standard_errors(alpha, beta, expected):
    samples = _stratified(100000)
    result = est_beta_var(samples, alpha, beta, 100000, 2024, threads=4)
    assert result.std_error > 0
    assert abs(result.estimate - expected) <= 3.0 * result.std_error


@pytest.mark.slow
def test_standard_error_scales_with_resamples():
    samples = np.random.default_rng(21).normal(size=2000)
    single = est_alpha_var(samples, 3, 20000, 5)
    double = est_alpha_var(samples, 3, 40000, 6)
    ratio = (double.std_error / single.std_error) ** 2
    assert ratio == pytest.approx(0.5, rel=0.2)
