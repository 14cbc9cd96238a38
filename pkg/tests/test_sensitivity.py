import math

import numpy as np
import pytest

from coherent_deal.core.errors import DomainError
from coherent_deal.core.pricing import MarketModel, ValuationGroup, price_interval
from coherent_deal.core.scenario import ScenarioSpace
from coherent_deal.core.sensitivity import (
    Cashflow,
    bond_option_delta_payoff,
    call_delta_payoff,
    delta_interval,
)
from coherent_deal.core.spectral import make_tailvar, rho_wvar


@pytest.fixture
def growth():
    return ScenarioSpace.uniform(3).variable([0.9, 1.0, 1.1])


def test_call_delta_counts_the_kink(growth):
    delta = call_delta_payoff(100.0, 100.0, 0.0, 1.0, growth)
    np.testing.assert_allclose(delta.values, [0.0, 1.0, 1.1])


def test_call_delta_edge_strikes(growth):
    discount = math.exp(-0.05 * 2.0)
    np.testing.assert_allclose(call_delta_payoff(100.0, 0.0, 0.05, 2.0, growth).values, discount * growth.values)
    np.testing.assert_allclose(call_delta_payoff(100.0, 120.0, 0.05, 2.0, growth).values, 0.0)


def test_call_delta_domain(growth):
    with pytest.raises(DomainError):
        call_delta_payoff(0.0, 100.0, 0.0, 1.0, growth)
    with pytest.raises(DomainError):
        call_delta_payoff(100.0, 100.0, 0.0, -1.0, growth)


def test_bond_option_delta_single_cashflow():
    xi = ScenarioSpace.uniform(1).variable([1.0])
    delta = bond_option_delta_payoff(0.05, 0.0, 1.0, [Cashflow(2.0, 1.0)], 0.0, xi)
    assert delta.values[0] == pytest.approx(-math.exp(-0.1))


def test_bond_option_delta_out_of_the_money():
    xi = ScenarioSpace.uniform(2).variable([0.5, 1.5])
    schedule = [Cashflow(2.0, 0.05), Cashflow(3.0, 1.05)]
    np.testing.assert_allclose(bond_option_delta_payoff(0.03, 5.0, 1.0, schedule, 0.0, xi).values, 0.0)
    zeros = [Cashflow(2.0, 0.0), Cashflow(3.0, 0.0)]
    np.testing.assert_allclose(bond_option_delta_payoff(0.03, 0.0, 1.0, zeros, 0.0, xi).values, 0.0)


def test_bond_option_delta_with_shape_terms():
    xi = ScenarioSpace.uniform(1).variable([2.0])
    schedule = [Cashflow(1.5, 1.0, shape=0.01)]
    delta = bond_option_delta_payoff(0.02, 0.0, 0.5, schedule, 0.005, xi)
    expected = -math.exp(-0.5 * 0.025) * 1.0 * math.exp(-0.04 - 0.01)
    assert delta.values[0] == pytest.approx(expected)


def test_bond_option_delta_domain():
    xi = ScenarioSpace.uniform(1).variable([1.0])
    with pytest.raises(DomainError):
        bond_option_delta_payoff(0.05, 0.0, 1.0, [], 0.0, xi)
    with pytest.raises(DomainError):
        bond_option_delta_payoff(0.05, 0.0, 2.0, [Cashflow(2.0, 1.0)], 0.0, xi)
    # nonpositive rates are accepted
    bond_option_delta_payoff(-0.01, 0.0, 1.0, [Cashflow(2.0, 1.0)], 0.0, xi)


def test_delta_interval_delegates(growth):
    space = growth.space
    market = MarketModel(space, {"S": space.variable([-0.1, 0.0, 0.1])})
    groups = [ValuationGroup.from_wvar(make_tailvar(0.5))]
    delta = call_delta_payoff(100.0, 95.0, 0.01, 1.0, growth)
    for mode in ("conv", "max"):
        assert delta_interval(market, groups, delta, mode) == price_interval(market, groups, delta, mode)


def test_delta_interval_cases():
    space = ScenarioSpace.uniform(2)
    complete = MarketModel(space, {"X": space.variable([1.0, -1.0])})
    groups = [ValuationGroup.from_wvar(make_tailvar(0.5))]
    xi = space.variable([0.8, 1.2])
    delta = call_delta_payoff(100.0, 100.0, 0.0, 1.0, xi)
    interval = delta_interval(complete, groups, delta)
    assert interval.width <= 1e-9
    assert interval.upper == pytest.approx(0.6, abs=1e-9)

    bare = MarketModel(space, {})
    interval = delta_interval(bare, groups, delta)
    assert interval.upper == pytest.approx(rho_wvar(make_tailvar(0.5), -delta), abs=1e-9)
    assert interval.lower == pytest.approx(-rho_wvar(make_tailvar(0.5), delta), abs=1e-9)

    constant = delta_interval(complete, groups, space.constant(0.7))
    assert constant.lower == pytest.approx(0.7, abs=1e-9)
    assert constant.upper == pytest.approx(0.7, abs=1e-9)


def test_call_delta_interval_bounds():
    rng = np.random.default_rng(8)
    for _ in range(20):
        space = ScenarioSpace.uniform(6)
        xi = space.variable(rng.uniform(0.7, 1.3, size=6))
        market = MarketModel(space, {"S": xi - xi.mean()})
        groups = [ValuationGroup.from_wvar(make_tailvar(float(rng.uniform(0.2, 1.0))))]
        rate, expiry = 0.02, 0.5
        interval = delta_interval(market, groups, call_delta_payoff(100.0, 100.0, rate, expiry, xi))
        assert interval.lower >= -1e-9
        assert interval.upper <= math.exp(-rate * expiry) * xi.values.max() + 1e-9
