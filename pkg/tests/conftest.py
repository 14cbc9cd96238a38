"""
Shared fixtures: the two-measure worked example, small complete/incomplete
markets and random instance factories.
"""
import numpy as np
import pytest

from coherent_deal.core.pricing import MarketModel, ValuationGroup
from coherent_deal.core.scenario import ScenarioSpace
from coherent_deal.core.spectral import WeightingMeasure, make_tailvar


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: large-sample estimator checks")


@pytest.fixture
def mu1():
    """1/2 delta_{1/3} + 1/2 delta_1"""
    return WeightingMeasure([1.0 / 3.0, 1.0], [0.5, 0.5])


@pytest.fixture
def mu2():
    """delta_{2/3}"""
    return make_tailvar(2.0 / 3.0)


@pytest.fixture
def two_point_market():
    space = ScenarioSpace.uniform(2)
    return MarketModel(space, {"X": space.variable([1.0, -1.0])})


@pytest.fixture
def three_point_market():
    space = ScenarioSpace.uniform(3)
    return MarketModel(space, {"X": space.variable([1.0, 0.0, -1.0])})


@pytest.fixture
def free_money_market():
    space = ScenarioSpace.uniform(2)
    return MarketModel(space, {"X": space.variable([1.0, 1.0])})


@pytest.fixture
def tail_half():
    return ValuationGroup.from_wvar(make_tailvar(0.5), "tailvar:0.5")


def _random_measure(rng, max_atoms=4):
    count = int(rng.integers(1, max_atoms + 1))
    levels = rng.choice(np.arange(50, 1001), size=count, replace=False) / 1000.0
    weights = rng.dirichlet(np.full(count, 2.0))
    return WeightingMeasure.from_atoms(zip(levels, weights))


def _random_space(rng, size):
    return ScenarioSpace(tuple(str(i) for i in range(size)), rng.dirichlet(np.full(size, 3.0)))


def _random_market(rng, size, assets):
    """Assets centred under P, so P is risk-neutral and NSAO holds for every group"""
    space = _random_space(rng, size)
    columns = {}
    for i in range(assets):
        raw = rng.normal(size=size)
        columns[f"X{i}"] = space.variable(raw - np.dot(space.probs, raw))
    return MarketModel(space, columns)


@pytest.fixture
def random_measure():
    return _random_measure


@pytest.fixture
def random_space():
    return _random_space


@pytest.fixture
def random_market():
    return _random_market
