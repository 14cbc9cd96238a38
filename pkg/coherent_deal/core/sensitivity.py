"""
Sensitivities
Scenario-wise payoff derivatives and the intervals of deltas they induce.
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .pricing import MarketModel, PriceInterval, ValuationGroup, price_interval
from .scenario import RandomVariable

logger = logging.getLogger(__name__)


def call_delta_payoff(
    spot: float,
    strike: float,
    rate: float,
    expiry: float,
    xi: RandomVariable
) -> RandomVariable:
    """
    Derivative in S of the discounted call payoff e^{-rT}(S xi - K)^+

    Args:
        spot: S > 0
        strike: K
        rate: r per year
        expiry: T >= 0 in years
        xi: terminal growth factor, independent of S

    Returns:
        e^{-rT} xi 1{xi >= K / S} per scenario
    """
    if not spot > 0:
        raise DomainError(f"Spot price must be positive, got {spot!r}")
    if not expiry >= 0:
        raise DomainError(f"Expiry must be nonnegative, got {expiry!r}")
    discount = math.exp(-rate * expiry)
    in_money = xi.values >= strike / spot
    return RandomVariable(xi.space, np.where(in_money, discount * xi.values, 0.0))


@dataclass(frozen=True)
class Cashflow:
    """Bond coupon c_n paid at T_n; shape is the tabulated phi(T_n - T)"""

    time: float
    amount: float
    shape: float = 0.0


def bond_option_delta_payoff(
    short_rate: float,
    strike: float,
    expiry: float,
    schedule: Sequence[Cashflow],
    expiry_shape: float,
    xi: RandomVariable
) -> RandomVariable:
    """
    Derivative in r of a call on a coupon bond under the rate model r_t = r xi

    Each cashflow discounts as f_n(r) = exp(-(T_n - T) r - (T_n - T) phi(T_n - T)).

    Args:
        short_rate: r(0)
        strike: K
        expiry: option expiry T
        schedule: cashflows after T
        expiry_shape: phi(T), so that r(0, T) = r(0) + phi(T)
        xi: rate factor per scenario

    Returns:
        e^{-T r(0,T)} sum_n c_n f_n'(r xi) 1{sum_n c_n f_n(r xi) >= K} per scenario
    """
    if not schedule:
        raise DomainError("Bond schedule must contain at least one cashflow")
    if not expiry >= 0:
        raise DomainError(f"Expiry must be nonnegative, got {expiry!r}")
    first = min(c.time for c in schedule)
    if not expiry < first:
        raise DomainError(f"Option expiry {expiry!r} must precede the first cashflow at {first!r}")
    if short_rate <= 0:
        logger.debug("Nonpositive short rate %s: the exercise region may invert", short_rate)

    rates = short_rate * xi.values
    bond = np.zeros_like(rates)
    slope = np.zeros_like(rates)
    for cashflow in schedule:
        tau = cashflow.time - expiry
        discount = np.exp(-tau * rates - tau * cashflow.shape)
        bond += cashflow.amount * discount
        slope -= cashflow.amount * tau * discount
    front = math.exp(-expiry * (short_rate + expiry_shape))
    return RandomVariable(xi.space, np.where(bond >= strike, front * slope, 0.0))


def delta_interval(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    derivative: RandomVariable,
    mode: str = "conv",
    tolerance: float = 1e-9
) -> PriceInterval:
    """
    Interval of deltas: the price interval of the payoff derivative

    Args:
        market: market model
        groups: valuation groups
        derivative: scenario-wise payoff derivative
        mode: 'conv' or 'max'

    Returns:
        Interval {E_Q derivative : Q fair}
    """
    return price_interval(market, groups, derivative, mode, tolerance)
