"""
Valuation-measure constructions
Factor risk, extreme measures, risk contributions and the expected-utility measure.
"""
import logging
from typing import Sequence

import numpy as np

from .errors import DomainError
from .scenario import (
    Factor,
    Measure,
    RandomVariable,
    check_aligned,
    conditional_expectation,
    conditional_expectation_multi,
)
from .spectral import DistortionFunction, RiskSpec, as_distortion, rho_wvar, sorted_increments

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12


def factor_risk(measure: RiskSpec, variable: RandomVariable, factor: Factor) -> float:
    """rho(E(X | Y))"""
    return rho_wvar(measure, conditional_expectation(variable, factor))


def multi_factor_risk(measure: RiskSpec, variable: RandomVariable, factors: Sequence[Factor]) -> float:
    """rho(E(X | Y^1, ..., Y^M)), conditioning on the joint factor values"""
    return rho_wvar(measure, conditional_expectation_multi(variable, factors))


def factor_risk_max(measure: RiskSpec, variable: RandomVariable, factors: Sequence[Factor]) -> float:
    """
    Risk for the valuation set conv_m E(D | Y^m)

    Args:
        measure: weighting measure
        variable: X
        factors: factors Y^1..Y^M, each used separately

    Returns:
        max_m rho(E(X | Y^m))
    """
    if not factors:
        raise DomainError("At least one factor is required")
    psi = as_distortion(measure)
    return max(factor_risk(psi, variable, f) for f in factors)


def ties_straddle_kink(psi: DistortionFunction, values: np.ndarray, order: np.ndarray, probs: np.ndarray) -> bool:
    """True when a block of tied values covers a kink of Psi, so the extreme set is not a singleton"""
    sorted_values = values[order]
    cumulative = np.concatenate(([0.0], np.cumsum(probs[order])))
    interior = psi.knots[1:-1]
    start = 0
    for t in range(1, sorted_values.size + 1):
        if t < sorted_values.size and sorted_values[t] == sorted_values[start]:
            continue
        if t - start > 1:
            lo, hi = cumulative[start], cumulative[t]
            if np.any((interior > lo + TIE_TOLERANCE) & (interior < hi - TIE_TOLERANCE)):
                return True
        start = t
    return False


def extreme_measure(measure: RiskSpec, wealth: RandomVariable) -> Measure:
    """
    Extreme measure of the determining set for a portfolio W

    The scenario of rank t (W ascending, ties in original order) receives
    Psi(z_t) - Psi(z_{t-1}). When tied values straddle a kink the set of extreme
    measures is not a singleton; the stable-order pick is returned with unique=False.

    Args:
        measure: weighting measure (or its distortion)
        wealth: portfolio P&L W

    Returns:
        Measure attaining inf E_Q W over the determining set
    """
    psi = as_distortion(measure)
    probs = wealth.space.probs
    order, increments = sorted_increments(psi, wealth.values, probs)
    masses = np.empty_like(increments)
    masses[order] = increments
    unique = not ties_straddle_kink(psi, wealth.values, order, probs)
    if not unique:
        logger.warning("Tied portfolio values straddle a kink of Psi: extreme measure is not unique")
    return Measure(wealth.space, masses, unique=unique)


def risk_contribution(measure: RiskSpec, variable: RandomVariable, wealth: RandomVariable) -> float:
    """
    Risk contribution of X to W: -E_Q X under the extreme measure of W

    Args:
        measure: weighting measure
        variable: trade P&L X
        wealth: portfolio P&L W

    Returns:
        rho^c(X; W)
    """
    check_aligned(variable, wealth)
    return -extreme_measure(measure, wealth).expectation(variable)


def factor_risk_contribution(
    measure: RiskSpec,
    variable: RandomVariable,
    factor: Factor,
    wealth: RandomVariable
) -> float:
    """rho^c(E(X | Y); E(W | Y))"""
    check_aligned(variable, wealth)
    return risk_contribution(
        measure,
        conditional_expectation(variable, factor),
        conditional_expectation(wealth, factor)
    )


def conditional_extreme_measure(measure: RiskSpec, wealth: RandomVariable, factor: Factor) -> Measure:
    """Extreme measure of E(W | Y), the valuation measure behind factor risk contribution"""
    return extreme_measure(measure, conditional_expectation(wealth, factor))


def utility_measure(risk_aversion: float, wealth: RandomVariable) -> Measure:
    """
    Marginal-utility measure c U'(W1) P for exponential utility U'(w) = exp(-gamma w)

    Args:
        risk_aversion: gamma > 0
        wealth: terminal wealth W1

    Returns:
        Normalized measure
    """
    if not risk_aversion > 0:
        raise DomainError(f"Risk aversion must be positive, got {risk_aversion!r}")
    exponents = np.log(wealth.space.probs) - risk_aversion * wealth.values
    # largest weight is exp(0)
    weights = np.exp(exponents - exponents.max())
    return Measure(wealth.space, weights / weights.sum())
