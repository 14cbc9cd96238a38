"""
Core module
"""

from .config import Config
from .errors import (
    CoherentDealError,
    ConditioningError,
    DomainError,
    NsaoViolation,
    ParseError,
    ShapeError,
    SizeError
)
from .scenario import Measure, RandomVariable, ScenarioSpace, load_scenarios
from .spectral import DistortionFunction, WeightingMeasure, rho_wvar
from .algebra import convolve_wvar, minimal_concave_majorant
from .lp import LinearProgram, LpOutcome, solve
from .pricing import (
    MarketModel,
    PositionConstraint,
    PriceInterval,
    TranchePlan,
    ValuationGroup,
    price_interval_conv,
    price_interval_max
)

__all__ = [
    "Config",
    "CoherentDealError",
    "ConditioningError",
    "DomainError",
    "NsaoViolation",
    "ParseError",
    "ShapeError",
    "SizeError",
    "Measure",
    "RandomVariable",
    "ScenarioSpace",
    "load_scenarios",
    "DistortionFunction",
    "WeightingMeasure",
    "rho_wvar",
    "convolve_wvar",
    "minimal_concave_majorant",
    "LinearProgram",
    "LpOutcome",
    "solve",
    "MarketModel",
    "PositionConstraint",
    "PriceInterval",
    "TranchePlan",
    "ValuationGroup",
    "price_interval_conv",
    "price_interval_max"
]
