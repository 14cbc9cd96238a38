"""
Pricing and hedging
No-arbitrage checks, good-deal price intervals, superreplication tranches and
volume-dependent price curves on a one-period scenario market.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .algebra import convolve_wvar, lower_envelope, merged_grid, weighting_measure
from .errors import ConditioningError, DomainError, NsaoViolation, ShapeError, SizeError
from .lp import INFEASIBLE, UNBOUNDED, Bound, LinearProgram, solve
from .scenario import Measure, RandomVariable, ScenarioSpace, check_aligned
from .spectral import DistortionFunction, WeightingMeasure, distortion, rho_wvar
from .transforms import extreme_measure, utility_measure

logger = logging.getLogger(__name__)

MODES = ("conv", "max")
SIDES = ("upper", "lower")
VALUE_TOLERANCE = 1e-9
ACTIVE_TOLERANCE = 1e-12
CUT_TOLERANCE = 1e-9
PLAN_TOLERANCE = 1e-10
DEFAULT_BRUTEFORCE_CAP = 14


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise DomainError(f"Mode must be one of {MODES}, got {mode!r}")


@dataclass(frozen=True, eq=False)
class PositionConstraint:
    """Admissible positions h: all of R^d, or a box lower <= h <= upper containing 0"""

    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if (self.lower is None) != (self.upper is None):
            raise DomainError("A box constraint needs both lower and upper bounds")
        if self.lower is None:
            return
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper):
            raise ShapeError(f"{len(lower)} lower bounds for {len(upper)} upper bounds")
        for lo, hi in zip(lower, upper):
            if np.isnan(lo) or np.isnan(hi) or not lo <= 0.0 <= hi:
                raise DomainError(f"Box bounds [{lo}, {hi}] must contain the zero trade")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cone(cls) -> "PositionConstraint":
        return cls()

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "PositionConstraint":
        return cls(tuple(lower), tuple(upper))

    @property
    def is_box(self) -> bool:
        return self.lower is not None

    @property
    def is_cone(self) -> bool:
        """True when every bound is 0 or infinite, so the admissible set is a cone"""
        if not self.is_box:
            return True
        return all(v == 0.0 or np.isinf(v) for v in self.lower + self.upper)

    def bounds(self, count: int) -> List[Bound]:
        if not self.is_box:
            return [(None, None)] * count
        if len(self.lower) != count:
            raise ShapeError(f"Box has {len(self.lower)} bounds for {count} assets")
        return [
            (None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
            for lo, hi in zip(self.lower, self.upper)
        ]

    def scaled(self, factor: float) -> "PositionConstraint":
        """Box multiplied by a positive factor; cones are scale invariant"""
        if not self.is_box:
            return self
        return PositionConstraint.box(
            [lo * factor for lo in self.lower],
            [hi * factor for hi in self.upper]
        )

    def to_dict(self) -> Dict[str, Any]:
        if not self.is_box:
            return {"type": "cone"}
        return {"type": "box", "lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Discounted P&Ls X^i of the traded assets and the admissible positions"""

    space: ScenarioSpace
    assets: Mapping[str, RandomVariable]
    constraint: PositionConstraint = field(default_factory=PositionConstraint.cone)

    def __post_init__(self):
        assets = dict(self.assets)
        for name, variable in assets.items():
            if variable.space.size != self.space.size:
                raise ShapeError(f"Asset {name!r} has {variable.space.size} values for {self.space.size} scenarios")
        if self.constraint.is_box and len(self.constraint.lower) != len(assets):
            raise ShapeError(f"Box has {len(self.constraint.lower)} bounds for {len(assets)} assets")
        object.__setattr__(self, "assets", assets)

    @property
    def names(self) -> List[str]:
        return list(self.assets)

    @property
    def matrix(self) -> np.ndarray:
        """Asset values as a (d, |Omega|) array"""
        if not self.assets:
            return np.zeros((0, self.space.size))
        return np.vstack([v.values for v in self.assets.values()])

    def portfolio(self, hedge: Sequence[float]) -> RandomVariable:
        """P&L sum_i h_i X^i of a position"""
        hedge = np.asarray(hedge, dtype=float)
        if hedge.size != len(self.assets):
            raise ShapeError(f"Position has {hedge.size} entries for {len(self.assets)} assets")
        return RandomVariable(self.space, hedge @ self.matrix)

    def with_constraint(self, constraint: PositionConstraint) -> "MarketModel":
        return MarketModel(self.space, self.assets, constraint)


@dataclass(frozen=True, eq=False)
class ValuationGroup:
    """
    One group of valuation measures: the determining set of a Weighted V@R, or the
    convex hull of an explicit list of measures
    """

    wvar: Optional[WeightingMeasure] = None
    measures: Tuple[Measure, ...] = ()
    label: str = ""

    def __post_init__(self):
        measures = tuple(self.measures)
        if (self.wvar is None) == (not measures):
            raise DomainError("A valuation group holds either a weighting measure or a nonempty measure list")
        if measures:
            sizes = {q.space.size for q in measures}
            if len(sizes) > 1:
                raise ShapeError("Measures of one group live on different spaces")
        object.__setattr__(self, "measures", measures)

    @classmethod
    def from_wvar(cls, measure: WeightingMeasure, label: str = "") -> "ValuationGroup":
        return cls(wvar=measure, label=label)

    @classmethod
    def from_measures(cls, measures: Sequence[Measure], label: str = "") -> "ValuationGroup":
        return cls(measures=tuple(measures), label=label)

    @classmethod
    def from_extreme(cls, measure: WeightingMeasure, wealth: RandomVariable, label: str = "") -> "ValuationGroup":
        """Single extreme measure of a portfolio W"""
        return cls(measures=(extreme_measure(measure, wealth),), label=label)

    @classmethod
    def from_utility(cls, risk_aversion: float, wealth: RandomVariable, label: str = "") -> "ValuationGroup":
        """Single marginal-utility measure of terminal wealth"""
        return cls(measures=(utility_measure(risk_aversion, wealth),), label=label)

    @classmethod
    def combine(cls, groups: Sequence["ValuationGroup"], label: str = "") -> "ValuationGroup":
        """Convex hull of the union of several explicit groups"""
        if not groups:
            raise DomainError("Nothing to combine")
        if any(g.is_wvar for g in groups):
            raise DomainError("Only explicit measure lists can be combined")
        return cls(measures=tuple(q for g in groups for q in g.measures), label=label)

    @property
    def is_wvar(self) -> bool:
        return self.wvar is not None

    def distortion(self) -> DistortionFunction:
        if not self.is_wvar:
            raise DomainError("Explicit measure groups have no distortion function")
        return distortion(self.wvar)

    def risk(self, variable: RandomVariable) -> float:
        """-inf E_Q X over the group"""
        if self.is_wvar:
            return rho_wvar(self.wvar, variable)
        return max(-q.expectation(variable) for q in self.measures)

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"label": self.label}
        if self.is_wvar:
            payload["wvar"] = self.wvar.to_spec()
        else:
            payload["measures"] = [q.masses.tolist() for q in self.measures]
        return payload


@dataclass(frozen=True)
class PriceInterval:
    """Interval of fair prices with the positions attaining each bound"""

    lower: float
    upper: float
    hedge_upper: Optional[Tuple[float, ...]] = None
    hedge_lower: Optional[Tuple[float, ...]] = None
    mode: str = "conv"
    asset_names: Tuple[str, ...] = ()

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, tolerance: float = VALUE_TOLERANCE) -> bool:
        return self.lower - tolerance <= value <= self.upper + tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": [self.lower, self.upper],
            "hedge_upper": None if self.hedge_upper is None else list(self.hedge_upper),
            "hedge_lower": None if self.hedge_lower is None else list(self.hedge_lower),
            "assets": list(self.asset_names),
            "mode": self.mode,
        }


@dataclass(frozen=True)
class NsaoResult:
    holds: bool
    certificate: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"nsao": "holds" if self.holds else "violated", "certificate": self.certificate or None}


def _check_groups(groups: Sequence[ValuationGroup], space: ScenarioSpace) -> None:
    if not groups:
        raise DomainError("At least one valuation group is required")
    for g in groups:
        for q in g.measures:
            if q.space.size != space.size:
                raise ShapeError(f"Group {g.label!r} has measures on {q.space.size} scenarios, market has {space.size}")


def _effective_measure(measure: WeightingMeasure, probs: np.ndarray) -> WeightingMeasure:
    """
    Weighted V@R with the same risk on every variable of the given space

    Risk only reads Psi at subset sums of the scenario probabilities, so Psi can be
    replaced by its interpolation there whenever that grid is coarser than Psi.
    """
    limit = len(measure) + 1
    sums = np.zeros(1)
    for p in probs:
        sums = np.unique(np.round(np.concatenate([sums, sums + p]), 12))
        if sums.size > limit:
            return measure
    sums = np.clip(sums, 0.0, 1.0)
    sums[-1] = 1.0
    psi = distortion(measure)
    reduced = weighting_measure(DistortionFunction(sums, psi(sums)))
    if len(reduced) >= len(measure):
        return measure
    logger.debug("Reduced weighting measure from %d to %d atoms", len(measure), len(reduced))
    return reduced


def _hedge_certificate(market: MarketModel, direction: np.ndarray, **extra: Any) -> Dict[str, Any]:
    hedge = np.asarray(direction, dtype=float)
    scale = float(np.max(np.abs(hedge), initial=0.0))
    if scale > 0:
        hedge = hedge / scale
    certificate: Dict[str, Any] = {"source": "primal", "hedge": dict(zip(market.names, hedge.tolist()))}
    certificate.update(extra)
    return certificate


def _upper_program(
    market: MarketModel,
    claim: np.ndarray,
    measures: Sequence[WeightingMeasure],
    explicit: Sequence[np.ndarray],
    epigraph: bool
) -> LinearProgram:
    """
    CVaR linear program for min_h rho(sum_i h_i X^i - F)

    Each Tail V@R atom uses rho_lambda(Y) = min_c {-c + E(c - Y)^+ / lambda} with
    u_kj >= c_k - Y_j. With epigraph=True the objective is a scalar t bounding every
    group's risk from above.
    """
    matrix = market.matrix
    d, m = matrix.shape
    probs = market.space.probs
    sizes = [len(mu) for mu in measures]
    n_cols = d + sum(k * (1 + m) for k in sizes) + (1 if epigraph else 0)

    rows: List[np.ndarray] = []
    rhs: List[np.ndarray] = []
    bounds: List[Bound] = list(market.constraint.bounds(d))
    group_objectives: List[np.ndarray] = []
    col = d
    for mu, size in zip(measures, sizes):
        c_cols = col + np.arange(size)
        u_start = col + size
        block = np.zeros((size * m, n_cols))
        scenario = np.arange(m)
        for k in range(size):
            block[k * m + scenario, c_cols[k]] = 1.0
            block[k * m + scenario, :d] = -matrix.T
            block[k * m + scenario, u_start + k * m + scenario] = -1.0
        rows.append(block)
        rhs.append(np.tile(-claim, size))
        objective = np.zeros(n_cols)
        objective[c_cols] = -mu.weights
        objective[u_start:u_start + size * m] = np.outer(mu.weights / mu.levels, probs).ravel()
        group_objectives.append(objective)
        bounds.extend([(None, None)] * size + [(0.0, None)] * (size * m))
        col = u_start + size * m

    if epigraph:
        t = n_cols - 1
        bounds.append((None, None))
        for objective in group_objectives:
            row = objective.copy()
            row[t] = -1.0
            rows.append(row[None, :])
            rhs.append(np.zeros(1))
        for masses in explicit:
            row = np.zeros(n_cols)
            row[:d] = -(matrix @ masses)
            row[t] = -1.0
            rows.append(row[None, :])
            rhs.append(np.array([-(masses @ claim)]))
        objective = np.zeros(n_cols)
        objective[t] = 1.0
    else:
        objective = group_objectives[0]

    return LinearProgram(
        objective,
        ub_matrix=np.vstack(rows) if rows else None,
        ub_rhs=np.concatenate(rhs) if rhs else None,
        bounds=bounds
    )


def _solve_upper(
    market: MarketModel,
    claim: np.ndarray,
    measures: Sequence[WeightingMeasure],
    explicit: Sequence[np.ndarray],
    epigraph: bool,
    tolerance: float
) -> Tuple[float, np.ndarray]:
    lp = _upper_program(market, claim, measures, explicit, epigraph)
    outcome = solve(lp, tolerance)
    d = len(market.assets)
    if outcome.status == UNBOUNDED:
        logger.warning("Pricing LP unbounded: strictly acceptable opportunities exist")
        raise NsaoViolation(
            "NSAO violated: risk can be made arbitrarily negative",
            certificate=_hedge_certificate(market, outcome.ray[:d])
        )
    if outcome.status == INFEASIBLE:
        raise ConditioningError("Pricing LP reported infeasible although the zero trade is admissible")
    return outcome.objective, outcome.x[:d]


def _upper_value(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    claim: np.ndarray,
    mode: str,
    tolerance: float,
    bruteforce_cap: int
) -> Tuple[float, Optional[np.ndarray]]:
    """V(F) from the primal LP, or from the dual oracle for explicit groups in conv mode"""
    probs = market.space.probs
    if mode == "conv":
        if all(g.is_wvar for g in groups):
            combined = _effective_measure(convolve_wvar([g.wvar for g in groups]), probs)
            return _solve_upper(market, claim, [combined], [], False, tolerance)
        value = _dual_value(market, groups, claim, "upper", mode, bruteforce_cap, tolerance)
        return value, None
    measures = [_effective_measure(g.wvar, probs) for g in groups if g.is_wvar]
    explicit = [q.masses for g in groups if not g.is_wvar for q in g.measures]
    return _solve_upper(market, claim, measures, explicit, True, tolerance)


def nsao_check(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    mode: str = "conv",
    tolerance: float = 1e-9,
    bruteforce_cap: int = DEFAULT_BRUTEFORCE_CAP
) -> NsaoResult:
    """
    No Strictly Acceptable Opportunities check

    Mode 'conv' intersects the groups' valuation sets, mode 'max' takes their
    convex hull. The condition holds iff the pricing problem for F = 0 is bounded
    with value 0.

    Args:
        market: market model
        groups: valuation groups
        mode: 'conv' or 'max'
        tolerance: LP tolerance
        bruteforce_cap: largest scenario count for the dual oracle

    Returns:
        Result with a certificate (improving hedge, or the dual emptiness report)
    """
    _check_mode(mode)
    _check_groups(groups, market.space)
    zero = np.zeros(market.space.size)
    try:
        value, hedge = _upper_value(market, groups, zero, mode, tolerance, bruteforce_cap)
    except NsaoViolation as e:
        return NsaoResult(False, e.certificate)
    if value < -VALUE_TOLERANCE and hedge is not None:
        logger.warning("Admissible trade with negative risk %.6g", value)
        return NsaoResult(False, _hedge_certificate(market, hedge, risk=value))
    return NsaoResult(True)


def price_interval(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    claim: RandomVariable,
    mode: str = "conv",
    tolerance: float = 1e-9,
    bruteforce_cap: int = DEFAULT_BRUTEFORCE_CAP
) -> PriceInterval:
    """
    Interval of fair prices [-V(-F), V(F)] with V(F) = min over admissible h of the
    group risk of sum_i h_i X^i - F

    Args:
        market: market model
        groups: valuation groups
        claim: discounted payoff F
        mode: 'conv' for the convolution of group risks, 'max' for their maximum
        tolerance: LP tolerance
        bruteforce_cap: largest scenario count for the dual oracle

    Returns:
        Price interval with attaining hedges where the primal LP was used
    """
    _check_mode(mode)
    _check_groups(groups, market.space)
    if claim.space.size != market.space.size:
        raise ShapeError(f"Claim has {claim.space.size} values for {market.space.size} scenarios")
    upper, hedge_upper = _upper_value(market, groups, claim.values, mode, tolerance, bruteforce_cap)
    negated, hedge_lower = _upper_value(market, groups, -claim.values, mode, tolerance, bruteforce_cap)
    lower = -negated
    if lower > upper + VALUE_TOLERANCE * (1.0 + abs(upper)):
        logger.warning("Lower price %.12g exceeds upper price %.12g", lower, upper)
    return PriceInterval(
        lower,
        upper,
        None if hedge_upper is None else tuple(hedge_upper.tolist()),
        None if hedge_lower is None else tuple(hedge_lower.tolist()),
        mode,
        tuple(market.names)
    )


def price_interval_conv(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    claim: RandomVariable,
    tolerance: float = 1e-9,
    bruteforce_cap: int = DEFAULT_BRUTEFORCE_CAP
) -> PriceInterval:
    """Price interval for the intersection of the groups' valuation sets"""
    return price_interval(market, groups, claim, "conv", tolerance, bruteforce_cap)


def price_interval_max(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    claim: RandomVariable,
    tolerance: float = 1e-9
) -> PriceInterval:
    """Price interval for the convex hull of the groups' valuation sets"""
    return price_interval(market, groups, claim, "max", tolerance)


def _subset_masks(size: int) -> np.ndarray:
    """Indicator rows of every proper nonempty subset of the scenarios"""
    codes = np.arange(1, 2 ** size - 1)
    return ((codes[:, None] >> np.arange(size)) & 1).astype(float)


def _risk_neutral_rows(market: MarketModel) -> Tuple[np.ndarray, np.ndarray]:
    """E_Q X^i = 0 for two-sided positions, <= 0 for long-only, >= 0 for short-only"""
    if not market.constraint.is_cone:
        raise DomainError("Risk-neutral rows need a cone of admissible positions")
    matrix = market.matrix
    eq_rows, ub_rows = [], []
    for row, (lo, hi) in zip(matrix, market.constraint.bounds(len(market.assets))):
        if lo is None and hi is None:
            eq_rows.append(row)
        elif hi is None:
            ub_rows.append(row)
        elif lo is None:
            ub_rows.append(-row)
    m = market.space.size
    return (
        np.array(eq_rows).reshape(-1, m),
        np.array(ub_rows).reshape(-1, m)
    )


def _dual_value(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    claim: np.ndarray,
    side: str,
    mode: str,
    bruteforce_cap: int,
    tolerance: float
) -> float:
    m = market.space.size
    if m > bruteforce_cap:
        raise SizeError(f"Dual oracle enumerates 2^{m} subsets; cap is {bruteforce_cap} scenarios", cap=bruteforce_cap)
    masks = _subset_masks(m)
    mask_probs = masks @ market.space.probs
    wvar = [g for g in groups if g.is_wvar]
    explicit = [g for g in groups if not g.is_wvar]

    # columns map to the valuation measure through q = G z
    eq_rows: List[np.ndarray] = []
    eq_rhs: List[float] = []
    cut_specs: List[Tuple[np.ndarray, Optional[int], np.ndarray]] = []
    if mode == "conv":
        sizes = [len(g.measures) for g in explicit]
        n_vars = m + sum(sizes)
        mapping = np.zeros((m, n_vars))
        mapping[:, :m] = np.eye(m)
        total = np.zeros(n_vars)
        total[:m] = 1.0
        eq_rows.append(total)
        eq_rhs.append(1.0)
        col = m
        for g, size in zip(explicit, sizes):
            hull = np.column_stack([q.masses for q in g.measures])
            rows = np.zeros((m, n_vars))
            rows[:, :m] = np.eye(m)
            rows[:, col:col + size] = -hull
            eq_rows.extend(rows)
            eq_rhs.extend([0.0] * m)
            col += size
        if wvar:
            envelope = lower_envelope([g.distortion() for g in wvar])
            cut_specs.append((np.arange(m), None, envelope(mask_probs)))
    else:
        widths = [m + 1 if g.is_wvar else len(g.measures) for g in groups]
        n_vars = sum(widths)
        mapping = np.zeros((m, n_vars))
        total = np.zeros(n_vars)
        col = 0
        for g, width in zip(groups, widths):
            if g.is_wvar:
                cols = np.arange(col, col + m)
                theta = col + m
                mapping[:, cols] = np.eye(m)
                total[theta] = 1.0
                link = np.zeros(n_vars)
                link[cols] = 1.0
                link[theta] = -1.0
                eq_rows.append(link)
                eq_rhs.append(0.0)
                cut_specs.append((cols, theta, g.distortion()(mask_probs)))
            else:
                mapping[:, col:col + width] = np.column_stack([q.masses for q in g.measures])
                total[col:col + width] = 1.0
            col += width
        eq_rows.append(total)
        eq_rhs.append(1.0)

    neutral_eq, neutral_ub = _risk_neutral_rows(market)
    eq_matrix = np.vstack([np.array(eq_rows), neutral_eq @ mapping])
    eq_vector = np.concatenate([eq_rhs, np.zeros(neutral_eq.shape[0])])
    base_ub = neutral_ub @ mapping
    objective = claim @ mapping
    sense = "max" if side == "upper" else "min"

    cuts: List[np.ndarray] = []
    cut_rhs: List[float] = []
    added: Set[Tuple[int, int]] = set()
    rounds = 0
    while True:
        rounds += 1
        lp = LinearProgram(
            objective,
            eq_matrix=eq_matrix,
            eq_rhs=eq_vector,
            ub_matrix=np.vstack([base_ub] + [c[None, :] for c in cuts]),
            ub_rhs=np.concatenate([np.zeros(base_ub.shape[0]), cut_rhs]),
            sense=sense
        )
        outcome = solve(lp, tolerance)
        if outcome.status == INFEASIBLE:
            logger.warning("No risk-neutral measure in the valuation set")
            raise NsaoViolation(
                "NSAO violated: no risk-neutral measure in the valuation set",
                certificate={"source": "dual", "reason": "empty intersection with risk-neutral measures"}
            )
        if outcome.status == UNBOUNDED:
            raise ConditioningError("Dual pricing LP over probability measures reported unbounded")
        new_cuts = 0
        for index, (cols, theta, limits) in enumerate(cut_specs):
            scale = outcome.x[theta] if theta is not None else 1.0
            violation = masks @ outcome.x[cols] - scale * limits
            for s in np.argsort(-violation, kind="stable")[:m]:
                if violation[s] <= CUT_TOLERANCE:
                    break
                if (index, int(s)) in added:
                    continue
                added.add((index, int(s)))
                row = np.zeros(n_vars)
                row[cols] = masks[s]
                if theta is None:
                    cut_rhs.append(limits[s])
                else:
                    row[theta] = -limits[s]
                    cut_rhs.append(0.0)
                cuts.append(row)
                new_cuts += 1
        if new_cuts == 0:
            logger.debug("Dual oracle converged after %d rounds with %d subset cuts", rounds, len(cuts))
            return outcome.objective


def dual_bruteforce(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    claim: RandomVariable,
    side: str = "upper",
    mode: str = "conv",
    bruteforce_cap: int = DEFAULT_BRUTEFORCE_CAP,
    tolerance: float = 1e-9
) -> float:
    """
    Price bound as an optimization over valuation measures

    Weighted V@R groups enter through Q(A) <= Psi(P(A)) for every proper nonempty
    subset A, explicit groups through convex weights on their measures. Subset rows
    are added lazily, each round adding the most violated ones found by full
    enumeration.

    Args:
        market: market with a cone of positions
        groups: valuation groups
        claim: discounted payoff F
        side: 'upper' for sup E_Q F, 'lower' for inf E_Q F
        mode: 'conv' (intersection) or 'max' (convex hull)
        bruteforce_cap: largest scenario count accepted
        tolerance: LP tolerance

    Returns:
        Price bound
    """
    if side not in SIDES:
        raise DomainError(f"Side must be one of {SIDES}, got {side!r}")
    _check_mode(mode)
    _check_groups(groups, market.space)
    if claim.space.size != market.space.size:
        raise ShapeError(f"Claim has {claim.space.size} values for {market.space.size} scenarios")
    return _dual_value(market, groups, claim.values, side, mode, bruteforce_cap, tolerance)


@dataclass(frozen=True, eq=False)
class TrancheFunction:
    """Piecewise-linear f with f(0) = 0 and slopes in {0, 1}, extended linearly beyond the breakpoints"""

    breakpoints: np.ndarray
    values: np.ndarray
    left_slope: float
    right_slope: float

    def __call__(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        result = np.interp(x, self.breakpoints, self.values)
        result = np.where(
            x < self.breakpoints[0],
            self.values[0] + self.left_slope * (x - self.breakpoints[0]),
            result
        )
        result = np.where(
            x > self.breakpoints[-1],
            self.values[-1] + self.right_slope * (x - self.breakpoints[-1]),
            result
        )
        return float(result) if result.ndim == 0 else result

    def to_dict(self) -> Dict[str, Any]:
        return {
            "breakpoints": [[x, y] for x, y in zip(self.breakpoints.tolist(), self.values.tolist())],
            "left_slope": self.left_slope,
            "right_slope": self.right_slope,
        }


Intervals = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True, eq=False)
class Tranche:
    """Contract sold to one group: f(L) shifted so the group's risk is zero"""

    group: int
    label: str
    active: Intervals
    assigned: Intervals
    function: TrancheFunction
    raw: RandomVariable
    shift: float

    @property
    def payoff(self) -> RandomVariable:
        return self.raw + self.shift

    def to_dict(self) -> Dict[str, Any]:
        return {
            "group": self.group,
            "label": self.label,
            "active": [list(i) for i in self.active],
            "assigned": [list(i) for i in self.assigned],
            "function": self.function.to_dict(),
            "raw": self.raw.values.tolist(),
            "shift": self.shift,
            "payoff": self.payoff.values.tolist(),
        }


@dataclass(frozen=True, eq=False)
class TranchePlan:
    """Superreplication: hedge h*, residual L = X* - F + V(F) and its split into tranches"""

    hedge: Tuple[float, ...]
    asset_names: Tuple[str, ...]
    upper_price: float
    residual: RandomVariable
    tranches: Tuple[Tranche, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "upper_price": self.upper_price,
            "hedge": dict(zip(self.asset_names, self.hedge)),
            "residual": self.residual.values.tolist(),
            "tranches": [t.to_dict() for t in self.tranches],
        }


def _interval_union(grid: np.ndarray, mask: np.ndarray) -> Intervals:
    """Merge the elementary intervals [grid[i], grid[i+1]] flagged in mask"""
    result: List[Tuple[float, float]] = []
    for i in np.flatnonzero(mask):
        a, b = float(grid[i]), float(grid[i + 1])
        if result and result[-1][1] == a:
            result[-1] = (result[-1][0], b)
        else:
            result.append((a, b))
    return tuple(result)


def _tranche_function(values: np.ndarray, levels: np.ndarray, owned: np.ndarray) -> TrancheFunction:
    """
    Signed length of [0, x] intersected with the points whose CDF level is owned

    Args:
        values: sorted distinct values of L
        levels: CDF level on each piece, len(values) + 1 entries starting at 0
        owned: whether each piece's level belongs to the group
    """
    breakpoints = np.union1d(values, [0.0])
    piece = np.searchsorted(values, 0.5 * (breakpoints[:-1] + breakpoints[1:]), side="right")
    slopes = owned[piece].astype(float)
    cumulative = np.concatenate(([0.0], np.cumsum(slopes * np.diff(breakpoints))))
    origin = int(np.searchsorted(breakpoints, 0.0))
    return TrancheFunction(
        breakpoints,
        cumulative - cumulative[origin],
        float(owned[0]),
        float(owned[-1])
    )


def split_residual(groups: Sequence[ValuationGroup], residual: RandomVariable) -> Tuple[Tranche, ...]:
    """
    Split L into comonotone tranches Y^n = f^n(L) + c^n with rho^n(Y^n) = 0

    Each elementary interval of the merged knot grid belongs to the first group whose
    distortion attains the lower envelope there; a CDF level z belongs to the
    interval (a, b] containing it, level 0 to the first interval. f^n integrates the
    indicator of the group's ownership of the CDF of L.

    Args:
        groups: Weighted V@R groups, order decides ties
        residual: residual liability L

    Returns:
        One tranche per group
    """
    if not groups:
        raise DomainError("At least one valuation group is required")
    if not all(g.is_wvar for g in groups):
        raise DomainError("Tranche splitting needs Weighted V@R groups")
    psis = [g.distortion() for g in groups]
    grid = merged_grid(psis)
    values_at = np.vstack([p(grid) for p in psis])
    lowest = values_at.min(axis=0)
    active_points = np.abs(values_at - lowest) <= ACTIVE_TOLERANCE
    active = active_points[:, :-1] & active_points[:, 1:]
    owner = np.argmax(active, axis=0)
    orphans = ~active.any(axis=0)
    if np.any(orphans):
        middle = 0.5 * (grid[:-1] + grid[1:])
        owner[orphans] = np.argmin(np.vstack([p(middle[orphans]) for p in psis]), axis=0)

    probs = residual.space.probs
    distinct, inverse = np.unique(residual.values, return_inverse=True)
    cdf = np.cumsum(np.bincount(inverse, weights=probs))
    cdf[-1] = 1.0
    levels = np.concatenate(([0.0], cdf))
    interval = np.clip(np.searchsorted(grid, levels - ACTIVE_TOLERANCE, side="left") - 1, 0, grid.size - 2)
    level_owner = owner[interval]

    tranches: List[Tranche] = []
    for n, group in enumerate(groups):
        function = _tranche_function(distinct, levels, level_owner == n)
        raw = RandomVariable(residual.space, function(residual.values))
        tranches.append(Tranche(
            group=n,
            label=group.label,
            active=_interval_union(grid, active[n]),
            assigned=_interval_union(grid, owner == n),
            function=function,
            raw=raw,
            shift=rho_wvar(group.wvar, raw),
        ))
    _verify_split(tranches, residual)
    return tuple(tranches)


def _verify_split(tranches: Sequence[Tranche], residual: RandomVariable) -> None:
    points = np.unique(np.concatenate([t.function.breakpoints for t in tranches]))
    points = np.concatenate([points, 0.5 * (points[:-1] + points[1:]), [points[0] - 1.0, points[-1] + 1.0]])
    total = sum(t.function(points) for t in tranches)
    if np.max(np.abs(total - points)) > PLAN_TOLERANCE * (1.0 + np.max(np.abs(points))):
        raise ConditioningError("Tranche functions do not sum to the identity")
    payoff = sum(t.raw.values for t in tranches)
    if np.max(np.abs(payoff - residual.values)) > PLAN_TOLERANCE * (1.0 + np.max(np.abs(residual.values))):
        raise ConditioningError("Tranches do not sum to the residual")


def superrep_split(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    claim: RandomVariable,
    tolerance: float = 1e-9
) -> TranchePlan:
    """
    Superreplicate F with the optimal hedge and sell the residual to the groups in tranches

    Args:
        market: market model
        groups: Weighted V@R groups
        claim: discounted payoff F

    Returns:
        Tranche plan whose tranches each carry zero risk for their group
    """
    _check_groups(groups, market.space)
    if not all(g.is_wvar for g in groups):
        raise DomainError("Tranche splitting needs Weighted V@R groups")
    check_aligned(claim, *market.assets.values())
    upper, hedge = _upper_value(market, groups, claim.values, "conv", tolerance, DEFAULT_BRUTEFORCE_CAP)
    residual = market.portfolio(hedge) - claim + upper
    tranches = split_residual(groups, residual)
    shift_total = sum(t.shift for t in tranches)
    if abs(shift_total) > 1e-7 * (1.0 + float(np.max(np.abs(residual.values)))):
        logger.warning("Tranche shifts sum to %.3g instead of 0", shift_total)
    return TranchePlan(tuple(hedge.tolist()), tuple(market.names), upper, residual, tranches)


@dataclass(frozen=True)
class LiquidityPoint:
    volume: float
    upper: float
    lower: float

    def to_row(self) -> Tuple[float, float, float]:
        return (self.volume, self.upper, self.lower)


def liquidity_curve(
    market: MarketModel,
    groups: Sequence[ValuationGroup],
    claim: RandomVariable,
    volumes: Sequence[float],
    threads: int = 1,
    tolerance: float = 1e-9
) -> List[LiquidityPoint]:
    """
    Upper and lower price per unit for trading volume v of the claim

    V(F, v) = min over admissible h of rho(sum_i h_i X^i / v - F), solved with the
    position box scaled by 1/v. Grid points are independent.

    Args:
        market: market with a box of positions
        groups: Weighted V@R groups, combined by convolution
        claim: discounted payoff F
        volumes: positive trade volumes
        threads: worker threads

    Returns:
        One point per volume, in input order
    """
    _check_groups(groups, market.space)
    if not all(g.is_wvar for g in groups):
        raise DomainError("Liquidity curves need Weighted V@R groups")
    volumes = [float(v) for v in volumes]
    if any(not v > 0 for v in volumes):
        raise DomainError("Trade volumes must be positive")
    if not market.constraint.is_box:
        logger.info("Cone market: the liquidity curve is flat at the price interval")
    combined = _effective_measure(convolve_wvar([g.wvar for g in groups]), market.space.probs)

    def evaluate(volume: float) -> LiquidityPoint:
        scaled = market.with_constraint(market.constraint.scaled(1.0 / volume))
        upper, _ = _solve_upper(scaled, claim.values, [combined], [], False, tolerance)
        negated, _ = _solve_upper(scaled, -claim.values, [combined], [], False, tolerance)
        return LiquidityPoint(volume, upper, -negated)

    logger.debug("Liquidity curve over %d volumes with %d threads", len(volumes), threads)
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        return list(pool.map(evaluate, volumes))


def reservation_price(measure: WeightingMeasure, wealth: RandomVariable, claim: RandomVariable) -> float:
    """
    Coherent reservation price of F for an agent holding W: E F under the extreme measure of W

    Args:
        measure: the agent's weighting measure
        wealth: current portfolio W
        claim: payoff F

    Returns:
        E_{Q(W)} F
    """
    check_aligned(wealth, claim)
    return extreme_measure(measure, wealth).expectation(claim)
