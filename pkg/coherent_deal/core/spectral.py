"""
Weighted V@R
Weighting measures on (0, 1], their piecewise-linear distortion functions and
exact evaluation of spectral risk on finite scenario spaces.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Tuple, Union

import numpy as np
from scipy.special import betaincinv

from .errors import DomainError, ShapeError
from .scenario import RandomVariable

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-12
KNOT_MERGE = 1e-14
SLOPE_TOLERANCE = 1e-9


def _frozen(values: Any) -> np.ndarray:
    array = np.array(values, dtype=float).ravel()
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class WeightingMeasure:
    """Finitely supported probability measure on (0, 1]; levels ascending and distinct"""

    levels: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if levels.size != weights.size:
            raise ShapeError(f"{levels.size} levels for {weights.size} weights")
        if levels.size == 0:
            raise DomainError("A weighting measure needs at least one atom")
        if not np.all(np.isfinite(levels)) or np.any(levels <= 0) or np.any(levels > 1):
            raise DomainError("Weighting levels must lie in (0, 1]")
        if np.any(np.diff(levels) <= 0):
            raise DomainError("Weighting levels must be strictly ascending")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise DomainError("Weights must be strictly positive")
        total = weights.sum()
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise DomainError(f"Weights sum to {total!r}, not 1")
        object.__setattr__(self, "levels", _frozen(levels))
        object.__setattr__(self, "weights", _frozen(weights / total))

    @classmethod
    def from_atoms(cls, atoms: Iterable[Tuple[float, float]]) -> "WeightingMeasure":
        """Build from (level, weight) pairs in any order; equal levels are merged, zero weights dropped"""
        merged: Dict[float, float] = {}
        for level, weight in atoms:
            merged[float(level)] = merged.get(float(level), 0.0) + float(weight)
        pairs = sorted((lv, w) for lv, w in merged.items() if w != 0.0)
        if not pairs:
            raise DomainError("A weighting measure needs at least one atom")
        levels, weights = zip(*pairs)
        return cls(np.array(levels), np.array(weights))

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.levels.tolist(), self.weights.tolist()))

    def __len__(self) -> int:
        return self.levels.size

    def to_spec(self) -> Dict[str, Any]:
        return {"type": "discrete", "atoms": [[lv, w] for lv, w in self.atoms]}


@dataclass(frozen=True, eq=False)
class DistortionFunction:
    """Concave nondecreasing piecewise-linear Psi on [0, 1] with Psi(0)=0, Psi(1)=1"""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        xs = np.array(self.knots, dtype=float).ravel()
        ys = np.array(self.values, dtype=float).ravel()
        if xs.size != ys.size or xs.size < 2:
            raise ShapeError("A distortion needs matching knot abscissae and values, at least two")
        if abs(xs[0]) > KNOT_MERGE or abs(xs[-1] - 1.0) > KNOT_MERGE:
            raise DomainError("Distortion knots must span [0, 1]")
        if abs(ys[0]) > WEIGHT_TOLERANCE or abs(ys[-1] - 1.0) > WEIGHT_TOLERANCE:
            raise DomainError("Distortion must satisfy Psi(0)=0 and Psi(1)=1")
        xs[0], xs[-1], ys[0], ys[-1] = 0.0, 1.0, 0.0, 1.0
        xs, ys = _merge_knots(xs, ys)
        slopes = np.diff(ys) / np.diff(xs)
        scale = max(1.0, float(np.max(np.abs(slopes))))
        if np.any(slopes < -SLOPE_TOLERANCE * scale):
            raise DomainError("Distortion must be nondecreasing")
        if np.any(np.diff(slopes) > SLOPE_TOLERANCE * scale):
            raise DomainError("Distortion must be concave")
        xs, ys = _drop_collinear(xs, ys, scale)
        object.__setattr__(self, "knots", _frozen(xs))
        object.__setattr__(self, "values", _frozen(ys))

    @property
    def slopes(self) -> np.ndarray:
        """Step density psi on each segment (x_{j-1}, x_j]"""
        return np.diff(self.values) / np.diff(self.knots)

    def __call__(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        result = np.interp(x, self.knots, self.values)
        return float(result) if np.ndim(result) == 0 else result

    def density(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Left-continuous psi(x); psi(0) is the first segment slope"""
        slopes = self.slopes
        index = np.searchsorted(self.knots, x, side="left") - 1
        index = np.clip(index, 0, slopes.size - 1)
        result = slopes[index]
        return float(result) if np.ndim(result) == 0 else result

    def integral(self, lo: float, hi: float) -> float:
        """Integral of psi over [lo, hi]"""
        return float(np.interp(hi, self.knots, self.values) - np.interp(lo, self.knots, self.values))

    def to_dict(self) -> Dict[str, Any]:
        return {"knots": [[x, y] for x, y in zip(self.knots.tolist(), self.values.tolist())]}


def _merge_knots(xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    keep = np.ones(xs.size, dtype=bool)
    last = 0
    for j in range(1, xs.size):
        if xs[j] - xs[last] <= KNOT_MERGE:
            keep[j] = False
        else:
            last = j
    # the right endpoint always survives
    if not keep[-1]:
        keep[last] = False
        keep[-1] = True
    return xs[keep], ys[keep]


def _drop_collinear(xs: np.ndarray, ys: np.ndarray, scale: float) -> Tuple[np.ndarray, np.ndarray]:
    keep = [0]
    for j in range(1, xs.size - 1):
        left = (ys[j] - ys[keep[-1]]) / (xs[j] - xs[keep[-1]])
        right = (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j])
        if abs(left - right) > SLOPE_TOLERANCE * scale:
            keep.append(j)
    keep.append(xs.size - 1)
    return xs[keep], ys[keep]


def make_tailvar(level: float) -> WeightingMeasure:
    """
    Tail V@R of order lambda as the weighting measure delta_lambda

    Args:
        level: lambda in (0, 1]

    Returns:
        Single-atom weighting measure
    """
    if not 0.0 < level <= 1.0:
        raise DomainError(f"Tail V@R level {level!r} outside (0, 1]")
    return WeightingMeasure(np.array([level]), np.array([1.0]))


def make_betavar_grid(alpha: float, beta: float, grid: int) -> WeightingMeasure:
    """
    Beta V@R discretized on equal-probability cells

    The weighting density Beta(beta+1, alpha-beta) is split into `grid` cells of
    probability 1/grid, each represented by its median level.

    Args:
        alpha: alpha > -1
        beta: beta in (-1, alpha)
        grid: number of cells, at least 2

    Returns:
        Weighting measure with `grid` atoms (fewer if medians coincide)
    """
    if not alpha > -1.0:
        raise DomainError(f"Beta V@R requires alpha > -1, got {alpha!r}")
    if not -1.0 < beta < alpha:
        raise DomainError(f"Beta V@R requires -1 < beta < alpha, got beta={beta!r}")
    if int(grid) != grid or grid < 2:
        raise DomainError(f"Grid size must be an integer >= 2, got {grid!r}")
    grid = int(grid)
    medians = (np.arange(grid) + 0.5) / grid
    levels = betaincinv(beta + 1.0, alpha - beta, medians)
    levels = np.clip(levels, np.finfo(float).tiny, 1.0)
    logger.debug("Beta V@R grid alpha=%s beta=%s: levels %.3g..%.3g", alpha, beta, levels[0], levels[-1])
    return WeightingMeasure.from_atoms((lv, 1.0 / grid) for lv in levels)


def make_alphavar_grid(alpha: float, grid: int) -> WeightingMeasure:
    """
    Alpha V@R: Beta V@R with beta = 1, so alpha must exceed 1

    Args:
        alpha: alpha > 1
        grid: number of cells

    Returns:
        Discretized weighting measure
    """
    if not alpha > 1.0:
        raise DomainError(f"Alpha V@R requires alpha > 1, got {alpha!r}")
    return make_betavar_grid(alpha, 1.0, grid)


def distortion(measure: WeightingMeasure) -> DistortionFunction:
    """
    Psi(x) = sum_k w_k min(x / lambda_k, 1), knots at every level

    Args:
        measure: weighting measure

    Returns:
        Distortion function
    """
    levels, weights = measure.levels, measure.weights
    xs = np.concatenate(([0.0], levels))
    if levels[-1] < 1.0:
        xs = np.append(xs, 1.0)
    ys = np.minimum.outer(xs, levels) @ (weights / levels)
    return DistortionFunction(xs, ys)


def phi(psi: DistortionFunction, x: float) -> float:
    """
    Conjugate Phi(x) = sup_y (Psi(y) - x y), attained at a knot

    Args:
        psi: distortion function
        x: nonnegative argument

    Returns:
        Phi(x)
    """
    if x < 0:
        raise DomainError(f"Phi is defined for x >= 0, got {x!r}")
    return float(np.max(psi.values - x * psi.knots))


RiskSpec = Union[WeightingMeasure, DistortionFunction]


def as_distortion(spec: RiskSpec) -> DistortionFunction:
    return spec if isinstance(spec, DistortionFunction) else distortion(spec)


def sorted_increments(
    psi: DistortionFunction,
    values: np.ndarray,
    probs: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Scenario order and the Psi-increments attached to each rank

    Args:
        psi: distortion function
        values: scenario values
        probs: scenario probabilities

    Returns:
        (stable ascending order, Psi(z_t) - Psi(z_{t-1}) per rank)
    """
    order = np.argsort(values, kind="stable")
    cumulative = np.cumsum(probs[order])
    cumulative[-1] = 1.0
    return order, np.diff(psi(cumulative), prepend=0.0)


def wvar_risk(psi: DistortionFunction, values: np.ndarray, probs: np.ndarray) -> float:
    """Spectral risk of raw scenario values"""
    order, increments = sorted_increments(psi, values, probs)
    return -float(np.dot(values[order], increments))


def rho_wvar(measure: RiskSpec, variable: RandomVariable) -> float:
    """
    Weighted V@R of a scenario-indexed random variable

    Args:
        measure: weighting measure (or its distortion)
        variable: random variable

    Returns:
        rho_mu(X) = -sum_t x_(t) (Psi(z_t) - Psi(z_{t-1}))
    """
    return wvar_risk(as_distortion(measure), variable.values, variable.space.probs)


def parse_measure_spec(spec: Mapping[str, Any], default_grid: int = 200) -> WeightingMeasure:
    """
    Build a weighting measure from its JSON description

    Args:
        spec: {"type": "tailvar"|"discrete"|"alphavar"|"betavar", ...}
        default_grid: grid size when the spec omits one

    Returns:
        Weighting measure
    """
    if not isinstance(spec, Mapping):
        raise DomainError("Measure spec must be a JSON object")
    kind = spec.get("type")
    try:
        if kind == "tailvar":
            return make_tailvar(float(spec["lambda"]))
        if kind == "discrete":
            return WeightingMeasure.from_atoms((float(lv), float(w)) for lv, w in spec["atoms"])
        if kind == "alphavar":
            return make_alphavar_grid(float(spec["alpha"]), int(spec.get("grid", default_grid)))
        if kind == "betavar":
            return make_betavar_grid(
                float(spec["alpha"]), float(spec["beta"]), int(spec.get("grid", default_grid))
            )
    except KeyError as e:
        raise DomainError(f"Measure spec of type {kind!r} is missing {e.args[0]!r}")
    except (TypeError, ValueError) as e:
        if isinstance(e, DomainError):
            raise
        raise DomainError(f"Malformed measure spec: {e}")
    raise DomainError(f"Unknown measure type {kind!r}")
