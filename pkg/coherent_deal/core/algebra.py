"""
Risk algebra
Convolution and maximum of Weighted V@Rs, built on piecewise-linear envelopes of distortions.
"""
import logging
from typing import List, Sequence

import numpy as np

from .errors import DomainError
from .scenario import RandomVariable
from .spectral import (
    KNOT_MERGE,
    DistortionFunction,
    WeightingMeasure,
    distortion,
    rho_wvar,
)

logger = logging.getLogger(__name__)

MASS_FLOOR = 1e-15


def _require(items: Sequence, what: str) -> None:
    if len(items) == 0:
        raise DomainError(f"At least one {what} is required")


def merged_grid(distortions: Sequence[DistortionFunction]) -> np.ndarray:
    """
    Union of all knots plus every pairwise crossing inside the elementary intervals

    On the returned grid each distortion is linear between consecutive points and
    no two distortions cross strictly inside an interval.

    Args:
        distortions: distortion functions

    Returns:
        Sorted abscissae in [0, 1]
    """
    grid = np.unique(np.concatenate([d.knots for d in distortions]))
    crossings: List[float] = []
    for a, b in zip(grid[:-1], grid[1:]):
        width = b - a
        left = np.array([d(a) for d in distortions])
        slopes = np.array([(d(b) - d(a)) / width for d in distortions])
        for i in range(len(distortions)):
            for j in range(i + 1, len(distortions)):
                ds = slopes[i] - slopes[j]
                if ds == 0.0:
                    continue
                x = a + (left[j] - left[i]) / ds
                if a + KNOT_MERGE < x < b - KNOT_MERGE:
                    crossings.append(x)
    if crossings:
        grid = np.unique(np.concatenate([grid, crossings]))
    merged = [grid[0]]
    for x in grid[1:]:
        if x - merged[-1] > KNOT_MERGE:
            merged.append(x)
    merged[-1] = grid[-1]
    return np.array(merged)


def lower_envelope(distortions: Sequence[DistortionFunction]) -> DistortionFunction:
    """Pointwise minimum of distortions, which is again a distortion"""
    _require(distortions, "distortion")
    grid = merged_grid(distortions)
    values = np.min(np.vstack([d(grid) for d in distortions]), axis=0)
    return DistortionFunction(grid, values)


def weighting_measure(psi: DistortionFunction) -> WeightingMeasure:
    """
    Recover mu(dx) = -x Psi''(dx) from a distortion

    An interior kink x_j carries x_j (slope_left - slope_right); with Psi extended
    constant beyond 1 the atom at 1 carries the last slope.

    Args:
        psi: distortion function

    Returns:
        Weighting measure whose distortion is psi
    """
    slopes = psi.slopes
    levels = psi.knots[1:]
    masses = levels * (slopes - np.append(slopes[1:], 0.0))
    keep = masses > MASS_FLOOR
    total = masses[keep].sum()
    logger.debug("Reconstructed %d atoms, mass defect %.3g", int(keep.sum()), abs(total - 1.0))
    return WeightingMeasure(levels[keep], masses[keep] / total)


def convolve_wvar(measures: Sequence[WeightingMeasure]) -> WeightingMeasure:
    """
    Convolution of Weighted V@Rs: the Weighted V@R of min_n Psi_n

    Args:
        measures: weighting measures mu^1..mu^N

    Returns:
        Weighting measure of the convolution
    """
    _require(measures, "weighting measure")
    if len(measures) == 1:
        return measures[0]
    return weighting_measure(lower_envelope([distortion(m) for m in measures]))


def rho_max(measures: Sequence[WeightingMeasure], variable: RandomVariable) -> float:
    """Maximum of Weighted V@Rs: max_n rho_{mu^n}(X)"""
    _require(measures, "weighting measure")
    return max(rho_wvar(m, variable) for m in measures)


def rho_conv(measures: Sequence[WeightingMeasure], variable: RandomVariable) -> float:
    """Risk of X under the convolution of the given Weighted V@Rs"""
    return rho_wvar(convolve_wvar(measures), variable)


def minimal_concave_majorant(distortions: Sequence[DistortionFunction]) -> DistortionFunction:
    """
    Upper concave envelope of the pointwise maximum of distortions

    Args:
        distortions: distortion functions

    Returns:
        Smallest concave function dominating all inputs
    """
    _require(distortions, "distortion")
    xs = np.unique(np.concatenate([d.knots for d in distortions]))
    ys = np.max(np.vstack([d(xs) for d in distortions]), axis=0)
    hull: List[int] = []
    for k in range(xs.size):
        # upper chain: drop the last point while it lies on or below the chord
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (xs[j] - xs[i]) * (ys[k] - ys[i]) - (ys[j] - ys[i]) * (xs[k] - xs[i])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return DistortionFunction(xs[hull], ys[hull])
