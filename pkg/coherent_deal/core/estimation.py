"""
Empirical estimators
Plug-in and bootstrap estimates of Weighted V@R, order-statistic risks, factor
risk, risk contributions and upper price bounds from sample data.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, ShapeError
from .spectral import RiskSpec, WeightingMeasure, as_distortion, sorted_increments, wvar_risk
from .transforms import ties_straddle_kink

logger = logging.getLogger(__name__)

RESAMPLE_BLOCK = 8192
VALUATION_KINDS = ("risk", "factor", "contribution", "factor-contribution")


class BootstrapEstimate(NamedTuple):
    estimate: float
    std_error: float


class ContributionEstimate(NamedTuple):
    value: float
    unique: bool


def _samples(samples: Sequence[float], name: str = "samples") -> np.ndarray:
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise DomainError(f"No {name} given")
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{name.capitalize()} must be finite")
    return values


def _columns(rows: Sequence[Sequence[float]], width: int) -> List[np.ndarray]:
    array = np.asarray(rows, dtype=float)
    if array.size == 0:
        raise DomainError("No samples given")
    if array.ndim != 2 or array.shape[1] != width:
        raise ShapeError(f"Expected sample rows of {width} values")
    if not np.all(np.isfinite(array)):
        raise DomainError("Samples must be finite")
    return [array[:, i] for i in range(width)]


def _uniform(size: int) -> np.ndarray:
    return np.full(size, 1.0 / size)


def est_wvar(samples: Sequence[float], measure: RiskSpec) -> float:
    """
    Weighted V@R of the empirical distribution of the samples

    Args:
        samples: observed values
        measure: weighting measure

    Returns:
        -sum_t x_(t) (Psi(t/T) - Psi((t-1)/T))
    """
    values = _samples(samples)
    return wvar_risk(as_distortion(measure), values, _uniform(values.size))


def _order_statistic_bootstrap(
    values: np.ndarray,
    draws: int,
    smallest: int,
    resamples: int,
    seed: int,
    threads: int
) -> BootstrapEstimate:
    """Mean over resamples of -(1/smallest) * (sum of the `smallest` lowest of `draws` draws)"""
    if np.all(values == values[0]):
        return BootstrapEstimate(-float(values[0]), 0.0)
    blocks = math.ceil(resamples / RESAMPLE_BLOCK)
    # one substream per block of RESAMPLE_BLOCK resamples, whatever the thread count
    streams = np.random.SeedSequence(seed).spawn(blocks)

    def run(block: int) -> np.ndarray:
        count = min(RESAMPLE_BLOCK, resamples - block * RESAMPLE_BLOCK)
        rng = np.random.default_rng(streams[block])
        picks = values[rng.integers(0, values.size, size=(count, draws))]
        if smallest == 1:
            return -picks.min(axis=1)
        if smallest == draws:
            return -picks.mean(axis=1)
        return -np.partition(picks, smallest - 1, axis=1)[:, :smallest].mean(axis=1)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        outcomes = np.concatenate(list(pool.map(run, range(blocks))))
    std_error = float(outcomes.std(ddof=1) / math.sqrt(resamples)) if resamples > 1 else 0.0
    logger.debug("Bootstrap: %d resamples in %d blocks, %d draws each", resamples, blocks, draws)
    return BootstrapEstimate(float(outcomes.mean()), std_error)


def _check_count(value: int, name: str, minimum: int = 1) -> int:
    if int(value) != value or value < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def est_beta_var(
    samples: Sequence[float],
    alpha: int,
    beta: int,
    resamples: int,
    seed: int,
    threads: int = 1
) -> BootstrapEstimate:
    """
    Bootstrap Beta V@R: -E of the mean of the beta smallest among alpha draws

    Args:
        samples: observed values
        alpha: draws per resample
        beta: order statistics averaged, 1 <= beta <= alpha
        resamples: number of resamples M
        seed: RNG seed
        threads: worker threads

    Returns:
        Estimate and its standard error
    """
    values = _samples(samples)
    alpha = _check_count(alpha, "alpha")
    beta = _check_count(beta, "beta")
    if beta > alpha:
        raise DomainError(f"beta={beta} exceeds alpha={alpha}")
    resamples = _check_count(resamples, "resamples")
    return _order_statistic_bootstrap(values, alpha, beta, resamples, seed, threads)


def est_alpha_var(
    samples: Sequence[float],
    alpha: int,
    resamples: int,
    seed: int,
    threads: int = 1
) -> BootstrapEstimate:
    """Bootstrap Alpha V@R: -E of the minimum of alpha draws"""
    return est_beta_var(samples, alpha, 1, resamples, seed, threads)


def est_risk_contribution(pairs: Sequence[Tuple[float, float]], measure: RiskSpec) -> ContributionEstimate:
    """
    Empirical sup E_Q X over the extreme measure of W, i.e. the contribution of -X

    Pairs are ordered by w (ties in input order) and the t-th x is weighted by
    Psi(t/T) - Psi((t-1)/T).

    Args:
        pairs: observations (x_t, w_t)
        measure: weighting measure

    Returns:
        Estimate with a flag that is False when tied w values straddle a kink of Psi
    """
    x, w = _columns(pairs, 2)
    psi = as_distortion(measure)
    probs = _uniform(w.size)
    order, increments = sorted_increments(psi, w, probs)
    unique = not ties_straddle_kink(psi, w, order, probs)
    if not unique:
        logger.warning("Tied w values straddle a kink of Psi: contribution estimate depends on input order")
    return ContributionEstimate(float(np.dot(x[order], increments)), unique)


def equal_frequency_bins(factor: np.ndarray, bins: int) -> np.ndarray:
    """
    Bin codes holding roughly T / bins observations each, by rank of the factor

    Tied factor values share the bin of their first occurrence in sorted order.
    """
    bins = _check_count(bins, "bins")
    if bins > factor.size:
        raise DomainError(f"{bins} bins for {factor.size} observations")
    order = np.argsort(factor, kind="stable")
    by_rank = (np.arange(factor.size) * bins) // factor.size
    ranked = factor[order]
    first = np.searchsorted(ranked, ranked, side="left")
    codes = np.empty(factor.size, dtype=np.intp)
    codes[order] = by_rank[first]
    return codes


def _binned_mean(values: np.ndarray, codes: np.ndarray) -> np.ndarray:
    sums = np.bincount(codes, weights=values)
    counts = np.bincount(codes)
    return sums[codes] / counts[codes]


def est_factor_risk(pairs: Sequence[Tuple[float, float]], measure: RiskSpec, bins: int) -> float:
    """
    Empirical factor risk rho(E(X | Y)) with E(X | Y) estimated by equal-frequency bins of y

    Args:
        pairs: observations (x_t, y_t)
        measure: weighting measure
        bins: number of bins, at most T

    Returns:
        est_wvar of the binned conditional means
    """
    x, y = _columns(pairs, 2)
    return est_wvar(_binned_mean(x, equal_frequency_bins(y, bins)), measure)


def est_factor_risk_contribution(
    triples: Sequence[Tuple[float, float, float]],
    measure: RiskSpec,
    bins: int
) -> ContributionEstimate:
    """
    Empirical factor risk contribution: binned f(y) = E(X | Y=y) and g(y) = E(W | Y=y)
    fed to est_risk_contribution

    Args:
        triples: observations (x_t, y_t, w_t)
        measure: weighting measure
        bins: number of bins

    Returns:
        Contribution estimate
    """
    x, y, w = _columns(triples, 3)
    codes = equal_frequency_bins(y, bins)
    f = _binned_mean(x, codes)
    g = _binned_mean(w, codes)
    return est_risk_contribution(np.column_stack([f, g]), measure)


@dataclass(frozen=True, eq=False)
class EmpiricalValuation:
    """
    A set of valuation measures described through sample data

    kind 'risk': determining set of the Weighted V@R;
    'factor': its conditional version given factor samples;
    'contribution': extreme measure of the wealth samples;
    'factor-contribution': extreme measure of E(W | Y).
    """

    measure: WeightingMeasure
    kind: str = "risk"
    factor: Optional[np.ndarray] = None
    wealth: Optional[np.ndarray] = None
    bins: Optional[int] = None

    def __post_init__(self):
        if self.kind not in VALUATION_KINDS:
            raise DomainError(f"Valuation kind must be one of {VALUATION_KINDS}, got {self.kind!r}")
        if "factor" in self.kind and (self.factor is None or self.bins is None):
            raise DomainError(f"Valuation kind {self.kind!r} needs factor samples and a bin count")
        if "contribution" in self.kind and self.wealth is None:
            raise DomainError(f"Valuation kind {self.kind!r} needs wealth samples")

    def sup_expectation(self, samples: Sequence[float]) -> float:
        """sup E_Q X over the valuation set"""
        x = _samples(samples)
        for extra in (self.factor, self.wealth):
            if extra is not None and len(extra) != x.size:
                raise ShapeError(f"{len(extra)} auxiliary samples for {x.size} observations")
        if self.kind == "risk":
            return est_wvar(-x, self.measure)
        if self.kind == "factor":
            return est_factor_risk(np.column_stack([-x, self.factor]), self.measure, self.bins)
        if self.kind == "contribution":
            return est_risk_contribution(np.column_stack([x, self.wealth]), self.measure).value
        return est_factor_risk_contribution(
            np.column_stack([x, self.factor, self.wealth]), self.measure, self.bins
        ).value


ValuationLike = Union[WeightingMeasure, EmpiricalValuation, Sequence[EmpiricalValuation]]


def _as_group(valuation: ValuationLike) -> List[EmpiricalValuation]:
    if isinstance(valuation, WeightingMeasure):
        return [EmpiricalValuation(valuation)]
    if isinstance(valuation, EmpiricalValuation):
        return [valuation]
    group = list(valuation)
    if not group:
        raise DomainError("Empty valuation group")
    return [_as_group(v)[0] if not isinstance(v, EmpiricalValuation) else v for v in group]


def est_sup_expectation(samples: Sequence[float], valuation: ValuationLike) -> float:
    """
    sup E_Q X over a valuation set, or over the convex hull of several (their maximum)

    Args:
        samples: observations of X
        valuation: one valuation or a list whose convex hull is taken

    Returns:
        Estimated supremum
    """
    return max(v.sup_expectation(samples) for v in _as_group(valuation))


def est_upper_price(
    claim_samples: Sequence[float],
    hedge_candidates: Sequence[Sequence[float]],
    groups: Sequence[ValuationLike]
) -> float:
    """
    Upper estimate of the upper price: min over groups and candidate hedges X of
    sup E_Q (F - X) over the group's valuation set

    Args:
        claim_samples: observations of F
        hedge_candidates: P&L samples of admissible trades, aligned with F; empty means the zero trade
        groups: valuation groups, each a valuation or a list of them

    Returns:
        Upper bound estimate of V(F)
    """
    claim = _samples(claim_samples, "claim samples")
    candidates = [_samples(c, "candidate samples") for c in hedge_candidates] or [np.zeros(claim.size)]
    for candidate in candidates:
        if candidate.size != claim.size:
            raise ShapeError(f"Candidate has {candidate.size} samples for {claim.size} claim samples")
    if isinstance(groups, (WeightingMeasure, EmpiricalValuation)):
        groups = [groups]
    if not groups:
        raise DomainError("At least one valuation group is required")
    best = min(
        est_sup_expectation(claim - candidate, group)
        for group in groups
        for candidate in candidates
    )
    logger.debug("Upper price estimate %.6g over %d groups and %d candidates", best, len(groups), len(candidates))
    return best
