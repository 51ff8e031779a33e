"""Closed-form criteria for parameter-optimized Sharpe ratios.

An in-sample Sharpe rho_hat earned by optimizing k parameters over a horizon
of T years overstates what the same portfolio earns out of sample. The
unbiased correction is

    sric(rho_hat, k, T) = rho_hat - k / (T * rho_hat),

and the correction splits, to order 1/T, into equal halves of noise fit
(lucky in-sample Sharpe) and estimation error (out-of-sample Sharpe given
up to parameter noise). This module also provides the AIC in the same
setting (an unbiased estimator of out-of-sample mean-variance utility after
normalization), a historical biased comparator, a net-of-cost variant, and
the distribution of the gap rho_hat - tau_hat in both the zero-signal and
positive-signal regimes.

Conventions. k counts Sharpe-relevant parameters: a model with d free
portfolio weights has k = d - 1, because one direction only sets leverage
and the Sharpe ratio is leverage-invariant. T is in years, rho_hat in
year^-1/2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy import stats

from .errors import DomainError

# Below this in-sample Sharpe (annualized) the 1/rho correction term is
# meaningless noise amplification; selection gets an ordered sentinel
# instead of a huge negative float.
RHO_FLOOR = 1e-8

# Semantic minus infinity: compares below every finite criterion value, so
# selection keeps a total order without overflow.
NEGATIVE_SENTINEL = float("-inf")


class Criterion(enum.Enum):
    SRIC = "sric"
    AIC = "aic"
    NEG_AIC_OVER_T = "neg_aic_over_t"
    SIEGEL_WOODGATE = "siegel_woodgate"
    IN_SAMPLE_SHARPE = "in_sample_sharpe"


class GapRegime(enum.Enum):
    NULL_TAU_ZERO = "null_tau_zero"
    POSITIVE_TAU = "positive_tau"


@dataclass(frozen=True)
class CriterionValue:
    """One criterion evaluation: which formula, its value, and its inputs."""

    name: Criterion
    value: float
    k: int
    horizon_years: float


@dataclass(frozen=True)
class UncertaintyMoments:
    """Mean and variance of the gap rho_hat - tau_hat in a given regime."""

    mean_gap: float
    var_gap: float
    regime: GapRegime

    def __post_init__(self):
        if not self.var_gap > 0:
            raise DomainError(f"var_gap must be positive, got {self.var_gap}")


def _check_args(rho_hat: float, k: int, horizon_years: float) -> None:
    if rho_hat < 0:
        raise DomainError(f"rho_hat is a norm and must be >= 0, got {rho_hat}")
    if math.isnan(rho_hat):
        raise DomainError("rho_hat must not be NaN")
    if k < 0 or int(k) != k:
        raise DomainError(f"k must be a non-negative integer, got {k}")
    if not horizon_years > 0:
        raise DomainError(f"horizon_years must be positive, got {horizon_years}")


def sric(rho_hat: float, k: int, horizon_years: float) -> float:
    """Unbiased out-of-sample Sharpe estimate rho_hat - k/(T rho_hat).

    With k = 0 there is nothing to correct and the input is returned exactly.
    At or below RHO_FLOOR with k > 0 the correction diverges; the function
    returns NEGATIVE_SENTINEL so that selection still has a total order.
    """
    _check_args(rho_hat, k, horizon_years)
    if k == 0:
        return rho_hat
    if rho_hat <= RHO_FLOOR:
        return NEGATIVE_SENTINEL
    return rho_hat - k / (horizon_years * rho_hat)


def sric_split(rho_hat: float, k: int, horizon_years: float) -> tuple[float, float]:
    """Estimated (noise_fit, estimation_error) halves of the sric correction.

    Each half equals k/(2 T rho_hat); the split is exact for the estimator
    and valid to order o(1/T) for the quantities it estimates. Below the
    rho floor with k > 0 both halves are +inf, consistent with sric being
    NEGATIVE_SENTINEL there.
    """
    _check_args(rho_hat, k, horizon_years)
    if k == 0:
        return (0.0, 0.0)
    if rho_hat <= RHO_FLOOR:
        return (math.inf, math.inf)
    half = k / (2.0 * horizon_years * rho_hat)
    return (half, half)


def aic(rho_hat: float, k: int, horizon_years: float) -> float:
    """AIC for a Gaussian return model with k+1 free weights: -T rho^2 + 2(k+1)."""
    _check_args(rho_hat, k, horizon_years)
    return -horizon_years * rho_hat * rho_hat + 2.0 * (k + 1)


def aic_normalized(rho_hat: float, k: int, horizon_years: float) -> float:
    """Normalized form rho_hat^2 - 2(k+1)/T, an unbiased estimate of
    out-of-sample mean-variance utility at gamma = 1.

    Computed as -aic/T so the algebraic identity between the two forms is
    exact in floating point.
    """
    return -aic(rho_hat, k, horizon_years) / horizon_years


def siegel_woodgate(rho_hat: float, k: int, horizon_years: float) -> float:
    """Historical comparator rho_hat - (k-1)/(T rho_hat).

    Biased of order 1/T: its adjustment lacks one degree of freedom relative
    to sric. Shipped for comparison only; never used by default selection.
    At or below the rho floor the comparator is undefined (except at k = 1,
    where the adjustment vanishes); NEGATIVE_SENTINEL keeps the order total.
    """
    _check_args(rho_hat, k, horizon_years)
    if k == 1:
        return rho_hat
    if rho_hat <= RHO_FLOOR:
        return NEGATIVE_SENTINEL
    return rho_hat - (k - 1) / (horizon_years * rho_hat)


def sric_net(rho_hat: float, k: int, horizon_years: float, cost: float) -> float:
    """sric minus a constant annualized cost Sharpe drag.

    Estimation happens on the gross Sharpe; a constant cost shifts the
    in-sample and out-of-sample Sharpe alike, so the net estimate is just
    sric(rho_hat, k, T) - cost.
    """
    if cost < 0:
        raise DomainError(f"cost must be >= 0, got {cost}")
    return sric(rho_hat, k, horizon_years) - cost


def criterion_value(name: Criterion, rho_hat: float, k: int, horizon_years: float) -> CriterionValue:
    """Evaluate one named criterion and package it with its inputs."""
    if name is Criterion.SRIC:
        v = sric(rho_hat, k, horizon_years)
    elif name is Criterion.AIC:
        v = aic(rho_hat, k, horizon_years)
    elif name is Criterion.NEG_AIC_OVER_T:
        v = aic_normalized(rho_hat, k, horizon_years)
    elif name is Criterion.SIEGEL_WOODGATE:
        v = siegel_woodgate(rho_hat, k, horizon_years)
    elif name is Criterion.IN_SAMPLE_SHARPE:
        _check_args(rho_hat, k, horizon_years)
        v = rho_hat
    else:
        raise DomainError(f"unknown criterion {name!r}")
    return CriterionValue(name=name, value=v, k=int(k), horizon_years=float(horizon_years))


@dataclass(frozen=True, eq=False)
class GapDistributionNull:
    """Distribution of rho_hat - tau_hat when the true Sharpe is zero.

    With mu = 0 the gap equals the Mahalanobis length of the noise, which is
    chi-distributed with k+1 degrees of freedom, scaled by 1/sqrt(T).
    """

    k: int
    horizon_years: float

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise DomainError(f"k must be a non-negative integer, got {self.k}")
        if not self.horizon_years > 0:
            raise DomainError(f"horizon_years must be positive, got {self.horizon_years}")
        dist = stats.chi(self.k + 1, scale=1.0 / math.sqrt(self.horizon_years))
        object.__setattr__(self, "_dist", dist)

    def mean(self) -> float:
        return float(self._dist.mean())

    def variance(self) -> float:
        return float(self._dist.var())

    def cdf(self, x):
        return self._dist.cdf(x)

    def quantile(self, p):
        return self._dist.ppf(p)

    def moments(self) -> UncertaintyMoments:
        return UncertaintyMoments(
            mean_gap=self.mean(), var_gap=self.variance(), regime=GapRegime.NULL_TAU_ZERO
        )


def gap_distribution_null(k: int, horizon_years: float) -> GapDistributionNull:
    """Distribution handle for the gap under the zero-true-Sharpe regime."""
    return GapDistributionNull(k=int(k), horizon_years=float(horizon_years))


def sharpe_pvalue(rho_hat: float, k: int, horizon_years: float) -> float:
    """P(observing an in-sample Sharpe >= rho_hat | true Sharpe is 0).

    Under the null the in-sample Sharpe is chi(k+1)/sqrt(T)-distributed, so
    the p-value is the chi-squared(k+1) survival function at T rho_hat^2.
    """
    _check_args(rho_hat, k, horizon_years)
    return float(stats.chi2.sf(horizon_years * rho_hat * rho_hat, k + 1))


def gap_moments_positive(tau_star: float, k: int, horizon_years: float) -> UncertaintyMoments:
    """Moments of the gap rho_hat - tau_hat when the true Sharpe is positive.

    To order o(1/T) the gap is Z/(T tau_star) + N/sqrt(T) with Z chi-squared
    with k degrees of freedom and N standard normal; the implied moments are
    mean k/(T tau_star) and variance 2k/(T tau_star)^2 + 1/T.
    The remainder term has no closed form and is deliberately excluded; the
    simulation module measures it instead of guessing.
    """
    if not tau_star > 0:
        raise DomainError(
            f"tau_star must be positive, got {tau_star}; use gap_distribution_null for the zero regime"
        )
    if k < 0 or int(k) != k:
        raise DomainError(f"k must be a non-negative integer, got {k}")
    if not horizon_years > 0:
        raise DomainError(f"horizon_years must be positive, got {horizon_years}")
    t = horizon_years
    mean_gap = k / (t * tau_star)
    var_gap = 2.0 * k / (t * t * tau_star * tau_star) + 1.0 / t
    return UncertaintyMoments(mean_gap=mean_gap, var_gap=var_gap, regime=GapRegime.POSITIVE_TAU)
