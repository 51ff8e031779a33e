"""In-sample optimization and the exact Sharpe / utility decompositions.

All quantities reduce to three whitened inner products. Write y = L^-1 mu
and z = L^-1 mu_hat with L the Cholesky factor of sigma; then

    rho_hat  = |z|          in-sample Sharpe of the fitted portfolio
    tau_star = |y|          out-of-sample Sharpe of the optimal portfolio
    tau_hat  = (y.z)/|z|    projection of y onto the fitted direction
    rho_star = (y.z)/|y|    projection of z onto the optimal direction

and the mean-variance utilities are quadratic in the same y and z. These
exact finite-sample identities are what the closed-form criteria estimate
in expectation.

The Sharpe maximizer is a ray {c * sigma^-1 mu_hat : c > 0}; the canonical
representative c = 1 is returned, with the positive-Sharpe sign. The short
portfolio is never returned.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .core import (
    CovMatrix,
    MVDecomposition,
    PopulationModel,
    SampleEstimate,
    SharpeDecomposition,
    whiten,
)
from .errors import (
    BasisRankError,
    DegenerateEstimateError,
    DegeneratePopulationError,
    DimensionError,
    DomainError,
    NotPositiveDefiniteError,
)


def _solve_spd(sigma: CovMatrix, v: np.ndarray) -> np.ndarray:
    # sigma^-1 v via two triangular solves against the cached factor.
    half = solve_triangular(sigma.chol, v, lower=True)
    return solve_triangular(sigma.chol.T, half, lower=False)


def max_insample_sharpe(est: SampleEstimate) -> tuple[np.ndarray, float]:
    """Return (theta_hat, rho_hat) maximizing the in-sample Sharpe.

    theta_hat = sigma^-1 mu_hat is the canonical representative of the
    maximizing ray; rho_hat is the Mahalanobis norm of mu_hat.
    """
    if not np.any(est.mu_hat):
        raise DegenerateEstimateError("mu_hat is zero; the Sharpe-maximizing ray is undefined")
    theta_hat = _solve_spd(est.sigma, est.mu_hat)
    rho_hat = float(np.linalg.norm(whiten(est.mu_hat, est.sigma)))
    return theta_hat, rho_hat


def sharpe_of(theta, mu, sigma: CovMatrix) -> float:
    """Sharpe ratio mu.theta / sqrt(theta.sigma.theta) of a fixed portfolio.

    Pass mu = mu_hat for the in-sample Sharpe and mu = the true mean for the
    out-of-sample Sharpe of the same weights.
    """
    theta = np.asarray(theta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if theta.shape != (sigma.dim,) or mu.shape != (sigma.dim,):
        raise DimensionError(
            f"theta {theta.shape} and mu {mu.shape} must both have length {sigma.dim}"
        )
    if not np.any(theta):
        raise DomainError("theta is zero; Sharpe ratio undefined")
    vol = float(np.sqrt(theta @ sigma.entries @ theta))
    return float(mu @ theta) / vol


def _check_shared_sigma(pop: PopulationModel, est: SampleEstimate) -> None:
    if pop.sigma is not est.sigma and not np.array_equal(pop.sigma.entries, est.sigma.entries):
        raise DimensionError("population and estimate must share the same covariance")
    if pop.horizon_years != est.horizon_years:
        raise DimensionError("population and estimate must share the same horizon")


def decompose(pop: PopulationModel, est: SampleEstimate) -> SharpeDecomposition:
    """Exact decomposition rho_hat = tau_hat + N + E + U for one draw.

    Requires mu != 0; with a zero true mean tau_star = 0, the true optimal
    ray is undefined and so is rho_star. Callers in that regime should use
    the null-regime gap distribution instead, where tau_hat is identically 0
    and rho_hat itself is the gap.
    """
    _check_shared_sigma(pop, est)
    if not np.any(pop.mu):
        raise DegeneratePopulationError(
            "mu is zero: tau_star = 0, tau_hat = 0 and rho_star is undefined; "
            "use gap_distribution_null for this regime"
        )
    if not np.any(est.mu_hat):
        raise DegenerateEstimateError("mu_hat is zero; rho_hat's direction is undefined")
    y = whiten(pop.mu, pop.sigma)
    z = whiten(est.mu_hat, est.sigma)
    tau_star = float(np.linalg.norm(y))
    rho_hat = float(np.linalg.norm(z))
    b = float(y @ z)
    tau_hat = b / rho_hat
    rho_star = b / tau_star
    return SharpeDecomposition(
        rho_hat=rho_hat,
        rho_star=rho_star,
        tau_hat=tau_hat,
        tau_star=tau_star,
        noise_fit=rho_hat - rho_star,
        estimation_error=tau_star - tau_hat,
        noise=rho_star - tau_star,
    )


def decompose_mv(pop: PopulationModel, est: SampleEstimate, gamma: float) -> MVDecomposition:
    """Exact mean-variance decomposition for one draw, risk aversion gamma.

    In-sample utility u_hat(theta) = 2 mu_hat.theta - gamma theta.sigma.theta
    is maximized by theta_hat = sigma^-1 mu_hat / gamma, giving
    u_hat(theta_hat) = rho_hat^2 / gamma. A zero mu is allowed here: all
    utilities are defined at the zero portfolio.
    """
    _check_shared_sigma(pop, est)
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    y = whiten(pop.mu, pop.sigma)
    z = whiten(est.mu_hat, est.sigma)
    a = float(y @ y)
    b = float(y @ z)
    c = float(z @ z)
    return MVDecomposition(
        gamma=gamma,
        u_hat_at_theta_hat=c / gamma,
        u_at_theta_hat=(2.0 * b - c) / gamma,
        u_at_theta_star=a / gamma,
        noise_fit_mv=(c - 2.0 * b + a) / gamma,
        estimation_error_mv=(a - 2.0 * b + c) / gamma,
        noise_mv=2.0 * (b - a) / gamma,
    )


def max_insample_sharpe_subspace(est: SampleEstimate, basis) -> tuple[np.ndarray, float]:
    """Maximize the in-sample Sharpe over the span of the basis columns.

    Solves the reduced problem (B.T mu_hat, B.T sigma B), then embeds the
    solution back into the full space; no projector matrices are formed.
    The reduced covariance is positive definite exactly when the basis has
    full column rank, so rank deficiency is detected by the factorization.
    """
    b = np.asarray(basis, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    if b.ndim != 2 or b.shape[0] != est.dim:
        raise DimensionError(
            f"basis must be {est.dim} x m column vectors, got shape {b.shape}"
        )
    if b.shape[1] == 0 or b.shape[1] > est.dim:
        raise BasisRankError(f"basis must have between 1 and {est.dim} columns, got {b.shape[1]}")
    reduced = b.T @ est.sigma.entries @ b
    reduced = (reduced + reduced.T) / 2.0
    try:
        sigma_r = CovMatrix(reduced)
    except NotPositiveDefiniteError as exc:
        raise BasisRankError(f"basis columns are linearly dependent: {exc}") from exc
    mu_r = b.T @ est.mu_hat
    est_r = SampleEstimate(mu_hat=mu_r, sigma=sigma_r, horizon_years=est.horizon_years)
    theta_r, rho_hat = max_insample_sharpe(est_r)
    return b @ theta_r, rho_hat
