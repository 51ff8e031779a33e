"""Core domain types and the Mahalanobis geometry they live in.

Everything downstream treats Sharpe ratios as lengths and projections under
the inner product induced by the inverse covariance. The types here pin down
that geometry once:

  * CovMatrix validates and Cholesky-factorizes a covariance exactly once;
    simulations perform on the order of 1e5 solves against a fixed matrix,
    so the factor is cached at construction and reused everywhere.
  * PopulationModel holds the true annualized mean mu, the covariance, and
    the sample horizon T in years. SampleEstimate holds the noisy mean mu_hat
    observed over that horizon.
  * SharpeDecomposition and MVDecomposition carry the exact identities
    rho_hat = tau_hat + N + E + U (Sharpe units) and
    u_hat(theta_hat) = u(theta_hat) + N_mv + E_mv + U_mv (utility units),
    validated on construction.

Units: means are per year, covariances per year, Sharpe ratios year^-1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionError,
    DomainError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)

# Absolute tolerance for |S - S.T|; covariances are built from data or given
# by hand, and anything beyond round-off asymmetry is a caller bug.
SYMMETRY_ATOL = 1e-10

# A Cholesky pivot (squared diagonal of L) below this fraction of the largest
# diagonal entry means the matrix is numerically rank-deficient. Relative so
# the check behaves the same for daily and annual return scales.
PIVOT_RTOL = 1e-12


def _as_vector(x, dim: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"expected length {dim}, got {v.shape[0]}")
    return v


@dataclass(frozen=True, eq=False)
class CovMatrix:
    """Symmetric positive-definite covariance with a cached Cholesky factor.

    The factor L (lower triangular, L @ L.T == entries) is computed once at
    construction. Rank-deficient input is rejected; there is no pseudo-inverse
    fallback.
    """

    entries: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = np.asarray(self.entries, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise DimensionError(f"covariance must be square, got shape {s.shape}")
        if s.shape[0] == 0:
            raise DimensionError("covariance must have positive dimension")
        if not np.all(np.isfinite(s)):
            raise DomainError("covariance entries must be finite")
        if np.max(np.abs(s - s.T)) > SYMMETRY_ATOL:
            raise NotSymmetricError(
                f"covariance asymmetry {np.max(np.abs(s - s.T)):.3e} exceeds {SYMMETRY_ATOL:.0e}"
            )
        s = (s + s.T) / 2.0
        try:
            L = np.linalg.cholesky(s)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"Cholesky failed: {exc}") from exc
        pivots = np.diag(L) ** 2
        floor = PIVOT_RTOL * np.max(np.diag(s))
        if np.min(pivots) <= floor:
            raise NotPositiveDefiniteError(
                f"smallest Cholesky pivot {np.min(pivots):.3e} is at or below {floor:.3e}"
            )
        s.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "entries", s)
        object.__setattr__(self, "chol", L)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @staticmethod
    def identity(dim: int) -> "CovMatrix":
        return CovMatrix(np.eye(dim))


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """True annualized mean mu, covariance sigma, and horizon T in years."""

    mu: np.ndarray
    sigma: CovMatrix
    horizon_years: float

    def __post_init__(self):
        mu = _as_vector(self.mu, self.sigma.dim)
        if not np.all(np.isfinite(mu)):
            raise DomainError("mu must be finite")
        if not self.horizon_years > 0:
            raise DomainError(f"horizon_years must be positive, got {self.horizon_years}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "horizon_years", float(self.horizon_years))

    @property
    def dim(self) -> int:
        return self.sigma.dim


@dataclass(frozen=True, eq=False)
class SampleEstimate:
    """Noisy annualized mean mu_hat observed over horizon_years."""

    mu_hat: np.ndarray
    sigma: CovMatrix
    horizon_years: float

    def __post_init__(self):
        mu_hat = _as_vector(self.mu_hat, self.sigma.dim)
        if not np.all(np.isfinite(mu_hat)):
            raise DomainError("mu_hat must be finite")
        if not self.horizon_years > 0:
            raise DomainError(f"horizon_years must be positive, got {self.horizon_years}")
        mu_hat.setflags(write=False)
        object.__setattr__(self, "mu_hat", mu_hat)
        object.__setattr__(self, "horizon_years", float(self.horizon_years))

    @property
    def dim(self) -> int:
        return self.sigma.dim


# Slack for the constructive inequalities below: N and E are differences of
# norms/projections that are non-negative in exact arithmetic.
_NONNEG_SLACK = 1e-12
_IDENTITY_ATOL = 1e-9


@dataclass(frozen=True)
class SharpeDecomposition:
    """Split of the in-sample Sharpe into its out-of-sample value and luck.

    rho_hat  in-sample Sharpe of the fitted portfolio
    rho_star in-sample Sharpe of the true optimal portfolio
    tau_hat  out-of-sample Sharpe of the fitted portfolio
    tau_star out-of-sample Sharpe of the true optimal portfolio
    noise_fit        N = rho_hat - rho_star >= 0
    estimation_error E = tau_star - tau_hat >= 0
    noise            U = rho_star - tau_star, zero in expectation

    The identity rho_hat = tau_hat + N + E + U holds by construction.
    """

    rho_hat: float
    rho_star: float
    tau_hat: float
    tau_star: float
    noise_fit: float
    estimation_error: float
    noise: float

    def __post_init__(self):
        resid = self.rho_hat - (
            self.tau_hat + self.noise_fit + self.estimation_error + self.noise
        )
        if abs(resid) > _IDENTITY_ATOL:
            raise DomainError(f"decomposition identity violated by {resid:.3e}")
        if self.noise_fit < -_NONNEG_SLACK:
            raise DomainError(f"noise_fit must be >= 0, got {self.noise_fit:.3e}")
        if self.estimation_error < -_NONNEG_SLACK:
            raise DomainError(
                f"estimation_error must be >= 0, got {self.estimation_error:.3e}"
            )
        if self.rho_hat < 0 or self.tau_star < 0:
            raise DomainError("rho_hat and tau_star are norms and must be >= 0")


@dataclass(frozen=True)
class MVDecomposition:
    """Mean-variance analogue of SharpeDecomposition, in utility units.

    u_hat_at_theta_hat  in-sample utility of the fitted portfolio
    u_at_theta_hat      true utility of the fitted portfolio
    u_at_theta_star     true utility of the optimal portfolio
    noise_fit_mv, estimation_error_mv, noise_mv  the three gap terms

    Identity: u_hat_at_theta_hat = u_at_theta_hat + N_mv + E_mv + U_mv.
    With gamma = 1 the in-sample utility equals rho_hat squared.
    """

    gamma: float
    u_hat_at_theta_hat: float
    u_at_theta_hat: float
    u_at_theta_star: float
    noise_fit_mv: float
    estimation_error_mv: float
    noise_mv: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        resid = self.u_hat_at_theta_hat - (
            self.u_at_theta_hat
            + self.noise_fit_mv
            + self.estimation_error_mv
            + self.noise_mv
        )
        if abs(resid) > _IDENTITY_ATOL:
            raise DomainError(f"mv decomposition identity violated by {resid:.3e}")


def whiten(x, sigma: CovMatrix) -> np.ndarray:
    """Return L^-1 x where L L.T = sigma.

    The Euclidean norm of the result is the Mahalanobis norm of x, so all
    Sharpe-as-length arguments reduce to plain geometry on whitened vectors.
    """
    v = _as_vector(x, sigma.dim)
    return solve_triangular(sigma.chol, v, lower=True)


def mahalanobis_norm(x, sigma: CovMatrix) -> float:
    """Return sqrt(x.T sigma^-1 x), computed via the cached Cholesky factor.

    Never forms an explicit inverse: one triangular solve and one norm.
    """
    return float(np.linalg.norm(whiten(x, sigma)))
