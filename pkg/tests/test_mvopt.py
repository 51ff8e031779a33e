"""Mean-variance optimization and the in/out-of-sample Sharpe decomposition."""

from __future__ import annotations

import math

import numpy as np
import pytest

from sric.core import CovMatrix, PopulationModel, SampleEstimate
from sric.errors import (
    BasisRankError,
    DegenerateEstimateError,
    DegeneratePopulationError,
    DimensionError,
    DomainError,
)
from sric.mvopt import (
    decompose,
    decompose_mv,
    max_insample_sharpe,
    max_insample_sharpe_subspace,
    sharpe_of,
)


def random_pd(rng, dim):
    a = rng.normal(size=(dim, dim))
    return a.T @ a + dim * np.eye(dim)


def estimate(mu_hat, sigma, horizon=10.0):
    return SampleEstimate(mu_hat=mu_hat, sigma=sigma, horizon_years=horizon)


class TestMaxInsampleSharpe:
    def test_identity_covariance(self):
        theta, rho = max_insample_sharpe(estimate([3.0, 4.0], CovMatrix.identity(2)))
        assert rho == pytest.approx(5.0, rel=1e-12)
        # theta is the canonical representative sigma^-1 mu_hat.
        assert np.allclose(theta, [3.0, 4.0], atol=1e-12)

    def test_diagonal_covariance(self):
        theta, rho = max_insample_sharpe(
            estimate([1.0, 2.0], CovMatrix(np.diag([1.0, 4.0])))
        )
        assert np.allclose(theta, [1.0, 0.5], atol=1e-12)
        assert rho == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_scaling_mu(self):
        sigma = CovMatrix(np.diag([2.0, 3.0]))
        _, rho = max_insample_sharpe(estimate([1.0, -1.0], sigma))
        _, rho10 = max_insample_sharpe(estimate([10.0, -10.0], sigma))
        assert rho10 == pytest.approx(10.0 * rho, rel=1e-12)

    def test_zero_mu_hat_rejected(self):
        with pytest.raises(DegenerateEstimateError):
            max_insample_sharpe(estimate([0.0, 0.0], CovMatrix.identity(2)))

    def test_achieves_maximum(self):
        # No random portfolio beats the closed-form solution.
        rng = np.random.default_rng(21)
        sigma = CovMatrix(random_pd(rng, 4))
        est = estimate(rng.normal(size=4), sigma)
        theta, rho = max_insample_sharpe(est)
        assert sharpe_of(theta, est.mu_hat, sigma) == pytest.approx(rho, rel=1e-10)
        for _ in range(100):
            contender = rng.normal(size=4)
            assert sharpe_of(contender, est.mu_hat, sigma) <= rho + 1e-10


class TestSharpeOf:
    def test_hand_values(self):
        eye = CovMatrix.identity(2)
        assert sharpe_of([1.0, 0.0], [1.0, 0.0], eye) == pytest.approx(1.0)
        assert sharpe_of([1.0, 1.0], [1.0, 0.0], eye) == pytest.approx(
            1.0 / math.sqrt(2.0), abs=1e-6
        )

    def test_positive_scale_invariance(self):
        rng = np.random.default_rng(22)
        sigma = CovMatrix(random_pd(rng, 3))
        theta = rng.normal(size=3)
        mu = rng.normal(size=3)
        base = sharpe_of(theta, mu, sigma)
        for c in (0.1, 2.0, 500.0):
            assert sharpe_of(c * theta, mu, sigma) == pytest.approx(base, abs=1e-12)
        assert sharpe_of(-theta, mu, sigma) == pytest.approx(-base, abs=1e-12)

    def test_zero_theta_rejected(self):
        with pytest.raises(DomainError):
            sharpe_of([0.0, 0.0], [1.0, 0.0], CovMatrix.identity(2))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            sharpe_of([1.0], [1.0, 0.0], CovMatrix.identity(2))


class TestDecompose:
    def test_hand_example(self):
        pop = PopulationModel(mu=[1.0, 0.0], sigma=CovMatrix.identity(2), horizon_years=10.0)
        est = estimate([1.0, 1.0], pop.sigma)
        d = decompose(pop, est)
        assert d.rho_hat == pytest.approx(math.sqrt(2.0), abs=1e-6)
        assert d.tau_hat == pytest.approx(0.707107, abs=1e-6)
        assert d.rho_star == pytest.approx(1.0, abs=1e-6)
        assert d.tau_star == pytest.approx(1.0, abs=1e-6)
        assert d.noise_fit == pytest.approx(0.414214, abs=1e-6)
        assert d.estimation_error == pytest.approx(0.292893, abs=1e-6)
        assert d.noise == pytest.approx(0.0, abs=1e-12)

    def test_perfect_estimate_has_zero_gaps(self):
        sigma = CovMatrix(np.diag([4.0, 1.0]))
        pop = PopulationModel(mu=[2.0, 0.0], sigma=sigma, horizon_years=5.0)
        est = estimate([2.0, 0.0], sigma, horizon=5.0)
        d = decompose(pop, est)
        assert d.tau_star == pytest.approx(1.0, abs=1e-12)
        assert d.rho_hat == pytest.approx(1.0, abs=1e-12)
        assert d.noise_fit == pytest.approx(0.0, abs=1e-12)
        assert d.estimation_error == pytest.approx(0.0, abs=1e-12)
        assert d.noise == pytest.approx(0.0, abs=1e-12)

    def test_identity_and_bounds_on_random_triples(self):
        rng = np.random.default_rng(23)
        for _ in range(10_000):
            dim = int(rng.integers(1, 6))
            sigma = CovMatrix(random_pd(rng, dim))
            mu = rng.normal(size=dim)
            if not np.any(mu):
                continue
            pop = PopulationModel(mu=mu, sigma=sigma, horizon_years=10.0)
            est = estimate(mu + rng.normal(size=dim), sigma)
            if not np.any(est.mu_hat):
                continue
            d = decompose(pop, est)
            total = d.tau_hat + d.noise_fit + d.estimation_error + d.noise
            assert d.rho_hat == pytest.approx(total, rel=1e-9, abs=1e-9)
            assert d.noise_fit >= -1e-12
            assert d.estimation_error >= -1e-12
            assert d.tau_hat <= d.tau_star + 1e-12

    def test_cross_term_identity(self):
        # tau_hat * rho_hat equals mu' sigma^-1 mu_hat.
        rng = np.random.default_rng(24)
        for _ in range(100):
            dim = int(rng.integers(1, 6))
            sigma = CovMatrix(random_pd(rng, dim))
            mu = rng.normal(size=dim) + 0.1
            mu_hat = mu + rng.normal(size=dim)
            pop = PopulationModel(mu=mu, sigma=sigma, horizon_years=10.0)
            d = decompose(pop, estimate(mu_hat, sigma))
            cross = float(mu @ np.linalg.solve(sigma.entries, mu_hat))
            assert d.tau_hat * d.rho_hat == pytest.approx(cross, rel=1e-9, abs=1e-9)

    def test_noise_is_mean_zero(self):
        # U = rho_star - tau_star averages to zero over estimation noise.
        rng = np.random.default_rng(25)
        mu = np.array([0.5, 1.0, -0.3])
        t = 10.0
        draws = mu + rng.normal(size=(100_000, 3)) / math.sqrt(t)
        # With identity covariance the whitening map is trivial, so
        # rho_star = mu.z / |mu| and U = rho_star - |mu| in closed form.
        tau_star = float(np.linalg.norm(mu))
        u = draws @ mu / tau_star - tau_star
        se = u.std(ddof=1) / math.sqrt(u.size)
        assert abs(u.mean()) < 3.0 * se
        # The vectorized formula agrees with decompose draw by draw.
        eye = CovMatrix.identity(3)
        pop = PopulationModel(mu=mu, sigma=eye, horizon_years=t)
        for row, expected in zip(draws[:100], u[:100]):
            d = decompose(pop, estimate(row, eye, horizon=t))
            assert d.noise == pytest.approx(float(expected), rel=1e-9, abs=1e-9)

    def test_leverage_invariance(self):
        # Scaling mu_hat by c and sigma by c^2 leaves every Sharpe unchanged.
        rng = np.random.default_rng(26)
        sigma_entries = random_pd(rng, 3)
        mu = rng.normal(size=3)
        mu_hat = mu + rng.normal(size=3)
        pop = PopulationModel(mu=mu, sigma=CovMatrix(sigma_entries), horizon_years=10.0)
        d = decompose(pop, estimate(mu_hat, pop.sigma))
        for c in (0.5, 3.0):
            sigma_c = CovMatrix(c * c * sigma_entries)
            pop_c = PopulationModel(mu=c * mu, sigma=sigma_c, horizon_years=10.0)
            d_c = decompose(pop_c, estimate(c * mu_hat, sigma_c))
            assert d_c.rho_hat == pytest.approx(d.rho_hat, rel=1e-9)
            assert d_c.tau_hat == pytest.approx(d.tau_hat, rel=1e-9)
            assert d_c.tau_star == pytest.approx(d.tau_star, rel=1e-9)

    def test_zero_mu_directed_to_null_regime(self):
        eye = CovMatrix.identity(2)
        pop = PopulationModel(mu=[0.0, 0.0], sigma=eye, horizon_years=10.0)
        with pytest.raises(DegeneratePopulationError, match="gap_distribution_null"):
            decompose(pop, estimate([1.0, 1.0], eye))

    def test_zero_mu_hat_rejected(self):
        eye = CovMatrix.identity(2)
        pop = PopulationModel(mu=[1.0, 0.0], sigma=eye, horizon_years=10.0)
        with pytest.raises(DegenerateEstimateError):
            decompose(pop, estimate([0.0, 0.0], eye))

    def test_mismatched_inputs_rejected(self):
        eye = CovMatrix.identity(2)
        pop = PopulationModel(mu=[1.0, 0.0], sigma=eye, horizon_years=10.0)
        with pytest.raises(DimensionError):
            decompose(pop, estimate([1.0, 1.0], CovMatrix(np.diag([2.0, 1.0]))))
        with pytest.raises(DimensionError):
            decompose(pop, estimate([1.0, 1.0], eye, horizon=5.0))


class TestDecomposeMV:
    def test_hand_example(self):
        eye = CovMatrix.identity(2)
        pop = PopulationModel(mu=[1.0, 0.0], sigma=eye, horizon_years=10.0)
        d = decompose_mv(pop, estimate([1.0, 1.0], eye), gamma=1.0)
        assert d.u_hat_at_theta_hat == pytest.approx(2.0, abs=1e-12)
        assert d.u_at_theta_hat == pytest.approx(0.0, abs=1e-12)
        assert d.u_at_theta_star == pytest.approx(1.0, abs=1e-12)
        assert d.noise_fit_mv == pytest.approx(1.0, abs=1e-12)
        assert d.estimation_error_mv == pytest.approx(1.0, abs=1e-12)
        assert d.noise_mv == pytest.approx(0.0, abs=1e-12)

    def test_gamma_one_links_to_rho_hat(self):
        rng = np.random.default_rng(27)
        for _ in range(50):
            dim = int(rng.integers(1, 6))
            sigma = CovMatrix(random_pd(rng, dim))
            mu = rng.normal(size=dim) + 0.2
            est = estimate(mu + rng.normal(size=dim), sigma)
            pop = PopulationModel(mu=mu, sigma=sigma, horizon_years=10.0)
            _, rho_hat = max_insample_sharpe(est)
            d = decompose_mv(pop, est, gamma=1.0)
            assert d.u_hat_at_theta_hat == pytest.approx(rho_hat**2, rel=1e-12)

    def test_gamma_scales_utilities(self):
        eye = CovMatrix.identity(2)
        pop = PopulationModel(mu=[1.0, 0.0], sigma=eye, horizon_years=10.0)
        est = estimate([1.0, 1.0], eye)
        d1 = decompose_mv(pop, est, gamma=1.0)
        d4 = decompose_mv(pop, est, gamma=4.0)
        assert d4.u_hat_at_theta_hat == pytest.approx(d1.u_hat_at_theta_hat / 4.0, rel=1e-12)
        assert d4.noise_fit_mv == pytest.approx(d1.noise_fit_mv / 4.0, rel=1e-12)

    def test_zero_mu_allowed(self):
        # Unlike the Sharpe decomposition, utilities exist at mu = 0.
        eye = CovMatrix.identity(2)
        pop = PopulationModel(mu=[0.0, 0.0], sigma=eye, horizon_years=10.0)
        d = decompose_mv(pop, estimate([1.0, 0.0], eye), gamma=1.0)
        assert d.u_at_theta_star == 0.0
        assert d.u_hat_at_theta_hat == pytest.approx(1.0, abs=1e-12)

    def test_bad_gamma(self):
        eye = CovMatrix.identity(2)
        pop = PopulationModel(mu=[1.0, 0.0], sigma=eye, horizon_years=10.0)
        with pytest.raises(DomainError):
            decompose_mv(pop, estimate([1.0, 1.0], eye), gamma=0.0)


class TestSubspace:
    def test_full_basis_recovers_unrestricted(self):
        rng = np.random.default_rng(28)
        sigma = CovMatrix(random_pd(rng, 4))
        est = estimate(rng.normal(size=4) + 0.3, sigma)
        theta_full, rho_full = max_insample_sharpe(est)
        theta_sub, rho_sub = max_insample_sharpe_subspace(est, np.eye(4))
        assert rho_sub == pytest.approx(rho_full, rel=1e-10)
        assert np.allclose(theta_sub, theta_full, atol=1e-10)

    def test_single_axis(self):
        est = estimate([1.0, 1.0], CovMatrix.identity(2))
        theta, rho = max_insample_sharpe_subspace(est, [[1.0], [0.0]])
        assert rho == pytest.approx(1.0, rel=1e-12)
        assert theta[1] == 0.0

    def test_one_dimensional_basis_promoted(self):
        est = estimate([1.0, 1.0], CovMatrix.identity(2))
        _, rho = max_insample_sharpe_subspace(est, [1.0, 0.0])
        assert rho == pytest.approx(1.0, rel=1e-12)

    def test_nested_monotonicity(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            dim = 5
            sigma = CovMatrix(random_pd(rng, dim))
            est = estimate(rng.normal(size=dim) + 0.1, sigma)
            basis = rng.normal(size=(dim, dim))
            last = 0.0
            for m in range(1, dim + 1):
                _, rho = max_insample_sharpe_subspace(est, basis[:, :m])
                assert rho >= last - 1e-12
                last = rho

    def test_rank_deficient_basis_rejected(self):
        est = estimate([1.0, 1.0, 0.5], CovMatrix.identity(3))
        v = np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]])
        with pytest.raises(BasisRankError):
            max_insample_sharpe_subspace(est, v)

    def test_too_many_columns_rejected(self):
        est = estimate([1.0, 1.0], CovMatrix.identity(2))
        with pytest.raises(BasisRankError):
            max_insample_sharpe_subspace(est, np.ones((2, 3)))

    def test_wrong_row_count_rejected(self):
        est = estimate([1.0, 1.0], CovMatrix.identity(2))
        with pytest.raises(DimensionError):
            max_insample_sharpe_subspace(est, np.eye(3))
