"""Return-panel loading, factor bases, sample moments, and the regression
transform that turns a predictive GLS panel into a mean-variance problem.

File conventions. Input is RFC-4180 CSV with one date column and one column
per asset. The widely circulated daily industry-portfolio files deviate from
that in documented ways (text preamble before the header, YYYYMMDD dates,
percent units, -99.99/-999 missing codes, trailing annual blocks after a
blank line); the FRENCH_DAILY / FRENCH_MONTHLY presets switch those quirks
on without polluting the generic loader.

All loaded returns are simple per-period returns in fraction units; means
and covariances are annualized by periods_per_year at the moment they are
computed, never stored half-annualized.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import CovMatrix, SampleEstimate
from .errors import (
    AlignmentError,
    DegenerateWindowError,
    DimensionError,
    EmptyDataError,
    NotPositiveDefiniteError,
    ParseError,
)


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    """Clean return matrix: strictly increasing dates, no missing values.

    dropped_rows counts input rows removed because a cell carried a missing
    code; it is informational and not part of equality or arithmetic.
    """

    dates: tuple
    asset_labels: tuple
    returns: np.ndarray
    periods_per_year: int
    dropped_rows: int = 0

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2:
            raise DimensionError(f"returns must be 2-d, got shape {r.shape}")
        if r.shape != (len(self.dates), len(self.asset_labels)):
            raise DimensionError(
                f"returns shape {r.shape} does not match {len(self.dates)} dates x "
                f"{len(self.asset_labels)} assets"
            )
        if len(self.dates) == 0 or len(self.asset_labels) == 0:
            raise EmptyDataError("panel has no rows or no assets")
        if not np.all(np.isfinite(r)):
            raise ParseError("panel contains non-finite values after cleaning")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur <= prev:
                raise ParseError(f"dates must be strictly increasing, got {prev} then {cur}")
        if self.periods_per_year < 1:
            raise DimensionError(f"periods_per_year must be >= 1, got {self.periods_per_year}")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "asset_labels", tuple(self.asset_labels))

    @property
    def n_periods(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    def window(self, start: int, stop: int) -> "ReturnsPanel":
        """Row slice [start, stop) as a new panel."""
        return ReturnsPanel(
            dates=self.dates[start:stop],
            asset_labels=self.asset_labels,
            returns=self.returns[start:stop],
            periods_per_year=self.periods_per_year,
        )


@dataclass(frozen=True, eq=False)
class RateSeries:
    """Per-period rates keyed by date, e.g. a risk-free series."""

    dates: tuple
    rates: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.ndim != 1 or r.shape[0] != len(self.dates):
            raise DimensionError("rates must be a vector aligned with dates")
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "dates", tuple(self.dates))


@dataclass(frozen=True)
class CsvOptions:
    """Loader behavior switches; see FRENCH_DAILY for the preset example.

    periods_per_year = None infers the frequency from the median date gap.
    """

    date_column: int = 0
    percent: bool = False
    missing_codes: tuple = ()
    date_format: str = "iso"  # "iso" or "yyyymmdd"
    periods_per_year: int | None = None
    skip_preamble: bool = False
    stop_at_blank: bool = False


FRENCH_DAILY = CsvOptions(
    percent=True,
    missing_codes=(-99.99, -999.0),
    date_format="yyyymmdd",
    periods_per_year=252,
    skip_preamble=True,
    stop_at_blank=True,
)
FRENCH_MONTHLY = replace(FRENCH_DAILY, periods_per_year=12)


def _parse_date(cell: str, fmt: str):
    cell = cell.strip()
    if fmt == "yyyymmdd":
        if not (cell.isdigit() and len(cell) == 8):
            raise ValueError(f"not a YYYYMMDD date: {cell!r}")
        return dt.date(int(cell[:4]), int(cell[4:6]), int(cell[6:8]))
    if fmt == "iso":
        return dt.date.fromisoformat(cell)
    raise ValueError(f"unknown date format {fmt!r}")


def _infer_periods_per_year(dates) -> int:
    if len(dates) < 2:
        return 252
    gaps = [(b - a).days for a, b in zip(dates, dates[1:])]
    median = sorted(gaps)[len(gaps) // 2]
    if median <= 4:
        return 252
    if median <= 45:
        return 12
    if median <= 100:
        return 4
    return 1


def _read_rows(path, options: CsvOptions):
    """Yield (lineno, date, values) data rows plus the header labels."""
    with open(path, newline="") as handle:
        lines = list(csv.reader(handle))

    header = None
    rows = []
    started = False
    for lineno, cells in enumerate(lines, start=1):
        if not any(cell.strip() for cell in cells):
            if started and options.stop_at_blank:
                break
            continue
        if not started:
            try:
                date = _parse_date(cells[options.date_column], options.date_format)
            except (ValueError, IndexError):
                if options.skip_preamble or header is None:
                    # Candidate header: the last non-data line before data.
                    header = cells
                    continue
                raise ParseError(f"{path}, line {lineno}: expected a date in column {options.date_column}")
            started = True
        else:
            try:
                date = _parse_date(cells[options.date_column], options.date_format)
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}, line {lineno}: bad date: {exc}") from exc
        values = []
        for j, cell in enumerate(cells):
            if j == options.date_column:
                continue
            try:
                values.append(float(cell))
            except ValueError as exc:
                raise ParseError(f"{path}, line {lineno}: bad number {cell!r}") from exc
        rows.append((lineno, date, values))
    return header, rows


def load_returns_csv(path, options: CsvOptions = CsvOptions()) -> ReturnsPanel:
    """Load a date-by-assets CSV into a ReturnsPanel.

    Rows containing any configured missing code are dropped and counted.
    Percent units are converted to fractions. Non-monotone dates and
    malformed cells raise ParseError with the offending line number.
    """
    header, rows = _read_rows(path, options)
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    width = len(rows[0][2])
    if width == 0:
        raise EmptyDataError(f"{path}: no asset columns")
    if header is not None and len(header) - 1 == width:
        labels = [cell.strip() or f"asset_{j + 1}" for j, cell in enumerate(h for i, h in enumerate(header) if i != options.date_column)]
    else:
        labels = [f"asset_{j + 1}" for j in range(width)]

    dates = []
    kept = []
    dropped = 0
    last = None
    codes = set(float(code) for code in options.missing_codes)
    for lineno, date, values in rows:
        if len(values) != width:
            raise ParseError(f"{path}, line {lineno}: expected {width} values, got {len(values)}")
        if last is not None and date <= last:
            raise ParseError(f"{path}, line {lineno}: dates must be strictly increasing")
        last = date
        if codes and any(v in codes for v in values):
            dropped += 1
            continue
        dates.append(date)
        kept.append(values)
    if not kept:
        raise EmptyDataError(f"{path}: all rows dropped as missing")
    returns = np.asarray(kept, dtype=float)
    if options.percent:
        returns = returns / 100.0
    ppy = options.periods_per_year or _infer_periods_per_year(dates)
    return ReturnsPanel(
        dates=tuple(dates),
        asset_labels=tuple(labels),
        returns=returns,
        periods_per_year=ppy,
        dropped_rows=dropped,
    )


def load_riskfree_csv(path, options: CsvOptions = CsvOptions()) -> RateSeries:
    """Load a two-column (date, per-period rate) CSV."""
    panel = load_returns_csv(path, options)
    return RateSeries(dates=panel.dates, rates=panel.returns[:, 0])


def to_excess(panel: ReturnsPanel, riskfree: RateSeries) -> ReturnsPanel:
    """Subtract the per-period risk-free rate, inner-joined on dates."""
    rate_by_date = dict(zip(riskfree.dates, riskfree.rates))
    keep = [i for i, date in enumerate(panel.dates) if date in rate_by_date]
    if not keep:
        raise AlignmentError("no overlapping dates between panel and risk-free series")
    rates = np.array([rate_by_date[panel.dates[i]] for i in keep])
    return ReturnsPanel(
        dates=tuple(panel.dates[i] for i in keep),
        asset_labels=panel.asset_labels,
        returns=panel.returns[keep] - rates[:, None],
        periods_per_year=panel.periods_per_year,
        dropped_rows=panel.dropped_rows,
    )


@dataclass(frozen=True, eq=False)
class FactorBasis:
    """Orthonormal factor weights: equal weight first, then principal
    components of the covariance restricted to the complement of equal weight.

    eigenvalues are those of the projected covariance, non-increasing,
    aligned with columns 1..n-1.
    """

    weights: np.ndarray
    eigenvalues: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < w.shape[1]:
            raise DimensionError(f"weights must be assets x factors, got {w.shape}")
        n = w.shape[0]
        ones = np.ones(n) / math.sqrt(n)
        if np.max(np.abs(w[:, 0] - ones * (w[:, 0] @ ones))) > 1e-10:
            raise DimensionError("first factor must be proportional to the ones vector")
        if w.shape[1] > 1 and np.max(np.abs(np.ones(n) @ w[:, 1:])) > 1e-10:
            raise DimensionError("factors beyond the first must be orthogonal to the ones vector")
        gram = w.T @ w
        if np.max(np.abs(gram - np.eye(w.shape[1]))) > 1e-10:
            raise DimensionError("factor columns must be orthonormal")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in self.eigenvalues))

    @property
    def n_factors(self) -> int:
        return self.weights.shape[1]


def build_factor_basis(window: ReturnsPanel) -> FactorBasis:
    """Equal-weight factor plus principal components of the complement.

    The complement is spanned explicitly (QR against the ones vector), and
    the projected covariance is eigendecomposed there, so the orthogonality
    invariants hold even when the sample covariance is rank-deficient. A
    window that is too short or has zero total variance is rejected.
    """
    if window.n_periods < 2:
        raise DegenerateWindowError(
            f"factor basis needs >= 2 observations, got {window.n_periods}"
        )
    n = window.n_assets
    x = window.returns
    # An exactly constant window has zero covariance in exact arithmetic, but
    # centering rounds to ~1e-3x residuals that would otherwise masquerade as
    # variance; test the data itself.
    if not np.any(np.ptp(x, axis=0) > 0.0):
        raise DegenerateWindowError("window has zero total variance (constant returns)")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / window.n_periods
    ones = np.ones(n) / math.sqrt(n)
    if n == 1:
        return FactorBasis(weights=ones[:, None])
    # QR of [ones | partial identity] yields an orthonormal complement of the
    # ones direction in columns 1..n-1.
    q, _ = np.linalg.qr(np.column_stack([ones, np.eye(n)[:, : n - 1]]))
    complement = q[:, 1:]
    projected = complement.T @ cov @ complement
    projected = (projected + projected.T) / 2.0
    eigenvalues, vectors = np.linalg.eigh(projected)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    factors = complement @ vectors[:, order]
    # Deterministic sign: the largest-magnitude weight in each factor is positive.
    for j in range(factors.shape[1]):
        lead = np.argmax(np.abs(factors[:, j]))
        if factors[lead, j] < 0:
            factors[:, j] = -factors[:, j]
    weights = np.column_stack([ones, factors])
    return FactorBasis(weights=weights, eigenvalues=tuple(eigenvalues))


def sample_moments(window: ReturnsPanel, ddof: int = 0) -> SampleEstimate:
    """Annualized sample mean and covariance of a window.

    The covariance denominator is n - ddof with ddof = 0 by default (the
    maximum-likelihood convention; the criteria treat sigma as known and are
    insensitive to the choice). horizon_years = observations / periods_per_year.
    """
    n = window.n_periods
    if n < 2 or n - ddof < 1:
        raise DegenerateWindowError(f"sample moments need >= 2 observations, got {n}")
    if not np.any(np.ptp(window.returns, axis=0) > 0.0):
        raise DegenerateWindowError("window has zero total variance (constant returns)")
    ppy = window.periods_per_year
    x = window.returns
    mu_hat = x.mean(axis=0) * ppy
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (n - ddof) * ppy
    try:
        sigma = CovMatrix(cov)
    except NotPositiveDefiniteError as exc:
        raise DegenerateWindowError(f"window covariance is not positive definite: {exc}") from exc
    return SampleEstimate(mu_hat=mu_hat, sigma=sigma, horizon_years=n / ppy)


@dataclass(frozen=True, eq=False)
class RegressionPanel:
    """Inputs of the predictive GLS problem r_t ~ x_t beta.

    market_returns is T x N; factor_predictions is T x N x (k+1);
    residual_cov is one CovMatrix (constant) or a sequence of T of them;
    annualization is the constant c applied to both accumulated moments;
    horizon_years is the calendar span the panel covers, fed to the criteria.
    """

    market_returns: np.ndarray
    factor_predictions: np.ndarray
    residual_cov: object
    annualization: float
    horizon_years: float

    def __post_init__(self):
        r = np.asarray(self.market_returns, dtype=float)
        x = np.asarray(self.factor_predictions, dtype=float)
        if r.ndim != 2:
            raise DimensionError(f"market_returns must be T x N, got shape {r.shape}")
        if x.ndim != 3 or x.shape[:2] != r.shape:
            raise DimensionError(
                f"factor_predictions must be T x N x (k+1) aligned with returns, got {x.shape}"
            )
        covs = self.residual_cov
        if isinstance(covs, CovMatrix):
            covs = (covs,) * r.shape[0]
        else:
            covs = tuple(covs)
            if len(covs) != r.shape[0]:
                raise DimensionError(
                    f"need one residual covariance per date: {len(covs)} != {r.shape[0]}"
                )
        for cov in covs:
            if cov.dim != r.shape[1]:
                raise DimensionError("residual covariance dimension must equal N")
        if not self.annualization > 0:
            raise DimensionError(f"annualization must be positive, got {self.annualization}")
        if not self.horizon_years > 0:
            raise DimensionError(f"horizon_years must be positive, got {self.horizon_years}")
        object.__setattr__(self, "market_returns", r)
        object.__setattr__(self, "factor_predictions", x)
        object.__setattr__(self, "residual_cov", covs)


def regression_to_mv(panel: RegressionPanel) -> SampleEstimate:
    """Accumulate mu_hat = c sum_t x_t' S_t^-1 r_t and sigma = c sum_t
    x_t' S_t^-1 x_t into a SampleEstimate.

    The Sharpe maximizer of the result is sigma^-1 mu_hat, which cancels c
    and reproduces the GLS coefficient: estimating the regression and
    optimizing the portfolio are the same computation.
    """
    from scipy.linalg import cho_solve

    t_obs, n_markets = panel.market_returns.shape
    width = panel.factor_predictions.shape[2]
    mu = np.zeros(width)
    gram = np.zeros((width, width))
    for t in range(t_obs):
        x_t = panel.factor_predictions[t]
        r_t = panel.market_returns[t]
        solve = lambda rhs: cho_solve((panel.residual_cov[t].chol, True), rhs)
        mu += x_t.T @ solve(r_t)
        gram += x_t.T @ solve(x_t)
    mu *= panel.annualization
    gram *= panel.annualization
    gram = (gram + gram.T) / 2.0
    try:
        sigma = CovMatrix(gram)
    except NotPositiveDefiniteError as exc:
        raise DegenerateWindowError(f"accumulated predictor covariance is singular: {exc}") from exc
    return SampleEstimate(mu_hat=mu, sigma=sigma, horizon_years=panel.horizon_years)
