"""Rolling out-of-sample evaluation of criterion-selected factor portfolios.

At the start of each month the lookback window (a fixed number of calendar
months of panel rows) is converted to a factor basis, nested candidate
models over factor prefixes are scored, each configured criterion picks a
dimension, and the resulting portfolio is scaled to a fixed in-sample
annualized volatility and held for the month. Monthly out-of-sample returns
are the sum of the within-month period returns of the held portfolio.

Conventions fixed here rather than configurable:
  * the effective sample length fed to the criteria is lookback_months / 12
    years regardless of the panel's sampling frequency;
  * the Sharpe-relevant parameter count of a d-factor candidate is d - 1
    (the first factor direction is treated as given, not estimated);
  * degenerate windows (no usable factor, singular one-factor covariance)
    produce a zero position for the month and are counted, never fatal.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .core import CovMatrix
from .errors import ConfigError, DegenerateWindowError, DomainError, NotPositiveDefiniteError
from .estimators import aic, sric, sric_net
from .ingest import ReturnsPanel, build_factor_basis

log = logging.getLogger(__name__)


class BacktestCriterion(Enum):
    """Selection rules the rolling harness can run side by side."""

    SRIC = "sric"
    AIC = "aic"
    EQUAL_WEIGHT = "equal_weight"
    MARKOWITZ = "markowitz"


_DEFAULT_CRITERIA = (
    BacktestCriterion.SRIC,
    BacktestCriterion.AIC,
    BacktestCriterion.EQUAL_WEIGHT,
    BacktestCriterion.MARKOWITZ,
)


@dataclass(frozen=True)
class BacktestConfig:
    lookback_months: int
    target_vol: float = 0.10
    criteria: tuple = _DEFAULT_CRITERIA
    max_factors: int | None = None
    cost: float = 0.0

    def __post_init__(self):
        if self.lookback_months < 1:
            raise ConfigError(f"lookback_months must be >= 1, got {self.lookback_months}")
        if not self.target_vol > 0:
            raise ConfigError(f"target_vol must be positive, got {self.target_vol}")
        if self.max_factors is not None and self.max_factors < 1:
            raise ConfigError(f"max_factors must be >= 1, got {self.max_factors}")
        if self.cost < 0:
            raise ConfigError(f"cost must be nonnegative, got {self.cost}")
        criteria = tuple(BacktestCriterion(c) for c in self.criteria)
        if not criteria:
            raise ConfigError("criteria must not be empty")
        if len(set(criteria)) != len(criteria):
            raise ConfigError("criteria contains duplicates")
        object.__setattr__(self, "criteria", criteria)


def annualized_sharpe(monthly_returns) -> float:
    """mean / std (ddof=1) of a monthly series, scaled by sqrt(12)."""
    r = np.asarray(monthly_returns, dtype=float)
    if r.size < 2:
        return float("nan")
    sd = r.std(ddof=1)
    if sd == 0.0:
        return float("nan")
    return float(r.mean() / sd * math.sqrt(12.0))


@dataclass(frozen=True, eq=False)
class BacktestReport:
    """One rolling run: per-criterion monthly series plus summary numbers.

    months holds the out-of-sample month labels ("YYYY-MM"); every
    per-criterion array is aligned with it. weights (the held asset-weight
    vector per month) stay in memory and are not serialized.
    """

    months: tuple
    criteria: tuple
    returns: dict
    selected_dims: dict
    sric_net_values: dict
    weights: dict
    oos_sharpe: dict
    skipped_months: int
    lookback_months: int
    target_vol: float

    def cumulative(self, name: str) -> np.ndarray:
        return np.cumsum(self.returns[name])

    def to_json_dict(self) -> dict:
        def clean(x: float):
            return float(x) if math.isfinite(x) else None

        return {
            "kind": "backtest",
            "lookback_months": self.lookback_months,
            "target_vol": self.target_vol,
            "months": list(self.months),
            "criteria": list(self.criteria),
            "skipped_months": self.skipped_months,
            "oos_sharpe": {name: clean(value) for name, value in self.oos_sharpe.items()},
            "returns": {name: [clean(v) for v in series] for name, series in self.returns.items()},
            "selected_dims": {
                name: [int(v) for v in series] for name, series in self.selected_dims.items()
            },
            "sric_net": {
                name: [clean(v) for v in series] for name, series in self.sric_net_values.items()
            },
        }

    def write(self, outdir, stem: str = "backtest") -> list:
        """Write {stem}.json and the long-form {stem}_series.csv; return paths."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []

        json_path = outdir / f"{stem}.json"
        json_path.write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")
        written.append(json_path)

        csv_path = outdir / f"{stem}_series.csv"
        with csv_path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["date", "criterion", "monthly_return", "selected_dim", "sric_net", "cumulative"]
            )
            for name in self.criteria:
                running = 0.0
                for idx, month in enumerate(self.months):
                    running += float(self.returns[name][idx])
                    net = self.sric_net_values[name][idx]
                    writer.writerow(
                        [
                            month,
                            name,
                            repr(float(self.returns[name][idx])),
                            int(self.selected_dims[name][idx]),
                            "" if not math.isfinite(net) else repr(float(net)),
                            repr(running),
                        ]
                    )
        written.append(csv_path)
        return written


def _month_groups(panel: ReturnsPanel) -> list:
    """Contiguous (label, start, stop) row ranges, one per calendar month."""
    groups = []
    current = None
    start = 0
    for idx, date in enumerate(panel.dates):
        try:
            key = (date.year, date.month)
        except AttributeError as exc:
            raise DomainError(
                "panel dates must expose year and month for monthly rebalancing"
            ) from exc
        if key != current:
            if current is not None:
                groups.append((f"{current[0]:04d}-{current[1]:02d}", start, idx))
            current = key
            start = idx
    groups.append((f"{current[0]:04d}-{current[1]:02d}", start, len(panel.dates)))
    return groups


def _feasible_prefix(cov: np.ndarray) -> int:
    """Largest d such that the leading d x d block is positive definite.

    Pivots are floored relative to the largest factor variance in the whole
    matrix, not just the block, so a numerically-zero leading factor cannot
    pass a self-referential 1 x 1 test and produce unbounded leverage.
    """
    scale = float(np.max(np.diag(cov)))
    if not scale > 0.0:
        return 0
    feasible = 0
    for d in range(1, cov.shape[0] + 1):
        try:
            block = CovMatrix(cov[:d, :d])
        except NotPositiveDefiniteError:
            break
        if float(np.min(np.diag(block.chol)) ** 2) <= 1e-12 * scale:
            break
        feasible = d
    return feasible


def _rebalance(window: ReturnsPanel, oos_rows: np.ndarray, config: BacktestConfig,
               m_max: int, t_years: float):
    """Select and hold for one month. Returns {name: (ret, dim, net, weights)}
    or None when the window supports no position at all."""
    try:
        basis = build_factor_basis(window)
    except DegenerateWindowError:
        return None
    b = basis.weights[:, :m_max]
    f = window.returns @ b
    ppy = window.periods_per_year
    mu = f.mean(axis=0) * ppy
    centered = f - f.mean(axis=0)
    cov = centered.T @ centered / f.shape[0] * ppy
    cov = (cov + cov.T) / 2.0

    p = _feasible_prefix(cov)
    if p == 0:
        return None
    chol = np.linalg.cholesky(cov[:p, :p])
    z = solve_triangular(chol, mu[:p], lower=True)
    rho = np.sqrt(np.cumsum(z * z))
    # Candidate with d factors has k = d - 1 fitted directions.
    sric_scores = np.array([sric(rho[j], j, t_years) for j in range(p)])
    aic_scores = np.array([aic(rho[j], j, t_years) for j in range(p)])

    out = {}
    for criterion in config.criteria:
        if criterion is BacktestCriterion.SRIC:
            j = int(np.argmax(sric_scores))
        elif criterion is BacktestCriterion.AIC:
            j = int(np.argmin(aic_scores))
        elif criterion is BacktestCriterion.EQUAL_WEIGHT:
            j = 0
        else:
            j = p - 1
        d = j + 1
        theta = cho_solve((chol[:d, :d], True), mu[:d])
        variance = float(theta @ cov[:d, :d] @ theta)
        if variance <= 0.0:
            out[criterion.value] = (0.0, d, float("nan"), np.zeros(b.shape[0]))
            continue
        scale = config.target_vol / math.sqrt(variance)
        weights = b[:, :d] @ (theta * scale)
        ret = float(np.sum(oos_rows @ weights))
        net = sric_net(rho[j], j, t_years, config.cost)
        out[criterion.value] = (ret, d, net, weights)
    return out


def run_rolling(panel: ReturnsPanel, config: BacktestConfig) -> BacktestReport:
    """Roll monthly over the panel: select, vol-target, hold, record.

    Positions formed for month i use only rows from the preceding
    lookback_months calendar months, so data after month i cannot affect
    any position held up to and including it.
    """
    groups = _month_groups(panel)
    if len(groups) < config.lookback_months + 1:
        raise DegenerateWindowError(
            f"panel spans {len(groups)} months; need more than lookback "
            f"({config.lookback_months}) plus one out-of-sample month"
        )
    n = panel.n_assets
    m_max = min(config.max_factors or n, n)
    t_years = config.lookback_months / 12.0
    names = [c.value for c in config.criteria]

    months = []
    returns = {name: [] for name in names}
    dims = {name: [] for name in names}
    nets = {name: [] for name in names}
    weights = {name: [] for name in names}
    skipped = 0

    for i in range(config.lookback_months, len(groups)):
        label, oos_start, oos_stop = groups[i]
        months.append(label)
        window = panel.window(groups[i - config.lookback_months][1], groups[i - 1][2])
        oos_rows = panel.returns[oos_start:oos_stop]
        result = _rebalance(window, oos_rows, config, m_max, t_years)
        if result is None:
            skipped += 1
            log.warning("degenerate lookback window before %s: no position held", label)
            for name in names:
                returns[name].append(0.0)
                dims[name].append(0)
                nets[name].append(float("nan"))
                weights[name].append(np.zeros(n))
            continue
        for name in names:
            ret, dim, net, w = result[name]
            returns[name].append(ret)
            dims[name].append(dim)
            nets[name].append(net)
            weights[name].append(w)

    return BacktestReport(
        months=tuple(months),
        criteria=tuple(names),
        returns={name: np.asarray(series, dtype=float) for name, series in returns.items()},
        selected_dims={name: np.asarray(series, dtype=int) for name, series in dims.items()},
        sric_net_values={name: np.asarray(series, dtype=float) for name, series in nets.items()},
        weights=weights,
        oos_sharpe={name: annualized_sharpe(returns[name]) for name in names},
        skipped_months=skipped,
        lookback_months=config.lookback_months,
        target_vol=config.target_vol,
    )
