"""Rolling backtest harness: selection, vol targeting, and reporting."""

from __future__ import annotations

import datetime as dt
import json
import logging
import math

import numpy as np
import pytest

from sric.backtest import (
    BacktestConfig,
    BacktestCriterion,
    annualized_sharpe,
    run_rolling,
)
from sric.errors import ConfigError, DegenerateWindowError, DomainError
from sric.ingest import ReturnsPanel


def month_dates(n_months, days_per_month=21, start_year=2018):
    dates = []
    for m in range(n_months):
        year = start_year + m // 12
        month = m % 12 + 1
        for day in range(1, days_per_month + 1):
            dates.append(dt.date(year, month, day))
    return dates


def make_panel(returns, days_per_month=21):
    returns = np.asarray(returns, dtype=float)
    dates = month_dates(returns.shape[0] // days_per_month, days_per_month)
    labels = tuple(f"a{j}" for j in range(returns.shape[1]))
    return ReturnsPanel(
        dates=tuple(dates), asset_labels=labels, returns=returns, periods_per_year=252
    )


def noise_panel(n_months, n_assets, seed, drift=0.0005, vol=0.01, days_per_month=21):
    rng = np.random.default_rng(seed)
    x = rng.normal(drift, vol, size=(n_months * days_per_month, n_assets))
    return make_panel(x, days_per_month)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            BacktestConfig(lookback_months=0)
        with pytest.raises(ConfigError):
            BacktestConfig(lookback_months=12, target_vol=0.0)
        with pytest.raises(ConfigError):
            BacktestConfig(lookback_months=12, max_factors=0)
        with pytest.raises(ConfigError):
            BacktestConfig(lookback_months=12, cost=-0.1)
        with pytest.raises(ConfigError):
            BacktestConfig(lookback_months=12, criteria=())
        with pytest.raises(ConfigError):
            BacktestConfig(lookback_months=12, criteria=("sric", "sric"))

    def test_string_criteria_coerced(self):
        config = BacktestConfig(lookback_months=12, criteria=("aic", "sric"))
        assert config.criteria == (BacktestCriterion.AIC, BacktestCriterion.SRIC)


class TestAnnualizedSharpe:
    def test_hand_value(self):
        r = [0.01, 0.02, 0.03]
        assert annualized_sharpe(r) == pytest.approx(2.0 * math.sqrt(12.0), rel=1e-12)

    def test_degenerate_series(self):
        assert math.isnan(annualized_sharpe([0.01]))
        assert math.isnan(annualized_sharpe([0.02, 0.02, 0.02]))
        assert math.isnan(annualized_sharpe([]))


class TestRunRollingStructure:
    def test_short_panel_rejected(self):
        panel = noise_panel(3, 2, seed=1)
        with pytest.raises(DegenerateWindowError):
            run_rolling(panel, BacktestConfig(lookback_months=3))

    def test_non_calendar_dates_rejected(self):
        panel = ReturnsPanel(
            dates=("2020-01-01", "2020-01-02"),
            asset_labels=("x",),
            returns=[[0.01], [0.02]],
            periods_per_year=252,
        )
        with pytest.raises(DomainError):
            run_rolling(panel, BacktestConfig(lookback_months=1))

    def test_shapes_and_labels(self):
        panel = noise_panel(8, 4, seed=2)
        report = run_rolling(panel, BacktestConfig(lookback_months=3))
        assert len(report.months) == 5
        assert report.months[0] == "2018-04"
        assert report.criteria == ("sric", "aic", "equal_weight", "markowitz")
        for name in report.criteria:
            assert report.returns[name].shape == (5,)
            assert report.selected_dims[name].shape == (5,)
            assert report.sric_net_values[name].shape == (5,)
            assert len(report.weights[name]) == 5
        assert report.skipped_months == 0
        assert report.lookback_months == 3

    def test_baseline_dimensions(self):
        panel = noise_panel(9, 4, seed=3)
        report = run_rolling(panel, BacktestConfig(lookback_months=4))
        assert np.all(report.selected_dims["equal_weight"] == 1)
        assert np.all(report.selected_dims["markowitz"] == 4)
        assert np.all(report.selected_dims["sric"] >= 1)
        assert np.all(report.selected_dims["sric"] <= 4)

    def test_sharpe_matches_returns(self):
        panel = noise_panel(10, 3, seed=4)
        report = run_rolling(panel, BacktestConfig(lookback_months=4))
        for name in report.criteria:
            r = report.returns[name]
            assert report.oos_sharpe[name] == pytest.approx(
                annualized_sharpe(r), nan_ok=True
            )
            if np.std(r, ddof=1) > 0:
                manual = r.mean() / r.std(ddof=1) * math.sqrt(12.0)
                assert report.oos_sharpe[name] == pytest.approx(manual, rel=1e-12)

    def test_max_factors_caps_every_criterion(self):
        panel = noise_panel(9, 5, seed=5)
        report = run_rolling(panel, BacktestConfig(lookback_months=4, max_factors=2))
        for name in report.criteria:
            assert np.all(report.selected_dims[name] <= 2)
        assert np.all(report.selected_dims["markowitz"] == 2)


def reference_windows(panel, lookback):
    """(start, stop, group) triples reproducing the harness's month split."""
    groups = []
    current = None
    for i, d in enumerate(panel.dates):
        key = (d.year, d.month)
        if key != current:
            groups.append([key, i, i + 1])
            current = key
        else:
            groups[-1][2] = i + 1
    out = []
    for i in range(lookback, len(groups)):
        start = groups[i - lookback][1]
        stop = groups[i - 1][2]
        out.append((start, stop, groups[i]))
    return out


class TestVolTargeting:
    def test_ex_ante_vol_hits_target(self):
        panel = noise_panel(10, 4, seed=6)
        target = 0.17
        config = BacktestConfig(lookback_months=4, target_vol=target)
        report = run_rolling(panel, config)
        for idx, (start, stop, _) in enumerate(reference_windows(panel, 4)):
            rows = panel.returns[start:stop]
            centered = rows - rows.mean(axis=0)
            sigma = centered.T @ centered / rows.shape[0] * 252.0
            for name in report.criteria:
                w = report.weights[name][idx]
                if report.selected_dims[name][idx] == 0 or not np.any(w):
                    continue
                vol = math.sqrt(float(w @ sigma @ w))
                assert vol == pytest.approx(target, rel=1e-9)


class TestInvariances:
    def test_no_look_ahead(self):
        base = noise_panel(10, 3, seed=7)
        tampered = base.returns.copy()
        tampered[8 * 21 :] = np.random.default_rng(99).normal(
            0.01, 0.02, size=tampered[8 * 21 :].shape
        )
        report_a = run_rolling(base, BacktestConfig(lookback_months=4))
        report_b = run_rolling(make_panel(tampered), BacktestConfig(lookback_months=4))
        # Months 2018-05 .. 2018-08 (indices 0..3) use only untouched data.
        for name in report_a.criteria:
            assert np.array_equal(report_a.returns[name][:4], report_b.returns[name][:4])
            assert np.array_equal(
                report_a.selected_dims[name][:4], report_b.selected_dims[name][:4]
            )
        assert not np.array_equal(
            report_a.returns["markowitz"][4:], report_b.returns["markowitz"][4:]
        )

    def test_leverage_invariance(self):
        base = noise_panel(9, 3, seed=8)
        scaled = make_panel(base.returns * 3.0)
        report_a = run_rolling(base, BacktestConfig(lookback_months=4))
        report_b = run_rolling(scaled, BacktestConfig(lookback_months=4))
        for name in report_a.criteria:
            assert np.array_equal(
                report_a.selected_dims[name], report_b.selected_dims[name]
            )
            assert np.allclose(
                report_a.returns[name], report_b.returns[name], rtol=1e-9, atol=1e-12
            )

    def test_identical_assets_collapse_to_one_factor(self):
        rng = np.random.default_rng(9)
        col = rng.normal(0.001, 0.01, size=(8 * 21, 1))
        panel = make_panel(np.repeat(col, 4, axis=1))
        report = run_rolling(panel, BacktestConfig(lookback_months=3))
        for name in report.criteria:
            assert np.all(report.selected_dims[name] == 1)
            assert np.allclose(report.returns[name], report.returns["sric"])


class TestDegenerateMonths:
    def test_constant_stretch_is_skipped_not_fatal(self, caplog):
        rng = np.random.default_rng(10)
        x = rng.normal(0.0005, 0.01, size=(9 * 21, 3))
        # Months 4..6 (0-based 3..5) are exactly constant, so the window
        # feeding month 7 has zero variance end to end.
        x[3 * 21 : 6 * 21] = 0.002
        panel = make_panel(x)
        with caplog.at_level(logging.WARNING, logger="sric.backtest"):
            report = run_rolling(panel, BacktestConfig(lookback_months=3))
        assert report.skipped_months >= 1
        assert any("degenerate" in rec.message for rec in caplog.records)
        skipped_idx = [
            i
            for i in range(len(report.months))
            if report.selected_dims["sric"][i] == 0
        ]
        assert skipped_idx
        for i in skipped_idx:
            for name in report.criteria:
                assert report.returns[name][i] == 0.0
                assert report.selected_dims[name][i] == 0
                assert math.isnan(report.sric_net_values[name][i])

    def test_cost_shifts_net_values_only(self):
        panel = noise_panel(9, 3, seed=11)
        free = run_rolling(panel, BacktestConfig(lookback_months=4, cost=0.0))
        costly = run_rolling(panel, BacktestConfig(lookback_months=4, cost=0.1))
        for name in free.criteria:
            assert np.array_equal(free.selected_dims[name], costly.selected_dims[name])
            assert np.array_equal(free.returns[name], costly.returns[name])
            a = free.sric_net_values[name]
            b = costly.sric_net_values[name]
            finite = np.isfinite(a) & np.isfinite(b)
            assert np.allclose(b[finite], a[finite] - 0.1, rtol=1e-12)


class TestSelectionBehavior:
    def test_single_factor_market_needs_few_dimensions(self):
        # One dominant common factor: the parsimonious criterion should hold
        # far fewer factors than full Markowitz, which always takes them all.
        rng = np.random.default_rng(12)
        days = 14 * 21
        common = rng.normal(0.0008, 0.01, size=(days, 1))
        idio = rng.normal(0.0, 0.003, size=(days, 6))
        panel = make_panel(common + idio)
        report = run_rolling(panel, BacktestConfig(lookback_months=6))
        assert report.selected_dims["sric"].mean() < report.selected_dims["markowitz"].mean()
        assert np.all(report.selected_dims["markowitz"] >= 5)


class TestReportOutput:
    def test_write_round_trip(self, tmp_path):
        panel = noise_panel(9, 3, seed=13)
        report = run_rolling(panel, BacktestConfig(lookback_months=4))
        paths = report.write(tmp_path)
        assert [p.name for p in paths] == ["backtest.json", "backtest_series.csv"]

        loaded = json.loads(paths[0].read_text())
        assert loaded["kind"] == "backtest"
        assert loaded["lookback_months"] == 4
        assert loaded["months"] == list(report.months)
        for name in report.criteria:
            assert loaded["returns"][name] == pytest.approx(list(report.returns[name]))

        lines = paths[1].read_text().strip().splitlines()
        assert len(lines) == 1 + len(report.criteria) * len(report.months)
        assert lines[0] == "date,criterion,monthly_return,selected_dim,sric_net,cumulative"
        last = lines[len(report.months)].split(",")
        assert last[1] == report.criteria[0]
        assert float(last[5]) == pytest.approx(float(np.sum(report.returns[report.criteria[0]])))

    def test_non_finite_sharpe_serializes_as_null(self):
        rng = np.random.default_rng(14)
        col = rng.normal(0.001, 0.01, size=(6 * 21, 1))
        panel = make_panel(np.repeat(col, 2, axis=1))
        report = run_rolling(
            panel, BacktestConfig(lookback_months=4, criteria=("equal_weight",))
        )
        d = report.to_json_dict()
        json.dumps(d)
        sharpe = d["oos_sharpe"]["equal_weight"]
        assert sharpe is None or isinstance(sharpe, float)
