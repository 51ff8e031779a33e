"""Command-line interface: eval, simulate, backtest, verify, config files."""

from __future__ import annotations

import json

import numpy as np
import pytest

from sric.cli import main, parse_config_file


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def make_returns_csv(tmp_path, n_months=8, n_assets=2, seed=71, name="returns.csv"):
    import datetime as dt

    rng = np.random.default_rng(seed)
    lines = ["date," + ",".join(f"a{j}" for j in range(n_assets))]
    for m in range(n_months):
        for day in range(1, 22):
            date = dt.date(2019 + m // 12, m % 12 + 1, day)
            row = rng.normal(0.0005, 0.01, size=n_assets)
            lines.append(date.isoformat() + "," + ",".join(f"{v:.6f}" for v in row))
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


class TestEval:
    def test_hand_values(self, capsys):
        code, out, err = run_cli(
            capsys, ["eval", "--rho", "1.0", "--k", "5", "--T", "10"]
        )
        assert code == 0
        record = json.loads(out)
        assert record["sric"] == pytest.approx(0.5, abs=1e-12)
        assert record["aic"] == pytest.approx(2.0, abs=1e-12)
        assert record["aic_normalized"] == pytest.approx(-0.2, abs=1e-12)
        assert record["siegel_woodgate"] == pytest.approx(0.6, abs=1e-12)
        assert record["sric_split"]["noise_fit"] == pytest.approx(0.25, abs=1e-12)
        assert record["sric_split"]["estimation_error"] == pytest.approx(0.25, abs=1e-12)
        assert 0.0 < record["p_value_null"] < 1.0
        interval = record["tau_interval_90"]
        assert interval["lower"] < interval["upper"]
        assert "sric =" in err

    def test_cost_adds_net(self, capsys):
        code, out, _ = run_cli(
            capsys, ["eval", "--rho", "1.0", "--k", "5", "--T", "10", "--cost", "0.2"]
        )
        assert code == 0
        record = json.loads(out)
        assert record["sric_net"] == pytest.approx(0.3, abs=1e-12)
        assert record["cost"] == 0.2

    def test_negative_rho_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, ["eval", "--rho", "-1.0", "--k", "5", "--T", "10"])
        assert code == 2
        assert err.startswith("error:")


class TestSimulate:
    def test_frontier_outputs(self, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code, out, err = run_cli(
            capsys,
            [
                "simulate", "frontier", "--seed", "7", "--reps", "2000",
                "--threads", "1", "--out", str(out_dir), "--no-figures",
            ],
        )
        assert code == 0
        assert (out_dir / "frontier.json").is_file()
        arms_lines = (out_dir / "frontier_arms.csv").read_text().strip().splitlines()
        assert len(arms_lines) == 1 + 20
        record = json.loads(out)
        assert record["extras"]["argmax_k"] in range(1, 21)
        assert "wrote" in err

    def test_seed_determinism_across_runs(self, tmp_path, capsys):
        args = ["simulate", "frontier", "--seed", "11", "--reps", "2000", "--no-figures"]
        run_cli(capsys, args + ["--threads", "1", "--out", str(tmp_path / "one")])
        run_cli(capsys, args + ["--threads", "4", "--out", str(tmp_path / "two")])
        a = (tmp_path / "one" / "frontier.json").read_bytes()
        b = (tmp_path / "two" / "frontier.json").read_bytes()
        assert a == b

    def test_figures_rendered_by_default(self, tmp_path, capsys):
        out_dir = tmp_path / "fig"
        code, _, _ = run_cli(
            capsys,
            [
                "simulate", "frontier", "--seed", "5", "--reps", "2000",
                "--threads", "1", "--out", str(out_dir),
            ],
        )
        assert code == 0
        png = out_dir / "frontier.png"
        assert png.is_file()
        assert png.stat().st_size > 5000

    def test_bad_reps_is_config_error(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys,
            ["simulate", "bias", "--reps", "0", "--out", str(tmp_path), "--no-figures"],
        )
        assert code == 2
        assert "error:" in err


class TestConfigFiles:
    def test_valid_select_config(self, tmp_path, capsys):
        config = tmp_path / "select.cfg"
        config.write_text(
            "# small smoke configuration\n"
            "n_assets = 6\n"
            "n_true = 3   # half the book\n"
            "reps = 300\n"
            "redraw_truth = true\n"
        )
        code, out, _ = run_cli(
            capsys,
            [
                "simulate", "select", "--config", str(config), "--seed", "3",
                "--threads", "1", "--out", str(tmp_path / "out"), "--no-figures",
            ],
        )
        assert code == 0
        record = json.loads(out)
        assert record["config"]["n_assets"] == 6
        assert record["config"]["reps"] == 300

    def test_unknown_key_lists_allowed(self, tmp_path, capsys):
        config = tmp_path / "bad.cfg"
        config.write_text("n_assets = 6\nbogus_key = 1\n")
        code, _, err = run_cli(
            capsys,
            ["simulate", "select", "--config", str(config), "--no-figures"],
        )
        assert code == 2
        assert "bogus_key" in err
        assert "allowed" in err

    def test_duplicate_key_rejected(self, tmp_path):
        config = tmp_path / "dup.cfg"
        config.write_text("reps = 100\nreps = 200\n")
        with pytest.raises(Exception, match="duplicate"):
            parse_config_file(config)

    def test_bad_value_reports_key(self, tmp_path, capsys):
        config = tmp_path / "bad.cfg"
        config.write_text("reps = plenty\n")
        code, _, err = run_cli(
            capsys,
            ["simulate", "select", "--config", str(config), "--no-figures"],
        )
        assert code == 2
        assert "reps" in err

    def test_missing_equals_rejected(self, tmp_path, capsys):
        config = tmp_path / "bad.cfg"
        config.write_text("just a line\n")
        code, _, err = run_cli(
            capsys,
            ["simulate", "select", "--config", str(config), "--no-figures"],
        )
        assert code == 2
        assert "line 1" in err


class TestBacktestCommand:
    def test_single_lookback_outputs(self, tmp_path, capsys):
        data = make_returns_csv(tmp_path)
        out_dir = tmp_path / "bt"
        code, out, err = run_cli(
            capsys,
            [
                "backtest", "--data", str(data), "--lookback", "3",
                "--out", str(out_dir), "--no-figures",
            ],
        )
        assert code == 0
        assert (out_dir / "backtest_lb003.json").is_file()
        assert (out_dir / "backtest_lb003_series.csv").is_file()
        summary = (out_dir / "backtest_summary.csv").read_text().strip().splitlines()
        assert len(summary) == 1 + 4
        assert summary[0] == "lookback,criterion,oos_sharpe,skipped_months"
        assert "treating returns as already excess" in err
        record = json.loads(out)
        assert record["lookbacks"] == [3]
        assert set(record["criteria"]) == {"sric", "aic", "equal_weight", "markowitz"}
        assert record["months_evaluated"] == [5]

    def test_riskfree_suppresses_warning(self, tmp_path, capsys):
        data = make_returns_csv(tmp_path)
        panel_dates = [
            line.split(",")[0]
            for line in data.read_text().strip().splitlines()[1:]
        ]
        rf = tmp_path / "rf.csv"
        rf.write_text("date,rf\n" + "".join(f"{d},0.0001\n" for d in panel_dates))
        code, _, err = run_cli(
            capsys,
            [
                "backtest", "--data", str(data), "--riskfree", str(rf),
                "--lookback", "3", "--out", str(tmp_path / "bt2"), "--no-figures",
            ],
        )
        assert code == 0
        assert "treating returns as already excess" not in err

    def test_lookback_sweep(self, tmp_path, capsys):
        data = make_returns_csv(tmp_path)
        out_dir = tmp_path / "sweep"
        code, out, _ = run_cli(
            capsys,
            [
                "backtest", "--data", str(data), "--lookback", "3:4",
                "--threads", "1", "--out", str(out_dir), "--no-figures",
            ],
        )
        assert code == 0
        record = json.loads(out)
        assert record["lookbacks"] == [3, 4]
        assert record["months_evaluated"] == [5, 4]
        summary = (out_dir / "backtest_summary.csv").read_text().strip().splitlines()
        assert len(summary) == 1 + 2 * 4
        assert (out_dir / "backtest_lb003.json").is_file()
        assert (out_dir / "backtest_lb004.json").is_file()

    def test_backtest_figure_rendered(self, tmp_path, capsys):
        data = make_returns_csv(tmp_path)
        out_dir = tmp_path / "btfig"
        code, _, _ = run_cli(
            capsys,
            ["backtest", "--data", str(data), "--lookback", "3", "--out", str(out_dir)],
        )
        assert code == 0
        png = out_dir / "backtest.png"
        assert png.is_file()
        assert png.stat().st_size > 5000

    def test_missing_data_file(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys,
            ["backtest", "--data", str(tmp_path / "nope.csv"), "--no-figures"],
        )
        assert code == 2
        assert err.startswith("error:") or "error:" in err

    @pytest.mark.parametrize("text", ["0", "abc", "5:3"])
    def test_bad_lookback(self, tmp_path, capsys, text):
        data = make_returns_csv(tmp_path)
        code, _, err = run_cli(
            capsys,
            ["backtest", "--data", str(data), "--lookback", text, "--no-figures"],
        )
        assert code == 2
        assert "error:" in err


class TestVerifyCommand:
    def test_quick_level_passes(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, out, err = run_cli(capsys, ["verify", "--level", "quick", "--threads", "1"])
        assert code == 0
        record = json.loads(out)
        assert record["passed"] is True
        assert len(record["criteria"]) == 11
        assert all(c["passed"] for c in record["criteria"])
        assert "[PASS]" in err
        assert "11/11 criteria passed" in err
