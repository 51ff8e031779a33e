"""Command-line front end.

Four subcommands: eval (criterion values for one estimate), simulate (the
Monte Carlo experiments), backtest (rolling evaluation of a returns CSV),
and verify (the full correctness suite). Machine output is JSON on stdout;
human-readable progress and summaries go to stderr so output can be piped.

Exit codes: 0 success, 1 verification failure, 2 usage or config error.

Config files (simulate --config) use one line-oriented schema across all
subcommands: `key = value`, `#` comments, blank lines ignored. Values are
coerced per key (int, float, bool, or comma-separated float list); unknown
and duplicate keys are rejected with the full allowed-key list.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .backtest import BacktestConfig, run_rolling
from .errors import ConfigError, SricError
from .estimators import (
    aic,
    aic_normalized,
    gap_distribution_null,
    sharpe_pvalue,
    sric,
    sric_net,
    sric_split,
    siegel_woodgate,
)
from .ingest import (
    FRENCH_DAILY,
    FRENCH_MONTHLY,
    CsvOptions,
    load_returns_csv,
    load_riskfree_csv,
    to_excess,
)
from .simulate import (
    BiasSweepConfig,
    FrontierConfig,
    RngSpec,
    SelectionExperimentConfig,
    canonical_population,
    resolve_threads,
    run_bias_sweep,
    run_distribution_experiment,
    run_frontier_experiment,
    run_mv_experiment,
    run_selection_experiment,
)

_PRESETS = {"generic": CsvOptions(), "french-daily": FRENCH_DAILY, "french-monthly": FRENCH_MONTHLY}


def _emit(record: dict, summary_lines) -> None:
    json.dump(record, sys.stdout, indent=2)
    sys.stdout.write("\n")
    for line in summary_lines:
        print(line, file=sys.stderr)


# ---------------------------------------------------------------------------
# config files

_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_config_file(path) -> dict:
    """Raw key -> string values of one config file; duplicates rejected."""
    values: dict = {}
    with open(path) as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}, line {lineno}: expected key = value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not key or not value:
                raise ConfigError(f"{path}, line {lineno}: empty key or value")
            if key in values:
                raise ConfigError(f"{path}, line {lineno}: duplicate key {key!r}")
            values[key] = value
    return values


def _coerce(kind: str, key: str, text: str):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            word = text.lower()
            if word not in _BOOL_WORDS:
                raise ValueError(f"expected true/false, got {text!r}")
            return _BOOL_WORDS[word]
        if kind == "floats":
            return tuple(float(part) for part in text.split(","))
        return text
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def apply_config_schema(schema: dict, values: dict) -> dict:
    unknown = sorted(set(values) - set(schema))
    if unknown:
        raise ConfigError(
            f"unknown config keys: {', '.join(unknown)}; allowed: {', '.join(sorted(schema))}"
        )
    return {key: _coerce(schema[key], key, text) for key, text in values.items()}


_SIM_SCHEMAS = {
    "bias": {
        "tau_star": "float",
        "k": "int",
        "horizon_grid": "floats",
        "reps": "int",
        "gamma": "float",
    },
    "distribution": {"tau_star": "float", "k": "int", "horizon_years": "float", "reps": "int"},
    "mv": {
        "tau_star": "float",
        "k": "int",
        "horizon_years": "float",
        "gamma": "float",
        "reps": "int",
    },
    "select": {
        "n_assets": "int",
        "n_true": "int",
        "sharpe_low": "float",
        "sharpe_high": "float",
        "horizon_years": "float",
        "reps": "int",
        "redraw_truth": "bool",
        "k_convention": "str",
        "gamma": "float",
    },
    "frontier": {
        "n_assets": "int",
        "true_sharpe": "float",
        "pairwise_corr": "float",
        "horizon_years": "float",
        "reps": "int",
    },
}


# ---------------------------------------------------------------------------
# subcommands


def cmd_eval(args) -> int:
    record = {
        "rho_hat": args.rho,
        "k": args.k,
        "horizon_years": args.horizon,
        "sric": sric(args.rho, args.k, args.horizon),
        "aic": aic(args.rho, args.k, args.horizon),
        "aic_normalized": aic_normalized(args.rho, args.k, args.horizon),
        "siegel_woodgate": siegel_woodgate(args.rho, args.k, args.horizon),
        "p_value_null": sharpe_pvalue(args.rho, args.k, args.horizon),
    }
    noise_fit, estimation_error = sric_split(args.rho, args.k, args.horizon)
    record["sric_split"] = {"noise_fit": noise_fit, "estimation_error": estimation_error}
    handle = gap_distribution_null(args.k, args.horizon)
    record["tau_interval_90"] = {
        "lower": args.rho - handle.quantile(0.95),
        "upper": args.rho - handle.quantile(0.05),
    }
    if args.cost is not None:
        record["cost"] = args.cost
        record["sric_net"] = sric_net(args.rho, args.k, args.horizon, args.cost)
    lines = [
        f"sric = {record['sric']:.6g}  (in-sample {args.rho:g}, k = {args.k}, T = {args.horizon:g}y)",
        f"aic = {record['aic']:.6g}  siegel_woodgate = {record['siegel_woodgate']:.6g}",
        f"p(null) = {record['p_value_null']:.4g}  tau 90% in "
        f"[{record['tau_interval_90']['lower']:.4g}, {record['tau_interval_90']['upper']:.4g}]",
    ]
    if args.cost is not None:
        lines.append(f"sric_net = {record['sric_net']:.6g} at cost {args.cost:g}")
    _emit(record, lines)
    return 0


def _run_experiment(name: str, config: dict, rng: RngSpec, threads):
    if name == "bias":
        return run_bias_sweep(BiasSweepConfig(**config), rng, threads=threads)
    if name == "distribution":
        reps = config.pop("reps", 10_000)
        pop = canonical_population(
            config.pop("tau_star", 0.0), config.pop("k", 5), config.pop("horizon_years", 1.0)
        )
        return run_distribution_experiment(pop, reps, rng, threads=threads)
    if name == "mv":
        reps = config.pop("reps", 10_000)
        gamma = config.pop("gamma", 1.0)
        pop = canonical_population(
            config.pop("tau_star", 1.0), config.pop("k", 5), config.pop("horizon_years", 10.0)
        )
        return run_mv_experiment(pop, gamma, reps, rng, threads=threads)
    if name == "select":
        return run_selection_experiment(SelectionExperimentConfig(**config), rng, threads=threads)
    return run_frontier_experiment(FrontierConfig(**config), rng, threads=threads)


def cmd_simulate(args) -> int:
    raw = parse_config_file(args.config) if args.config else {}
    config = apply_config_schema(_SIM_SCHEMAS[args.experiment], raw)
    if args.reps is not None:
        config["reps"] = args.reps
    rng = RngSpec(master_seed=args.seed)
    threads = resolve_threads(args.threads)
    report = _run_experiment(args.experiment, config, rng, threads)

    outdir = Path(args.out)
    written = report.write(outdir, stem=args.experiment)
    if not args.no_figures:
        from .figures import render_report

        written += render_report(report, outdir, stem=args.experiment)
    lines = [f"wrote {path}" for path in written]
    lines.append(
        f"{args.experiment}: {report.replications} replications, "
        f"{len(report.arms)} arm(s), seed {args.seed}"
    )
    _emit(report.to_json_dict(), lines)
    return 0


def _parse_lookback(text: str) -> list:
    if ":" in text:
        lo_text, _, hi_text = text.partition(":")
        try:
            lo, hi = int(lo_text), int(hi_text)
        except ValueError as exc:
            raise ConfigError(f"bad lookback range {text!r}: {exc}") from exc
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad lookback range {text!r}: need 1 <= a <= b")
        return list(range(lo, hi + 1))
    try:
        single = int(text)
    except ValueError as exc:
        raise ConfigError(f"bad lookback {text!r}: {exc}") from exc
    if single < 1:
        raise ConfigError(f"lookback must be >= 1, got {single}")
    return [single]


def cmd_backtest(args) -> int:
    options = _PRESETS[args.preset]
    panel = load_returns_csv(args.data, options)
    if args.riskfree:
        panel = to_excess(panel, load_riskfree_csv(args.riskfree, options))
    else:
        print(
            "warning: no risk-free series supplied; treating returns as already excess",
            file=sys.stderr,
        )

    lookbacks = _parse_lookback(args.lookback)
    threads = resolve_threads(args.threads)

    def one(lookback: int):
        config = BacktestConfig(
            lookback_months=lookback,
            target_vol=args.target_vol,
            max_factors=args.max_factors,
            cost=args.cost,
        )
        return run_rolling(panel, config)

    if len(lookbacks) == 1 or threads == 1:
        reports = [one(lb) for lb in lookbacks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, lookbacks))

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for lookback, report in zip(lookbacks, reports):
        written += report.write(outdir, stem=f"backtest_lb{lookback:03d}")

    criteria = list(reports[0].criteria)
    summary_path = outdir / "backtest_summary.csv"
    with summary_path.open("w", newline="") as handle:
        import csv as _csv

        writer = _csv.writer(handle)
        writer.writerow(["lookback", "criterion", "oos_sharpe", "skipped_months"])
        for lookback, report in zip(lookbacks, reports):
            for name in criteria:
                value = report.oos_sharpe[name]
                writer.writerow(
                    [lookback, name, "" if value != value else repr(float(value)), report.skipped_months]
                )
    written.append(summary_path)

    if not args.no_figures:
        from .figures import render_backtest, render_backtest_sweep

        if len(lookbacks) == 1:
            written.append(render_backtest(reports[0], outdir / "backtest.png"))
        else:
            summary = {
                "lookbacks": lookbacks,
                "oos_sharpe": {
                    name: [report.oos_sharpe[name] for report in reports] for name in criteria
                },
            }
            written.append(render_backtest_sweep(summary, outdir / "backtest_sweep.png"))

    record = {
        "lookbacks": lookbacks,
        "criteria": criteria,
        "oos_sharpe": {
            name: [
                None if reports[i].oos_sharpe[name] != reports[i].oos_sharpe[name]
                else reports[i].oos_sharpe[name]
                for i in range(len(reports))
            ]
            for name in criteria
        },
        "skipped_months": [report.skipped_months for report in reports],
        "months_evaluated": [len(report.months) for report in reports],
    }
    lines = [f"wrote {path}" for path in written]
    for name in criteria:
        best = max(range(len(lookbacks)), key=lambda i: reports[i].oos_sharpe[name])
        lines.append(
            f"{name}: best OOS Sharpe {reports[best].oos_sharpe[name]:.3f} "
            f"at lookback {lookbacks[best]}"
        )
    _emit(record, lines)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all(
        level=args.level,
        seed=args.seed,
        threads=args.threads,
        data=args.data,
        riskfree=args.riskfree,
    )
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        if result.skipped:
            status = "SKIP"
        print(f"[{status}] {result.number:>2} {result.name}: {result.detail}", file=sys.stderr)
    record = {
        "level": args.level,
        "seed": args.seed,
        "passed": all(result.passed for result in results),
        "criteria": [
            {
                "number": result.number,
                "name": result.name,
                "passed": result.passed,
                "skipped": result.skipped,
                "detail": result.detail,
                "measured": result.measured,
            }
            for result in results
        ],
    }
    json.dump(record, sys.stdout, indent=2)
    sys.stdout.write("\n")
    failed = [result for result in results if not result.passed]
    print(
        f"{len(results) - len(failed)}/{len(results)} criteria passed", file=sys.stderr
    )
    return 0 if not failed else 1


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sric", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="criterion values for one Sharpe estimate")
    p_eval.add_argument("--rho", type=float, required=True, help="in-sample annualized Sharpe")
    p_eval.add_argument("--k", type=int, required=True, help="Sharpe-relevant parameter count")
    p_eval.add_argument("--T", dest="horizon", type=float, required=True, help="sample length in years")
    p_eval.add_argument("--cost", type=float, default=None, help="annualized cost drag")
    p_eval.set_defaults(handler=cmd_eval)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    p_sim.add_argument("experiment", choices=sorted(_SIM_SCHEMAS))
    p_sim.add_argument("--config", default=None, help="key = value config file")
    p_sim.add_argument("--seed", type=int, default=1)
    p_sim.add_argument("--reps", type=int, default=None, help="override replication count")
    p_sim.add_argument("--threads", type=int, default=None)
    p_sim.add_argument("--out", default="sric-out")
    p_sim.add_argument("--no-figures", action="store_true")
    p_sim.set_defaults(handler=cmd_simulate)

    p_bt = sub.add_parser("backtest", help="rolling backtest of a returns CSV")
    p_bt.add_argument("--data", required=True, help="returns CSV (date column + assets)")
    p_bt.add_argument("--riskfree", default=None, help="risk-free CSV (date, rate)")
    p_bt.add_argument("--lookback", default="12", help="months, single (12) or sweep (1:120)")
    p_bt.add_argument("--preset", choices=sorted(_PRESETS), default="generic")
    p_bt.add_argument("--target-vol", type=float, default=0.10)
    p_bt.add_argument("--max-factors", type=int, default=None)
    p_bt.add_argument("--cost", type=float, default=0.0)
    p_bt.add_argument("--threads", type=int, default=None)
    p_bt.add_argument("--out", default="sric-out")
    p_bt.add_argument("--no-figures", action="store_true")
    p_bt.set_defaults(handler=cmd_backtest)

    p_ver = sub.add_parser("verify", help="run the full correctness suite")
    p_ver.add_argument("--level", choices=("quick", "full"), default="quick")
    p_ver.add_argument("--seed", type=int, default=1)
    p_ver.add_argument("--threads", type=int, default=None)
    p_ver.add_argument("--data", default=None, help="optional real returns CSV for the backtest shape check")
    p_ver.add_argument("--riskfree", default=None)
    p_ver.set_defaults(handler=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except SricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
