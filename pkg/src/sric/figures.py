"""File-based figure rendering for experiment and backtest reports.

Every renderer takes a report object and a target path, draws with the Agg
backend (no display required), and returns the path it wrote. render_report
dispatches on the report kind so the command line can stay generic.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

from .backtest import BacktestReport
from .errors import DomainError
from .estimators import GapRegime
from .simulate import ExperimentReport

_DPI = 150


def _centers(edges) -> np.ndarray:
    e = np.asarray(edges, dtype=float)
    return (e[:-1] + e[1:]) / 2.0


def _density(hist: dict) -> tuple[np.ndarray, np.ndarray]:
    """Bin centers and normalized density of a stored histogram."""
    edges = np.asarray(hist["edges"], dtype=float)
    counts = np.asarray(hist["counts"], dtype=float)
    total = counts.sum()
    widths = np.diff(edges)
    density = counts / (total * widths) if total > 0 else counts
    return _centers(edges), density


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_bias(report: ExperimentReport, path) -> Path:
    """Sharpe estimates against horizon (sweep) or their draw distribution
    (single population)."""
    arms = report.arms
    series = (
        ("rho_hat", "in-sample Sharpe"),
        ("rho_minus_noise_fit", "half-corrected"),
        ("sric", "sric"),
        ("tau_hat", "out-of-sample Sharpe"),
    )
    if len(arms) > 1:
        fig, ax = plt.subplots(figsize=(7.0, 4.5))
        horizons = [arm["horizon_years"] for arm in arms]
        for key, label in series:
            means = [arm[f"{key}_mean"] for arm in arms]
            ses = [arm[f"{key}_se"] for arm in arms]
            ax.errorbar(horizons, means, yerr=ses, marker="o", capsize=3, label=label)
        ax.set_xscale("log")
        ax.set_xlabel("horizon (years)")
        ax.set_ylabel("annualized Sharpe")
        ax.set_title("Sharpe estimates vs. sample length")
        ax.grid(alpha=0.3)
        ax.legend()
        return _save(fig, path)

    label = arms[0]["label"]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for key in ("rho_hat", "sric", "tau_hat"):
        hist = report.histograms[label][key]
        centers, density = _density(hist)
        ax.plot(centers, density, drawstyle="steps-mid", label=key)
    ax.set_xlabel("annualized Sharpe")
    ax.set_ylabel("density")
    ax.set_title(f"Estimate distributions, {label}")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def render_distribution(report: ExperimentReport, path) -> Path:
    """Gap histogram with its theoretical overlay."""
    arm = report.arms[0]
    label = arm["label"]
    k = int(arm["k"])
    t = float(arm["horizon_years"])
    hist = report.histograms[label]["gap"]
    centers, density = _density(hist)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(centers, density, drawstyle="steps-mid", label="simulated gap")
    grid = np.linspace(centers[0], centers[-1], 400)
    if report.extras.get("regime") == GapRegime.NULL_TAU_ZERO.value:
        pdf = stats.chi(k + 1, scale=1.0 / math.sqrt(t)).pdf(grid)
        ax.plot(grid, pdf, linestyle="--", label="chi(k+1)/sqrt(T)")
    else:
        mean = report.extras["theory_mean_gap"]
        var = report.extras["theory_var_gap"]
        pdf = stats.norm(mean, math.sqrt(var)).pdf(grid)
        ax.plot(grid, pdf, linestyle="--", label="normal, order-1/T moments")
    ax.axvline(report.extras["theory_mean_gap"], color="gray", linewidth=0.8)
    ax.set_xlabel("rho_hat - tau_hat")
    ax.set_ylabel("density")
    ax.set_title(f"Overfit gap distribution, {label}, k={k}, T={t:g}")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def render_mv(report: ExperimentReport, path) -> Path:
    """Mean-variance gap terms with their exact expectations."""
    arm = report.arms[0]
    names = ("n_mv", "e_mv", "u_mv", "mv_total")
    labels = ("noise fit", "estimation error", "undershoot", "total gap")
    means = [arm[f"{name}_mean"] for name in names]
    ses = [arm[f"{name}_se"] for name in names]

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    positions = np.arange(len(names))
    ax.bar(positions, means, yerr=ses, capsize=4, color="tab:blue", alpha=0.8)
    ax.plot([positions[0]], [report.extras["theory_n_mv"]], marker="_", markersize=24,
            color="tab:red", linestyle="none", label="exact expectation")
    ax.plot([positions[-1]], [report.extras["theory_mv_total"]], marker="_", markersize=24,
            color="tab:red", linestyle="none")
    ax.set_xticks(positions)
    ax.set_xticklabels(labels)
    ax.set_ylabel("expected utility shortfall")
    ax.set_title(f"Mean-variance gap terms, {arm['label']}, T={arm['horizon_years']:g}")
    ax.grid(alpha=0.3, axis="y")
    ax.legend()
    return _save(fig, path)


def render_selection(report: ExperimentReport, path) -> Path:
    """Three panels: out-of-sample Sharpe densities, selected dimensions,
    and mean Sharpe per criterion."""
    criteria = [arm["criterion"] for arm in report.arms]
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 4.0))

    ax = axes[0]
    for name in criteria:
        centers, density = _density(report.histograms[name]["oos_sharpe"])
        ax.plot(centers, density, drawstyle="steps-mid", label=name)
    ax.set_xlabel("out-of-sample Sharpe")
    ax.set_ylabel("density")
    ax.set_title("Realized Sharpe by criterion")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)

    ax = axes[1]
    for name in ("sric", "aic"):
        if name in criteria:
            centers, density = _density(report.histograms[name]["selected_dim"])
            ax.plot(centers, density, drawstyle="steps-mid", label=name)
    ax.set_xlabel("selected dimension")
    ax.set_ylabel("density")
    ax.set_title("Chosen model size")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)

    ax = axes[2]
    means = [arm["oos_sharpe_mean"] for arm in report.arms]
    ses = [arm["oos_sharpe_se"] for arm in report.arms]
    positions = np.arange(len(criteria))
    ax.bar(positions, means, yerr=ses, capsize=4, color="tab:blue", alpha=0.8)
    ax.set_xticks(positions)
    ax.set_xticklabels(criteria, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("mean out-of-sample Sharpe")
    ax.set_title("Criterion comparison")
    ax.grid(alpha=0.3, axis="y")
    return _save(fig, path)


def render_frontier(report: ExperimentReport, path) -> Path:
    """Mean criterion values per nested dimension, argmax marked."""
    ks = [arm["k_assets"] for arm in report.arms]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for key, label in (("rho_hat", "in-sample Sharpe"), ("sric", "sric"),
                       ("tau_hat", "out-of-sample Sharpe")):
        means = [arm[f"{key}_mean"] for arm in report.arms]
        ses = [arm[f"{key}_se"] for arm in report.arms]
        ax.errorbar(ks, means, yerr=ses, marker="o", markersize=3, capsize=2, label=label)
    ax.axvline(report.extras["argmax_k"], color="gray", linewidth=0.8, linestyle="--",
               label=f"argmax sric = {report.extras['argmax_k']}")
    ax.set_xlabel("assets in model")
    ax.set_ylabel("annualized Sharpe")
    ax.set_title("Diversification against estimation error")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def render_backtest(report: BacktestReport, path) -> Path:
    """Cumulative out-of-sample returns and selected dimensions over time."""
    x = np.arange(len(report.months))
    fig, axes = plt.subplots(2, 1, figsize=(9.0, 6.5), sharex=True,
                             gridspec_kw={"height_ratios": [2, 1]})

    ax = axes[0]
    for name in report.criteria:
        sharpe = report.oos_sharpe[name]
        tag = f"{name} (Sharpe {sharpe:.2f})" if math.isfinite(sharpe) else name
        ax.plot(x, report.cumulative(name), label=tag)
    ax.set_ylabel("cumulative return")
    ax.set_title(f"Rolling backtest, lookback {report.lookback_months} months")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)

    ax = axes[1]
    for name in report.criteria:
        ax.plot(x, report.selected_dims[name], drawstyle="steps-mid", label=name)
    ax.set_ylabel("selected dimension")
    ax.set_xlabel("month")
    ticks = x[:: max(1, len(x) // 8)]
    ax.set_xticks(ticks)
    ax.set_xticklabels([report.months[i] for i in ticks], rotation=30, ha="right", fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def render_backtest_sweep(summary: dict, path) -> Path:
    """Out-of-sample Sharpe against lookback length per criterion.

    summary has "lookbacks" (list of ints) and "oos_sharpe" (criterion name
    to list of Sharpes aligned with lookbacks).
    """
    lookbacks = summary["lookbacks"]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name, sharpes in summary["oos_sharpe"].items():
        ax.plot(lookbacks, sharpes, marker="o", markersize=3, label=name)
    ax.set_xlabel("lookback (months)")
    ax.set_ylabel("out-of-sample Sharpe")
    ax.set_title("Lookback sweep")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


_EXPERIMENT_RENDERERS = {
    "bias": render_bias,
    "distribution": render_distribution,
    "mv": render_mv,
    "select": render_selection,
    "frontier": render_frontier,
}


def render_report(report, outdir, stem: str = "report") -> list:
    """Render whichever figures the report supports; return written paths."""
    outdir = Path(outdir)
    if isinstance(report, BacktestReport):
        return [render_backtest(report, outdir / f"{stem}.png")]
    if isinstance(report, ExperimentReport):
        renderer = _EXPERIMENT_RENDERERS.get(report.experiment)
        if renderer is None:
            raise DomainError(f"no renderer for experiment {report.experiment!r}")
        return [renderer(report, outdir / f"{stem}.png")]
    raise DomainError(f"cannot render object of type {type(report).__name__}")
