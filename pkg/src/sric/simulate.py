"""Deterministic Monte Carlo engine for the bias, selection, frontier,
distribution, and mean-variance utility experiments.

Determinism contract
--------------------
Randomness comes from counter-based Philox streams keyed by
(master_seed, stream_index). Replications are processed in fixed-size
chunks; chunk c of experiment arm a reads stream index a * ARM_STRIDE + c,
and chunk boundaries depend only on the configured chunk size. Workers may
compute chunks in any order or in parallel: each chunk's draws are
self-contained, chunk results are concatenated in chunk order, and all
reductions (means, standard errors, histograms) run once over the
materialized per-replication arrays. Results are therefore bit-identical
for a fixed master seed regardless of worker count or scheduling.

Speed
-----
Every experiment is vectorized over replications via whitening. With
y = L^-1 mu and Z = y + W/sqrt(T) (W standard normal rows), all Sharpe and
utility quantities are functions of |y|^2, Z y, and |Z|^2. Nested
coordinate-prefix models reduce to cumulative sums of the same products
because the Cholesky factor of a leading principal block of sigma is the
leading block of the full factor.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy import stats

from .core import CovMatrix, PopulationModel, SampleEstimate, whiten
from .errors import ConfigError, DomainError
from .estimators import (
    NEGATIVE_SENTINEL,
    RHO_FLOOR,
    GapRegime,
    gap_distribution_null,
    gap_moments_positive,
)

# Stream-index layout: arm a owns indices [a * ARM_STRIDE, a * ARM_STRIDE +
# number of chunks); one-off draws (fixed truth vectors) live at TRUTH_INDEX.
ARM_STRIDE = 2**32
TRUTH_INDEX = 2**63

DEFAULT_CHUNK_ROWS = 8192

# Fixed histogram bins: comparable plots across runs and configs.
SHARPE_BIN_RANGE = (-2.0, 3.0)
SHARPE_BIN_WIDTH = 0.05
UTILITY_BIN_RANGE = (-50.0, 10.0)
UTILITY_BIN_WIDTH = 0.25

# Slack for the per-replication bound rho_hat - tau_hat <= |nu|: the two
# sides are computed by different expressions and may differ by round-off.
BOUND_ATOL = 1e-12


@dataclass(frozen=True)
class RngSpec:
    """Counter-based random stream factory with a worker-independent layout."""

    master_seed: int
    chunk_rows: int = DEFAULT_CHUNK_ROWS

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        if self.chunk_rows < 1:
            raise ConfigError(f"chunk_rows must be positive, got {self.chunk_rows}")

    def stream(self, index: int) -> np.random.Generator:
        """Independent generator for one stream index."""
        return np.random.Generator(np.random.Philox(key=[self.master_seed, int(index)]))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, then SRIC_THREADS, then cpu count capped at 8."""
    if threads is None:
        env = os.environ.get("SRIC_THREADS")
        if env is not None:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigError(f"SRIC_THREADS must be an integer, got {env!r}") from exc
    if threads is None:
        threads = min(8, os.cpu_count() or 1)
    return max(1, int(threads))


def _run_chunks(kernel, reps: int, rng: RngSpec, arm: int = 0, threads: int | None = None):
    """Map kernel(rows, stream) over fixed-size chunks; concatenate in order.

    kernel must return a dict of per-replication arrays of length rows.
    """
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    rows = rng.chunk_rows
    plan = [(i, min(rows, reps - i * rows)) for i in range((reps + rows - 1) // rows)]
    base = arm * ARM_STRIDE

    def one(item):
        index, n = item
        return kernel(n, rng.stream(base + index))

    n_workers = resolve_threads(threads)
    if n_workers > 1 and len(plan) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(one, plan))
    else:
        parts = [one(item) for item in plan]
    keys = parts[0].keys()
    return {key: np.concatenate([p[key] for p in parts]) for key in keys}


def draw_estimate(pop: PopulationModel, stream) -> SampleEstimate:
    """One draw mu_hat = mu + L z / sqrt(T) with z standard normal."""
    z = stream.standard_normal(pop.dim)
    mu_hat = pop.mu + (pop.sigma.chol @ z) / math.sqrt(pop.horizon_years)
    return SampleEstimate(mu_hat=mu_hat, sigma=pop.sigma, horizon_years=pop.horizon_years)


@dataclass(frozen=True)
class ReplicationRecord:
    """Realized values of every decomposition symbol for one draw."""

    rho_hat: float
    tau_hat: float
    sric: float
    aic_normalized: float
    noise_fit: float
    estimation_error: float
    noise: float
    u_hat: float
    u_oos: float
    n_mv: float
    e_mv: float
    u_mv: float
    selected_dim_sric: int | None = None
    selected_dim_aic: int | None = None


def _sric_of(rho: np.ndarray, k, horizon_years: float) -> np.ndarray:
    """Vectorized sric with the sentinel guard; k may be scalar or per-column."""
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        corrected = rho - k / (horizon_years * rho)
    return np.where((k > 0) & (rho <= RHO_FLOOR), NEGATIVE_SENTINEL, np.where(k > 0, corrected, rho))


def _draw_columns(pop: PopulationModel, gamma: float, rows: int, stream) -> dict:
    """One chunk of draws with every ReplicationRecord field, plus the gap
    rho_hat - tau_hat, the noise length |nu|, and the half-corrected Sharpe."""
    t = pop.horizon_years
    m = pop.dim
    k = m - 1
    y = whiten(pop.mu, pop.sigma)
    a = float(y @ y)
    w = stream.standard_normal((rows, m))
    z = y[None, :] + w / math.sqrt(t)
    c = np.einsum("ij,ij->i", z, z)
    b = z @ y
    nu_norm = np.linalg.norm(w, axis=1) / math.sqrt(t)
    rho = np.sqrt(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau_hat = np.where(rho > 0, b / rho, 0.0)
    sric_col = _sric_of(rho, k, t)
    cols = {
        "rho_hat": rho,
        "tau_hat": tau_hat,
        "gap": rho - tau_hat,
        "nu_norm": nu_norm,
        "sric": sric_col,
        # Paired difference for unbiasedness tests: E[sric - tau_hat] = 0,
        # and the paired standard error is far tighter than the marginals.
        "sric_minus_tau_hat": sric_col - tau_hat,
        "rho_minus_noise_fit": _sric_of(rho, k / 2.0, t),
        "aic_normalized": c - 2.0 * m / t,
        "u_hat": c / gamma,
        "u_oos": (2.0 * b - c) / gamma,
        "n_mv": (c - 2.0 * b + a) / gamma,
        "e_mv": (a - 2.0 * b + c) / gamma,
        "u_mv": 2.0 * (b - a) / gamma,
        "mv_total": 2.0 * (c - b) / gamma,
    }
    if a > 0:
        tau_star = math.sqrt(a)
        rho_star = b / tau_star
        cols["noise_fit"] = rho - rho_star
        cols["estimation_error"] = tau_star - tau_hat
        cols["noise"] = rho_star - tau_star
    else:
        # Null regime: the true optimal ray is undefined, so rho_star and the
        # terms built from it are reported as missing; tau_hat is exactly 0.
        cols["noise_fit"] = np.full(rows, np.nan)
        cols["estimation_error"] = np.zeros(rows)
        cols["noise"] = np.full(rows, np.nan)
    return cols


def iter_replications(pop: PopulationModel, reps: int, rng: RngSpec, gamma: float = 1.0):
    """Yield one ReplicationRecord per draw, in replication order."""
    cols = _run_chunks(lambda rows, s: _draw_columns(pop, gamma, rows, s), reps, rng, threads=1)
    record_names = {f.name for f in fields(ReplicationRecord)}
    for r in range(reps):
        yield ReplicationRecord(**{key: float(cols[key][r]) for key in cols if key in record_names})


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated output of one experiment: arm statistics plus histograms.

    arms is a tuple of flat dicts (parameters, then <field>_mean and
    <field>_se entries); histograms maps arm label -> field -> edges/counts;
    extras holds experiment-specific scalars such as argmax_k or the
    Kolmogorov-Smirnov statistic.
    """

    experiment: str
    config: dict
    replications: int
    arms: tuple = ()
    histograms: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return _sanitize(
            {
                "experiment": self.experiment,
                "config": self.config,
                "replications": self.replications,
                "arms": list(self.arms),
                "histograms": self.histograms,
                "extras": self.extras,
            }
        )

    def write(self, outdir, stem: str = "report") -> list:
        """Write report JSON, the per-arm CSV, and (if any) the histogram CSV.

        Returns the list of written paths. Output bytes are a pure function
        of the report contents, which are themselves a pure function of the
        configuration and master seed.
        """
        import csv
        import json
        from pathlib import Path

        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []

        json_path = outdir / f"{stem}.json"
        json_path.write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")
        written.append(json_path)

        arms_path = outdir / f"{stem}_arms.csv"
        columns: list[str] = []
        for arm in self.arms:
            for key in arm:
                if key not in columns:
                    columns.append(key)
        with arms_path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(columns)
            for arm in self.arms:
                writer.writerow([_csv_cell(arm.get(key)) for key in columns])
        written.append(arms_path)

        if self.histograms:
            hist_path = outdir / f"{stem}_histograms.csv"
            with hist_path.open("w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["arm", "field", "bin_left", "bin_right", "count"])
                for arm_label, per_field in self.histograms.items():
                    for name, hist in per_field.items():
                        edges = hist["edges"]
                        for left, right, count in zip(edges[:-1], edges[1:], hist["counts"]):
                            writer.writerow([arm_label, name, repr(float(left)), repr(float(right)), int(count)])
            written.append(hist_path)
        return written


def _sanitize(obj):
    """JSON-safe copy: numpy scalars to python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(key): _sanitize(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(value) for value in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else ""
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return mean, se


def _arm_stats(arm: dict, cols: dict, names) -> dict:
    for name in names:
        mean, se = _mean_se(cols[name])
        arm[f"{name}_mean"] = mean
        arm[f"{name}_se"] = se
    return arm


def _bin_edges(lo: float, hi: float, width: float) -> np.ndarray:
    n = int(round((hi - lo) / width))
    return np.linspace(lo, hi, n + 1)


def _histogram(values: np.ndarray, edges: np.ndarray) -> dict:
    counts, _ = np.histogram(values[np.isfinite(values)], bins=edges)
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def _integer_edges(n: int) -> np.ndarray:
    return np.arange(0.5, n + 1.5)


_RECORD_FIELDS = (
    "rho_hat",
    "tau_hat",
    "sric",
    "sric_minus_tau_hat",
    "rho_minus_noise_fit",
    "aic_normalized",
    "gap",
    "noise_fit",
    "estimation_error",
    "noise",
    "u_hat",
    "u_oos",
    "n_mv",
    "e_mv",
    "u_mv",
    "mv_total",
)


def _pop_config(pop: PopulationModel, rng: RngSpec, reps: int, gamma: float) -> dict:
    y = whiten(pop.mu, pop.sigma)
    return {
        "dim": pop.dim,
        "k": pop.dim - 1,
        "tau_star": float(np.linalg.norm(y)),
        "horizon_years": pop.horizon_years,
        "gamma": gamma,
        "reps": reps,
        "master_seed": rng.master_seed,
        "chunk_rows": rng.chunk_rows,
    }


def canonical_population(tau_star: float, k: int, horizon_years: float) -> PopulationModel:
    """mu = tau_star * e1 in k+1 dimensions, identity covariance.

    Every experiment on (tau_star, k, T) is invariant to rotations and to
    the covariance through whitening, so this representative is fully
    general for the quantities measured here.
    """
    if tau_star < 0:
        raise DomainError(f"tau_star must be >= 0, got {tau_star}")
    if k < 0 or int(k) != k:
        raise DomainError(f"k must be a non-negative integer, got {k}")
    mu = np.zeros(k + 1)
    mu[0] = tau_star
    return PopulationModel(mu=mu, sigma=CovMatrix.identity(k + 1), horizon_years=horizon_years)


def run_bias_experiment(
    pop: PopulationModel,
    reps: int,
    rng: RngSpec,
    threads: int | None = None,
    gamma: float = 1.0,
    arm: int = 0,
) -> ExperimentReport:
    """Means and standard errors of every per-draw field for one population.

    The four headline columns are the in-sample Sharpe, the in-sample Sharpe
    minus the estimated noise fit (half correction), the fully corrected
    sric, and the realized out-of-sample Sharpe tau_hat.
    """
    if reps < 1000:
        raise ConfigError(f"bias experiment needs reps >= 1000, got {reps}")
    cols = _run_chunks(lambda rows, s: _draw_columns(pop, gamma, rows, s), reps, rng, arm=arm, threads=threads)
    label = f"T={pop.horizon_years:g}"
    arm_row = _arm_stats(
        {"label": label, "horizon_years": pop.horizon_years, "k": pop.dim - 1}, cols, _RECORD_FIELDS
    )
    edges = _bin_edges(*SHARPE_BIN_RANGE, SHARPE_BIN_WIDTH)
    histograms = {
        label: {name: _histogram(cols[name], edges) for name in ("rho_hat", "sric", "tau_hat")}
    }
    return ExperimentReport(
        experiment="bias",
        config=_pop_config(pop, rng, reps, gamma),
        replications=reps,
        arms=(arm_row,),
        histograms=histograms,
    )


@dataclass(frozen=True)
class BiasSweepConfig:
    """Bias experiment swept over horizons at a fixed (tau_star, k)."""

    tau_star: float = 1.0
    k: int = 5
    horizon_grid: tuple = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
    reps: int = 10_000
    gamma: float = 1.0

    def __post_init__(self):
        if self.tau_star < 0:
            raise ConfigError(f"tau_star must be >= 0, got {self.tau_star}")
        if self.k < 0 or int(self.k) != self.k:
            raise ConfigError(f"k must be a non-negative integer, got {self.k}")
        if not self.horizon_grid or any(t <= 0 for t in self.horizon_grid):
            raise ConfigError(f"horizon_grid must be positive reals, got {self.horizon_grid}")
        if self.reps < 1000:
            raise ConfigError(f"reps must be >= 1000, got {self.reps}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")


def run_bias_sweep(config: BiasSweepConfig, rng: RngSpec, threads: int | None = None) -> ExperimentReport:
    """run_bias_experiment over a horizon grid; one arm per horizon."""
    arms = []
    for index, t in enumerate(config.horizon_grid):
        pop = canonical_population(config.tau_star, config.k, t)
        part = run_bias_experiment(pop, config.reps, rng, threads=threads, gamma=config.gamma, arm=index)
        arms.append(part.arms[0])
    return ExperimentReport(
        experiment="bias",
        config={
            "tau_star": config.tau_star,
            "k": config.k,
            "horizon_grid": list(config.horizon_grid),
            "reps": config.reps,
            "gamma": config.gamma,
            "master_seed": rng.master_seed,
            "chunk_rows": rng.chunk_rows,
        },
        replications=config.reps,
        arms=tuple(arms),
    )


def run_distribution_experiment(
    pop: PopulationModel, reps: int, rng: RngSpec, threads: int | None = None
) -> ExperimentReport:
    """Empirical distribution of the gap rho_hat - tau_hat against theory.

    Zero true mean: the gap is chi(k+1)/sqrt(T); the report carries the
    closed-form mean and variance and the Kolmogorov-Smirnov statistic.
    Positive true mean: the report carries the order-1/T moment formulas and
    the count of replications violating the bound gap <= |nu|.
    """
    if reps < 10_000:
        raise ConfigError(f"distribution experiment needs reps >= 10000, got {reps}")
    cols = _run_chunks(lambda rows, s: _draw_columns(pop, 1.0, rows, s), reps, rng, threads=threads)
    k = pop.dim - 1
    t = pop.horizon_years
    gap = cols["gap"]
    tau_star = float(np.linalg.norm(whiten(pop.mu, pop.sigma)))
    label = "null" if tau_star == 0 else f"tau_star={tau_star:g}"
    arm_row = _arm_stats({"label": label, "k": k, "horizon_years": t}, cols, _RECORD_FIELDS)
    arm_row["gap_var"] = float(np.var(gap, ddof=1))

    extras: dict = {}
    if tau_star == 0:
        handle = gap_distribution_null(k, t)
        extras["regime"] = GapRegime.NULL_TAU_ZERO.value
        extras["theory_mean_gap"] = handle.mean()
        extras["theory_var_gap"] = handle.variance()
        extras["ks_stat"] = float(stats.kstest(gap, handle.cdf).statistic)
    else:
        moments = gap_moments_positive(tau_star, k, t)
        violations = int(np.sum(gap > cols["nu_norm"] + BOUND_ATOL))
        extras["regime"] = GapRegime.POSITIVE_TAU.value
        extras["theory_mean_gap"] = moments.mean_gap
        extras["theory_var_gap"] = moments.var_gap
        extras["bound_violations"] = violations
        extras["bound_violation_fraction"] = violations / reps

    edges = _bin_edges(*SHARPE_BIN_RANGE, SHARPE_BIN_WIDTH)
    histograms = {label: {"gap": _histogram(gap, edges)}}
    return ExperimentReport(
        experiment="distribution",
        config=_pop_config(pop, rng, reps, 1.0),
        replications=reps,
        arms=(arm_row,),
        histograms=histograms,
        extras=extras,
    )


def run_mv_experiment(
    pop: PopulationModel, gamma: float, reps: int, rng: RngSpec, threads: int | None = None
) -> ExperimentReport:
    """Empirical means of the mean-variance gap terms against the exact
    targets E[N_mv] = (k+1)/(gamma T) and E[N_mv + E_mv + U_mv] = 2(k+1)/(gamma T)."""
    if reps < 10_000:
        raise ConfigError(f"mv experiment needs reps >= 10000, got {reps}")
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    cols = _run_chunks(lambda rows, s: _draw_columns(pop, gamma, rows, s), reps, rng, threads=threads)
    m = pop.dim
    t = pop.horizon_years
    arm_row = _arm_stats(
        {"label": f"gamma={gamma:g}", "k": m - 1, "horizon_years": t, "gamma": gamma},
        cols,
        _RECORD_FIELDS,
    )
    extras = {
        "theory_n_mv": m / (gamma * t),
        "theory_mv_total": 2.0 * m / (gamma * t),
    }
    return ExperimentReport(
        experiment="mv",
        config=_pop_config(pop, rng, reps, gamma),
        replications=reps,
        arms=(arm_row,),
        extras=extras,
    )


@dataclass(frozen=True)
class SelectionExperimentConfig:
    """Nested-model selection on independent unit-variance assets.

    The first n_true assets have true Sharpes drawn uniformly from
    [sharpe_low, sharpe_high]; the rest are pure noise. Model i holds the
    in-sample optimal portfolio of the first i assets with k_i = i - 1
    Sharpe-relevant parameters ("d-1" convention; "d" counts k_i = i for
    sensitivity runs).
    """

    n_assets: int = 100
    n_true: int = 50
    sharpe_low: float = -0.5
    sharpe_high: float = 0.5
    horizon_years: float = 5.0
    reps: int = 10_000
    redraw_truth: bool = True
    k_convention: str = "d-1"
    gamma: float = 1.0

    def __post_init__(self):
        if self.n_assets < 1:
            raise ConfigError(f"n_assets must be positive, got {self.n_assets}")
        if not 0 <= self.n_true <= self.n_assets:
            raise ConfigError(f"n_true must lie in [0, n_assets], got {self.n_true}")
        if self.sharpe_low > self.sharpe_high:
            raise ConfigError(f"sharpe_low {self.sharpe_low} exceeds sharpe_high {self.sharpe_high}")
        if not self.horizon_years > 0:
            raise ConfigError(f"horizon_years must be positive, got {self.horizon_years}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.k_convention not in ("d-1", "d"):
            raise ConfigError(f"k_convention must be 'd-1' or 'd', got {self.k_convention!r}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")


def _selection_columns(config: SelectionExperimentConfig, fixed_truth, rows: int, stream) -> dict:
    n = config.n_assets
    t = config.horizon_years
    gamma = config.gamma
    # Draw order within a chunk is part of the determinism contract:
    # uniforms for the true Sharpes first, then the noise normals.
    mu = np.zeros((rows, n))
    if config.n_true > 0:
        if config.redraw_truth:
            mu[:, : config.n_true] = stream.uniform(
                config.sharpe_low, config.sharpe_high, size=(rows, config.n_true)
            )
        else:
            mu[:, : config.n_true] = fixed_truth
    w = stream.standard_normal((rows, n))
    z = mu + w / math.sqrt(t)

    c = np.cumsum(z * z, axis=1)
    b = np.cumsum(mu * z, axis=1)
    rho = np.sqrt(c)
    k_vec = np.arange(n) if config.k_convention == "d-1" else np.arange(1, n + 1)
    sric_mat = _sric_of(rho, k_vec, t)
    aic_mat = -t * c + 2.0 * (k_vec + 1.0)

    idx = np.arange(rows)
    i_sric = np.argmax(sric_mat, axis=1)
    i_aic = np.argmin(aic_mat, axis=1)

    def picked(i_sel):
        with np.errstate(invalid="ignore", divide="ignore"):
            tau = np.where(rho[idx, i_sel] > 0, b[idx, i_sel] / rho[idx, i_sel], 0.0)
        utility = (2.0 * b[idx, i_sel] - c[idx, i_sel]) / gamma
        return tau, utility

    tau_sric, u_sric = picked(i_sric)
    tau_aic, u_aic = picked(i_aic)

    # Equal weight: the in-sample optimum restricted to the ones direction.
    sz = z.sum(axis=1)
    sm = mu.sum(axis=1)
    tau_ew = np.sign(sz) * sm / math.sqrt(n)
    u_ew = (2.0 * sm * sz - sz * sz) / (n * gamma)
    tau_mw, u_mw = picked(np.full(rows, n - 1))

    return {
        "oos_sharpe_sric": tau_sric,
        "oos_sharpe_aic": tau_aic,
        "oos_sharpe_equal_weight": tau_ew,
        "oos_sharpe_markowitz": tau_mw,
        "mv_utility_sric": u_sric,
        "mv_utility_aic": u_aic,
        "mv_utility_equal_weight": u_ew,
        "mv_utility_markowitz": u_mw,
        "selected_dim_sric": (i_sric + 1).astype(float),
        "selected_dim_aic": (i_aic + 1).astype(float),
    }


def run_selection_experiment(
    config: SelectionExperimentConfig, rng: RngSpec, threads: int | None = None
) -> ExperimentReport:
    """Nested selection by sric and aic against equal-weight and Markowitz.

    Per replication: redraw the true Sharpes (configurable), draw mu_hat,
    evaluate the nested prefix models, select per criterion, and record the
    out-of-sample Sharpe, the out-of-sample mean-variance utility, and the
    selected dimension. Baselines: equal weight (the ones direction) and
    Markowitz (the full asset space).
    """
    fixed_truth = None
    if not config.redraw_truth and config.n_true > 0:
        fixed_truth = rng.stream(TRUTH_INDEX).uniform(
            config.sharpe_low, config.sharpe_high, size=config.n_true
        )
    cols = _run_chunks(
        lambda rows, s: _selection_columns(config, fixed_truth, rows, s),
        config.reps,
        rng,
        threads=threads,
    )

    criteria = ("sric", "aic", "equal_weight", "markowitz")
    fixed_dim = {"equal_weight": 1.0, "markowitz": float(config.n_assets)}
    arms = []
    sharpe_edges = _bin_edges(*SHARPE_BIN_RANGE, SHARPE_BIN_WIDTH)
    utility_edges = _bin_edges(*UTILITY_BIN_RANGE, UTILITY_BIN_WIDTH)
    dim_edges = _integer_edges(config.n_assets)
    histograms: dict = {}
    for name in criteria:
        if name in fixed_dim:
            dims = np.full(config.reps, fixed_dim[name])
        else:
            dims = cols[f"selected_dim_{name}"]
        arm_row = {"label": name, "criterion": name}
        _arm_stats(arm_row, {"oos_sharpe": cols[f"oos_sharpe_{name}"], "mv_utility": cols[f"mv_utility_{name}"], "selected_dim": dims}, ("oos_sharpe", "mv_utility", "selected_dim"))
        arms.append(arm_row)
        histograms[name] = {
            "oos_sharpe": _histogram(cols[f"oos_sharpe_{name}"], sharpe_edges),
            "mv_utility": _histogram(cols[f"mv_utility_{name}"], utility_edges),
            "selected_dim": _histogram(dims, dim_edges),
        }

    # Paired contrasts: per-replication differences, so the standard errors
    # honestly reflect the common noise between the arms.
    extras: dict = {}
    for other in ("aic", "equal_weight", "markowitz"):
        mean, se = _mean_se(cols["oos_sharpe_sric"] - cols[f"oos_sharpe_{other}"])
        extras[f"oos_sharpe_sric_minus_{other}"] = {"mean": mean, "se": se}
    udiff_mean, udiff_se = _mean_se(cols["mv_utility_aic"] - cols["mv_utility_sric"])
    extras["mv_utility_aic_minus_sric"] = {"mean": udiff_mean, "se": udiff_se}
    dim_gap = cols["selected_dim_sric"] - cols["selected_dim_aic"]
    extras["min_dim_gap_sric_minus_aic"] = int(np.min(dim_gap))
    config_echo = {f.name: getattr(config, f.name) for f in fields(config)}
    config_echo["fixed_truth_sharpes"] = None if fixed_truth is None else fixed_truth.tolist()
    config_echo["master_seed"] = rng.master_seed
    config_echo["chunk_rows"] = rng.chunk_rows
    return ExperimentReport(
        experiment="select",
        config=config_echo,
        replications=config.reps,
        arms=tuple(arms),
        histograms=histograms,
        extras=extras,
    )


@dataclass(frozen=True)
class FrontierConfig:
    """Correlated identical-Sharpe assets: sric against the model dimension."""

    n_assets: int = 20
    true_sharpe: float = 1.0
    pairwise_corr: float = 0.5
    horizon_years: float = 10.0
    reps: int = 10_000

    def __post_init__(self):
        if self.n_assets < 1:
            raise ConfigError(f"n_assets must be positive, got {self.n_assets}")
        lo = -1.0 / max(self.n_assets - 1, 1)
        if not lo < self.pairwise_corr < 1.0:
            raise ConfigError(
                f"pairwise_corr must lie in ({lo:g}, 1) for a PD matrix, got {self.pairwise_corr}"
            )
        if not self.horizon_years > 0:
            raise ConfigError(f"horizon_years must be positive, got {self.horizon_years}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")

    def population(self) -> PopulationModel:
        n = self.n_assets
        sigma = np.full((n, n), self.pairwise_corr)
        np.fill_diagonal(sigma, 1.0)
        mu = np.full(n, self.true_sharpe)
        return PopulationModel(mu=mu, sigma=CovMatrix(sigma), horizon_years=self.horizon_years)


def _frontier_columns(y: np.ndarray, horizon_years: float, rows: int, stream) -> dict:
    # Prefix models in whitened coordinates: the Cholesky factor of a leading
    # block of sigma is the leading block of L, so the best portfolio on the
    # first i assets has rho^2 = cumulative sum of z^2 over whitened entries.
    w = stream.standard_normal((rows, y.size))
    z = y[None, :] + w / math.sqrt(horizon_years)
    c = np.cumsum(z * z, axis=1)
    b = np.cumsum(z * y[None, :], axis=1)
    rho = np.sqrt(c)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = np.where(rho > 0, b / rho, 0.0)
    return {"rho": rho, "tau": tau}


def run_frontier_experiment(
    config: FrontierConfig, rng: RngSpec, threads: int | None = None
) -> ExperimentReport:
    """Mean in-sample Sharpe and mean sric per nested dimension k = 1..n.

    The headline output is the argmax over dimensions of the mean sric: the
    point where adding correlated assets stops paying for its parameters.
    """
    pop = config.population()
    y = whiten(pop.mu, pop.sigma)
    t = config.horizon_years
    cols = _run_chunks(
        lambda rows, s: _frontier_columns(y, t, rows, s), config.reps, rng, threads=threads
    )
    arms = []
    mean_sric = []
    for i in range(config.n_assets):
        rho_i = cols["rho"][:, i]
        sric_i = _sric_of(rho_i, i, t)
        arm_row = {"label": f"k_assets={i + 1}", "k_assets": i + 1, "k": i}
        _arm_stats(arm_row, {"rho_hat": rho_i, "sric": sric_i, "tau_hat": cols["tau"][:, i]}, ("rho_hat", "sric", "tau_hat"))
        arms.append(arm_row)
        mean_sric.append(arm_row["sric_mean"])
    argmax_k = int(np.argmax(mean_sric)) + 1
    config_echo = {f.name: getattr(config, f.name) for f in fields(config)}
    config_echo["master_seed"] = rng.master_seed
    config_echo["chunk_rows"] = rng.chunk_rows
    return ExperimentReport(
        experiment="frontier",
        config=config_echo,
        replications=config.reps,
        arms=tuple(arms),
        extras={"argmax_k": argmax_k},
    )


def example_one_config(reps: int = 10_000, **overrides) -> SelectionExperimentConfig:
    """Selection experiment defaults: 100 assets, 50 true Sharpes in
    [-0.5, 0.5], five years of data."""
    return replace(SelectionExperimentConfig(reps=reps), **overrides)
