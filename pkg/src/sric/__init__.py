"""Unbiased out-of-sample Sharpe estimation and model selection.

The in-sample Sharpe ratio of an optimized strategy overstates what the
strategy will deliver, and the overstatement grows with the number of
fitted parameters. This package computes the corrected estimate

    sric = rho_hat - k / (T * rho_hat)

(rho_hat the annualized in-sample Sharpe, k the number of Sharpe-relevant
parameters, T the sample length in years), the matching decompositions of
the in-sample/out-of-sample gap, selection over nested model families,
Monte Carlo experiments that check every statistical claim, and a rolling
backtest harness for returns panels.

Layers, bottom up:

    core        validated covariance/model containers, whitening
    estimators  sric, aic, related criteria, gap distributions
    mvopt       Sharpe maximization and gap decompositions
    select      nested-family model selection
    simulate    deterministic Monte Carlo experiments
    ingest      CSV loading, factor bases, sample moments, GLS transform
    backtest    monthly rolling out-of-sample evaluation
    figures     file-based matplotlib rendering of reports
    verify      the numbered correctness suite behind `sric verify`
    cli         command-line front end (`sric` or `python -m sric`)
"""

from .core import (
    CovMatrix,
    MVDecomposition,
    PopulationModel,
    SampleEstimate,
    SharpeDecomposition,
    mahalanobis_norm,
    whiten,
)
from .errors import (
    AlignmentError,
    BasisRankError,
    ConfigError,
    DegenerateEstimateError,
    DegeneratePopulationError,
    DegenerateWindowError,
    DimensionError,
    DomainError,
    EmptyDataError,
    EmptyFamilyError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    ParseError,
    SricError,
)
from .estimators import (
    NEGATIVE_SENTINEL,
    Criterion,
    CriterionValue,
    GapDistributionNull,
    GapRegime,
    UncertaintyMoments,
    aic,
    aic_normalized,
    criterion_value,
    gap_distribution_null,
    gap_moments_positive,
    sharpe_pvalue,
    siegel_woodgate,
    sric,
    sric_net,
    sric_split,
)
from .mvopt import (
    decompose,
    decompose_mv,
    max_insample_sharpe,
    max_insample_sharpe_subspace,
    sharpe_of,
)
from .select import ModelCandidate, SelectionResult, build_nested_family, select
from .simulate import (
    BiasSweepConfig,
    ExperimentReport,
    FrontierConfig,
    ReplicationRecord,
    RngSpec,
    SelectionExperimentConfig,
    canonical_population,
    draw_estimate,
    example_one_config,
    iter_replications,
    resolve_threads,
    run_bias_experiment,
    run_bias_sweep,
    run_distribution_experiment,
    run_frontier_experiment,
    run_mv_experiment,
    run_selection_experiment,
)
from .ingest import (
    FRENCH_DAILY,
    FRENCH_MONTHLY,
    CsvOptions,
    FactorBasis,
    RateSeries,
    RegressionPanel,
    ReturnsPanel,
    build_factor_basis,
    load_returns_csv,
    load_riskfree_csv,
    regression_to_mv,
    sample_moments,
    to_excess,
)
from .backtest import (
    BacktestConfig,
    BacktestCriterion,
    BacktestReport,
    annualized_sharpe,
    run_rolling,
)
from .verify import DEFAULT_SEED, CriterionResult, run_all

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "BacktestConfig",
    "BacktestCriterion",
    "BacktestReport",
    "BasisRankError",
    "BiasSweepConfig",
    "ConfigError",
    "CovMatrix",
    "Criterion",
    "CriterionResult",
    "CriterionValue",
    "CsvOptions",
    "DEFAULT_SEED",
    "DegenerateEstimateError",
    "DegeneratePopulationError",
    "DegenerateWindowError",
    "DimensionError",
    "DomainError",
    "EmptyDataError",
    "EmptyFamilyError",
    "ExperimentReport",
    "FactorBasis",
    "FRENCH_DAILY",
    "FRENCH_MONTHLY",
    "FrontierConfig",
    "GapDistributionNull",
    "GapRegime",
    "MVDecomposition",
    "ModelCandidate",
    "NEGATIVE_SENTINEL",
    "NotPositiveDefiniteError",
    "NotSymmetricError",
    "ParseError",
    "PopulationModel",
    "RateSeries",
    "RegressionPanel",
    "ReplicationRecord",
    "ReturnsPanel",
    "RngSpec",
    "SampleEstimate",
    "SelectionExperimentConfig",
    "SelectionResult",
    "SharpeDecomposition",
    "SricError",
    "UncertaintyMoments",
    "aic",
    "aic_normalized",
    "annualized_sharpe",
    "build_factor_basis",
    "build_nested_family",
    "canonical_population",
    "criterion_value",
    "decompose",
    "decompose_mv",
    "draw_estimate",
    "example_one_config",
    "gap_distribution_null",
    "gap_moments_positive",
    "iter_replications",
    "load_returns_csv",
    "load_riskfree_csv",
    "mahalanobis_norm",
    "max_insample_sharpe",
    "max_insample_sharpe_subspace",
    "regression_to_mv",
    "resolve_threads",
    "run_all",
    "run_bias_experiment",
    "run_bias_sweep",
    "run_distribution_experiment",
    "run_frontier_experiment",
    "run_mv_experiment",
    "run_rolling",
    "run_selection_experiment",
    "sample_moments",
    "select",
    "sharpe_of",
    "sharpe_pvalue",
    "siegel_woodgate",
    "sric",
    "sric_net",
    "sric_split",
    "to_excess",
    "whiten",
]
