"""seqci: confidence intervals for a two-stage group sequential trial with a
binary endpoint, plus a Monte Carlo engine benchmarking their coverage, width
and test-decision consistency."""

from .trial import (
    CiMethod,
    CiResult,
    Design,
    DegenerateDataError,
    InformationDecreaseError,
    StageStatistics,
    TrialData,
    TrialStatistics,
    ValidationError,
    analyze_trial,
    information,
    stage_statistics,
    stop_probability,
)
from .numerics import (
    BivariateSpec,
    RootProblem,
    bvn_cdf,
    bvn_rect,
    empirical_quantile,
    find_root,
    maximize_1d,
    norm_cdf,
    norm_pdf,
    norm_quantile,
)
from .unconditional import (
    AdjustedMoments,
    PValueFn,
    adjusted_asymptotic_ci,
    adjusted_moments,
    exact_ci,
    parametric_bootstrap_ci,
    randomisation_ci,
    repeated_ci,
    stagewise_pvalue,
    wald_ci,
)
from .conditional import (
    ConditionalDensity,
    PenalisedLikelihood,
    RejectionStarvationError,
    conditional_density,
    conditional_likelihood_ci,
    conditional_mle,
    conditional_tail,
    exact_conditional_ci,
    lambda_star,
    penalised_likelihood_ci,
    restricted_exact_conditional_ci,
)
from .simulation import (
    MetricRow,
    Scenario,
    SnapshotRecord,
    SweepResult,
    evaluate_metrics,
    replicate_snapshot,
    run_sweep,
    simulate_trial,
)
from .musec import MUSEC_DATA, MUSEC_DESIGN

__version__ = "0.1.0"

__all__ = [
    "CiMethod", "CiResult", "Design", "TrialData", "StageStatistics", "TrialStatistics",
    "DegenerateDataError", "InformationDecreaseError", "ValidationError",
    "analyze_trial", "information", "stage_statistics", "stop_probability",
    "BivariateSpec", "RootProblem", "bvn_cdf", "bvn_rect", "empirical_quantile",
    "find_root", "maximize_1d", "norm_cdf", "norm_pdf", "norm_quantile",
    "AdjustedMoments", "PValueFn", "adjusted_asymptotic_ci", "adjusted_moments",
    "exact_ci", "parametric_bootstrap_ci", "randomisation_ci", "repeated_ci",
    "stagewise_pvalue", "wald_ci",
    "ConditionalDensity", "PenalisedLikelihood", "RejectionStarvationError",
    "conditional_density", "conditional_likelihood_ci", "conditional_mle",
    "conditional_tail", "exact_conditional_ci", "lambda_star",
    "penalised_likelihood_ci", "restricted_exact_conditional_ci",
    "MetricRow", "Scenario", "SnapshotRecord", "SweepResult",
    "evaluate_metrics", "replicate_snapshot", "run_sweep", "simulate_trial",
    "MUSEC_DATA", "MUSEC_DESIGN",
    "__version__",
]
