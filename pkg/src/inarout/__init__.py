"""Integer-valued AR(1) series with isolated outliers: simulation,
conditional-least-squares estimation of outlier sizes, and the asymptotic
laws needed to verify the estimators numerically."""

from .errors import (
    BadTimes,
    CampaignFailed,
    DegenerateDenominator,
    InarError,
    MissingMu,
    OptimizerFailed,
    SampleTooShort,
    SingularMoment,
    ValidationError,
)
from .model import (
    GRADIENT_TOL,
    SCENARIO_TAGS,
    AsymptoticLaw,
    EstimateReport,
    InnovationDist,
    ModelSpec,
    OptimizerInfo,
    OutlierScenario,
    Series,
    validate_scenario,
)
from .moments import (
    ClsCovariance,
    StationaryMoments,
    cls_covariance,
    stationary_moments,
    stationary_pgf,
    stationary_third_moment_fixed_point,
    transient_moments,
)
from .simulate import (
    DecomposedPath,
    SimConfig,
    child_seed,
    contaminate_additive,
    read_series,
    series_text,
    simulate_inar1,
    simulate_innovational,
    simulate_innovational_direct,
    simulate_observed,
    write_series,
)
from .baseline import cls_alpha, cls_joint
from .additive import (
    ProfileObjective,
    additive_conditional_law,
    additive_limit_values,
    additive_objective,
    estimate_additive,
    objective_gradient,
    objective_hessian,
)
from .innovational import (
    estimate_innovational,
    innovational_conditional_law,
    innovational_limit_values,
    innovational_objective,
    z_moments,
)
from .mc import (
    CHECKS,
    McCampaign,
    McRecord,
    McSummary,
    McThresholds,
    read_records,
    run_campaign,
    summarize_records,
    write_records,
)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticLaw",
    "BadTimes",
    "CHECKS",
    "CampaignFailed",
    "ClsCovariance",
    "DecomposedPath",
    "DegenerateDenominator",
    "EstimateReport",
    "GRADIENT_TOL",
    "InarError",
    "InnovationDist",
    "McCampaign",
    "McRecord",
    "McSummary",
    "McThresholds",
    "MissingMu",
    "ModelSpec",
    "OptimizerFailed",
    "OptimizerInfo",
    "OutlierScenario",
    "ProfileObjective",
    "SCENARIO_TAGS",
    "SampleTooShort",
    "Series",
    "SimConfig",
    "SingularMoment",
    "StationaryMoments",
    "ValidationError",
    "additive_conditional_law",
    "additive_limit_values",
    "additive_objective",
    "objective_gradient",
    "objective_hessian",
    "child_seed",
    "cls_alpha",
    "cls_covariance",
    "cls_joint",
    "contaminate_additive",
    "estimate_additive",
    "estimate_innovational",
    "innovational_conditional_law",
    "innovational_limit_values",
    "innovational_objective",
    "read_records",
    "read_series",
    "run_campaign",
    "series_text",
    "simulate_inar1",
    "simulate_innovational",
    "simulate_innovational_direct",
    "simulate_observed",
    "stationary_moments",
    "stationary_pgf",
    "stationary_third_moment_fixed_point",
    "summarize_records",
    "transient_moments",
    "validate_scenario",
    "write_records",
    "write_series",
    "z_moments",
]
