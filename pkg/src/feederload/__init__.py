"""Heavy-tailed feeder load modeling, day-ahead forecasting, and
aggregation-error scaling.

The package has five analysis layers plus serialization and a CLI:

* tailmodel: generalized Pareto distribution, profile MLE, tail diagnostics
* feeder: radial feeder trees and per-device load groups
* forecaster: decomposed (total x shape) day-ahead ARX forecasting
* scaling: forecast-error cv and its scaling law over aggregate size
* residuals: autocorrelation energy, Shapiro-Wilk, normality sweeps
* synth: reproducible synthetic populations with known ground truth
"""

from .errors import (
    ConvergenceError,
    DegenerateDataError,
    DomainError,
    FeederLoadError,
    InsufficientDataError,
    InvalidParameterError,
    SchemaError,
    SingularFitError,
    TreeStructureError,
    UnknownEdgeError,
)
from .feeder import (
    DEVICE_KINDS,
    DeviceGroup,
    FeederTree,
    downstream_load,
    edge_label,
    group_by_device,
)
from .forecaster import (
    HOURS,
    ArxModel,
    CvResult,
    LoadHistory,
    VectorArxModel,
    cross_validate_order,
    decompose_day,
    fit_shape_varx,
    fit_total_arx,
    fit_vector_arx,
    forecast_day,
    one_step_forecasts,
    predict_shape,
    predict_total,
)
from .residuals import (
    ResidualReport,
    SweepResult,
    SwResult,
    autocorr,
    correlation_energy,
    residual_report,
    shapiro_wilk,
    significance_threshold,
    sweep_normality,
)
from .scaling import (
    AggCurve,
    AggregationPoint,
    ScalingLaw,
    build_agg_curve,
    critical_load,
    cv,
    eval_scaling,
    fit_scaling_law,
    irreducible_error,
)
from .synth import (
    NOISE_KINDS,
    Population,
    SynthConfig,
    default_base_shape,
    subset_indices,
    synth_population,
)
from .tailmodel import (
    GpdFit,
    GpdParams,
    TailDiagnostics,
    compute_tail_diagnostics,
    fit_gpd_mle,
    gpd_cdf,
    gpd_pdf,
    gpd_quantile,
    gpd_sample,
    log_survival_points,
    mean_excess,
    mean_excess_slope,
    percentile_thresholds,
    zipf_points,
    zipf_tail_slope,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "FeederLoadError", "InvalidParameterError", "DomainError",
    "InsufficientDataError", "DegenerateDataError", "ConvergenceError",
    "SingularFitError", "TreeStructureError", "UnknownEdgeError",
    "SchemaError",
    # tail model
    "GpdParams", "GpdFit", "TailDiagnostics", "gpd_pdf", "gpd_cdf",
    "gpd_quantile", "gpd_sample", "fit_gpd_mle", "mean_excess",
    "mean_excess_slope", "zipf_points", "zipf_tail_slope",
    "log_survival_points", "percentile_thresholds",
    "compute_tail_diagnostics",
    # feeder
    "DEVICE_KINDS", "FeederTree", "DeviceGroup", "downstream_load",
    "group_by_device", "edge_label",
    # forecaster
    "HOURS", "LoadHistory", "ArxModel", "VectorArxModel", "CvResult",
    "decompose_day", "fit_total_arx", "predict_total", "fit_shape_varx",
    "fit_vector_arx", "predict_shape", "forecast_day", "one_step_forecasts",
    "cross_validate_order",
    # scaling
    "AggregationPoint", "AggCurve", "ScalingLaw", "cv", "fit_scaling_law",
    "build_agg_curve", "critical_load", "irreducible_error", "eval_scaling",
    # residuals
    "SwResult", "ResidualReport", "SweepResult", "autocorr",
    "correlation_energy", "significance_threshold", "shapiro_wilk",
    "residual_report", "sweep_normality",
    # synth
    "NOISE_KINDS", "SynthConfig", "Population", "synth_population",
    "subset_indices", "default_base_shape",
]
