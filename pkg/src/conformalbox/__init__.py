"""Calibrated hyper-rectangle prediction for multi-target regression.

A point regressor plus an error model turn each prediction into per-target
intervals; a copula over the calibration nonconformity scores converts a
global significance level into the shared per-target level that makes the
whole box valid. Three copulas are provided: independent (closed form),
Gumbel (fitted positive dependence), and empirical (nonparametric).
"""

from .config import ExperimentConfig, config_from_dict, load_config
from .copulas import (
    THETA_MAX,
    ConfidenceSpec,
    CopulaModel,
    calibrate_thresholds,
    copula_cdf,
    empirical_epsilon_t,
    fit_gumbel,
    frechet_bounds,
    gumbel_epsilon_t,
    gumbel_pair_log_density,
    independent_epsilon_t,
    kendall_tau,
    mean_pairwise_tau,
    per_target_significance,
    sample_gumbel,
)
from .data import (
    Dataset,
    Fold,
    ScalerParams,
    SplitPlan,
    load_csv,
    make_folds,
    standardize,
    synth_dataset,
)
from .evaluate import (
    ExperimentReport,
    FoldResult,
    ValidityCurve,
    default_grid,
    efficiency_median_volume,
    plot_validity,
    plot_volumes,
    report_to_dict,
    run_experiment,
    summarize,
    validity_curve,
    validity_gap,
    write_curves_csv,
    write_report_json,
)
from .predictor import (
    ConformalPredictor,
    PredictionBox,
    box_contains,
    box_volume,
    build,
    predict_box,
    with_copula,
    write_predictions_csv,
)
from .regressors import (
    ErrorModel,
    FittedModel,
    KnnModel,
    MlpModel,
    RegressorSpec,
    RidgeModel,
    fit,
    fit_error_model,
    mlp_gradient,
    selu,
    selu_grad,
)
from .scores import (
    EmpiricalCdf,
    ecdf_eval,
    ecdf_quantile,
    normalized_score,
    p_value,
    pseudo_observations,
    score_matrix,
    standard_score,
    write_score_matrix_csv,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "ConfidenceSpec", "ConformalPredictor", "CopulaModel", "Dataset",
    "EmpiricalCdf", "ErrorModel", "ExperimentConfig", "ExperimentReport",
    "FittedModel", "Fold", "FoldResult", "KnnModel", "MlpModel",
    "PredictionBox", "RegressorSpec", "RidgeModel", "ScalerParams",
    "SplitPlan", "THETA_MAX", "ValidityCurve", "box_contains", "box_volume",
    "build", "calibrate_thresholds", "config_from_dict", "copula_cdf",
    "default_grid", "ecdf_eval", "ecdf_quantile", "efficiency_median_volume",
    "empirical_epsilon_t", "errors", "fit", "fit_error_model", "fit_gumbel",
    "frechet_bounds", "gumbel_epsilon_t", "gumbel_pair_log_density",
    "independent_epsilon_t", "kendall_tau", "load_config", "load_csv",
    "make_folds", "mean_pairwise_tau", "mlp_gradient", "normalized_score",
    "p_value", "per_target_significance", "predict_box",
    "pseudo_observations", "run_experiment", "sample_gumbel", "score_matrix",
    "plot_validity", "plot_volumes", "report_to_dict",
    "selu", "selu_grad", "standard_score", "standardize", "summarize",
    "synth_dataset", "validity_curve", "validity_gap", "with_copula",
    "write_curves_csv", "write_predictions_csv", "write_report_json",
    "write_score_matrix_csv",
]
