"""Bayesian calibration of computational models with Gaussian-process surrogates and discrepancy."""

from .calibration import (
    CalibrationProblem,
    CalibrationType,
    assemble_covariance_B,
    assemble_covariance_C,
    assemble_covariance_D,
    log_likelihood_A,
    log_likelihood_gp,
    log_posterior,
)
from .data import (
    AugmentedSet,
    DataError,
    ExperimentSet,
    SyntheticSet,
    augment_multioutput,
    deaugment,
    generate_synthetic,
    lhs_sample,
    load_data,
    save_data,
)
from .diagnostics import (
    DiagnosticsReport,
    diagnose,
    effective_sample_size,
    integrated_autocorrelation_time,
    prediction_error_stats,
    split_rhat,
    summarize,
)
from .expr import ExpressionError
from .kernels import (
    DiscrepancyKernel,
    KernelFamily,
    NonPSDError,
    SurrogateKernel,
    covariance_matrix,
    kernel_value,
    multitask_value,
    scaled_distance,
)
from .models import ModelDomainError, ModelSpec, builtin_model, evaluate_model, expression_model
from .predict import (
    GPPredictor,
    build_predictor,
    model_prediction_errors,
    predict,
    predict_discrepancy,
    predict_outputs,
)
from .priors import Gamma, Normal, PriorDistribution, Uniform, prior_from_dict
from .sampler import (
    ChainResult,
    InitializationError,
    SamplerConfig,
    initialize_walkers,
    load_chain,
    run_ensemble,
    save_chain,
    stretch_move,
)
from .sensitivity import SobolResult, halton_sequence, prior_bounds, sobol_indices


def parse_model_expression(texts, xdim: int, pdim: int) -> ModelSpec:
    """Model whose outputs are the given expressions (parameters unlabelled, priors unset)."""
    return expression_model(texts, xdim, pdim)


def prediction_errors(problem, theta_map):
    """``(avg, max, std)`` of absolute prediction errors at ``theta_map``."""
    return prediction_error_stats(model_prediction_errors(problem, theta_map))


__version__ = "0.1.0"
