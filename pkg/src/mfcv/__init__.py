"""Multifidelity GP active learning driven by leave-one-out cross-validation."""

from .acquisition import (
    AcquisitionConfig,
    AcquisitionError,
    Candidate,
    MFCVAcquisition,
    cost_aware_argmax,
    fit_inner_gp,
    mfcv_acquisition,
    qmfcv_acquisition,
)
from .benchmarks import BENCHMARKS, BenchmarkFunction, discretize_fidelity, get_benchmark
from .cost import CostParams, cost, cumulative_cost, normalized_cost
from .gp import (
    Dataset,
    HyperBounds,
    Hyperparameters,
    PosteriorGP,
    SingularModelError,
    TrainingError,
    fit,
    log_marginal_likelihood,
    predict,
    solve_spd,
    train,
    train_posterior,
)
from .kernels import (
    FidelityKernelParams,
    InputKernelParams,
    fidelity_kernel,
    joint_kernel,
    kernel_matrix,
    matern_input_kernel,
)
from .loocv import CVRecord, cv_error_moments, cv_field, log_cv_observations, loo_statistics

from .config import ConfigError, ExperimentConfig, parse_config
from .harness import (
    RunRecord,
    SuiteResult,
    TraceRow,
    aggregate,
    cost_to_reach,
    fidelity_histogram,
    matched_cost_rmse,
    rmse,
    run_hf,
    run_mfcv,
    run_sobol,
    run_strategy,
    run_suite,
    sobol_stream,
)
from .report import read_trace, trace_csv, write_bundle

__version__ = "0.1.0"
