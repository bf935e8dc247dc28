"""Sparse multivariate regression with a jointly estimated response graph.

Fits the coefficient matrix B of ``Y = X B + E`` together with the
sparsity pattern of the noise precision matrix, by per-response adaptive
Lasso regressions on the covariates and the other responses (aMCR).  A
separate-estimation baseline (SEP), BIC tuning, a seeded simulator and
support-recovery metrics are included.
"""
__version__ = "0.1.0"

from .baselines import SepFit, fit_sep, tune_sep
from .lasso import (ConvergenceError, LassoProblem, SolverConfig, kkt_check,
                    solve_weighted_lasso)
from .mcr import (FitError, InitialFit, McrFit, PrecisionPattern, build_augmented_design,
                  compute_adaptive_weights, fit_initial_separate, fit_mcr,
                  reconstruct_precision, symmetrize_pattern, tune_amcr)
from .simgen import Dataset, GroundTruth, ModelSpec, gen_dataset, gen_precision, preset
from .tuning import TuningError, TuningGrid, TuningResult, default_grid, grid_search

__all__ = [
    "ConvergenceError", "Dataset", "FitError", "GroundTruth", "InitialFit", "LassoProblem",
    "McrFit", "ModelSpec", "PrecisionPattern", "SepFit", "SolverConfig", "TuningError",
    "TuningGrid", "TuningResult", "build_augmented_design", "compute_adaptive_weights",
    "default_grid", "fit_initial_separate", "fit_mcr", "fit_sep", "gen_dataset",
    "gen_precision", "grid_search", "kkt_check", "preset", "reconstruct_precision",
    "solve_weighted_lasso", "symmetrize_pattern", "tune_amcr", "tune_sep",
]
