"""Piecewise-affine regularization for quantized estimation.

A piecewise-affine regularizer (PAR) is a continuous piecewise-linear penalty
whose kinks sit at a set of quantization levels. Adding it to a smooth loss
drives most coordinates of a critical point exactly onto those levels.
"""

from .losses import (CompositeProblem, LeastSquaresLoss, LogisticLoss, lipschitz_bound,
                     loss_eval, objective)
from .par import (FAMILIES, ParSpec, QuantizationReport, SubgradInterval, build_par,
                  integer_convex_par, nearest_level, nonconvex_par, par_approx_classic,
                  par_subdifferential, par_value, quantization_rate, quasiconvex_par)
from .prox import ProxResult, prox_oracle, prox_scalar, prox_table, prox_vector
from .solvers import (CriticalityReport, IterateTrace, LineSearchError, SolverConfig,
                      accelerated_proximal_gradient, admm, check_criticality,
                      proximal_gradient)
from .statbench import (ErrorReport, HalfPowerPenalty, RegressionDataset, RidgePenalty,
                        SyntheticSpec, error_report, gen_dataset, lasso_lambda_bound,
                        load_dataset, prox_half_power, recommended_ridge_lambda,
                        ridge_closed_form, save_dataset)

__version__ = "0.1.0"

__all__ = [
    "FAMILIES", "ParSpec", "QuantizationReport", "SubgradInterval", "build_par",
    "integer_convex_par", "nearest_level", "nonconvex_par", "par_approx_classic",
    "par_subdifferential", "par_value", "quantization_rate", "quasiconvex_par",
    "ProxResult", "prox_oracle", "prox_scalar", "prox_table", "prox_vector",
    "CompositeProblem", "LeastSquaresLoss", "LogisticLoss", "lipschitz_bound", "loss_eval",
    "objective", "CriticalityReport", "IterateTrace", "LineSearchError", "SolverConfig",
    "accelerated_proximal_gradient", "admm", "check_criticality", "proximal_gradient",
    "ErrorReport", "RegressionDataset", "SyntheticSpec", "error_report", "gen_dataset",
    "recommended_ridge_lambda", "ridge_closed_form", "lasso_lambda_bound", "prox_half_power",
    "RidgePenalty", "HalfPowerPenalty", "save_dataset", "load_dataset",
]
