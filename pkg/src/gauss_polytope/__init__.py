"""Gaussian probabilities of polytopes via a discretized dynamic program."""

from .dp import (ErrorBudget, SolveReport, ValueTable, backward_step, error_bound,
                 parameters_for, solve, terminal_values)
from .grid import Box, Grid, GridBudgetError, alpha_for, build_box, build_grid, project
from .kernel import (TransitionRow, gaussian_tail_bound, std_normal_cdf,
                     transition_row)
from .oracle import McResult, mc_estimate, quadrature_estimate
from .preprocess import (GaussianSpec, PolytopeProblem, normalize_last_column,
                         standardize, whiten)
from .smoothing import (LipschitzLedger, SmoothingParams, g_eval,
                        in_smoothing_region, lipschitz_h_tilde, lipschitz_J_tilde)

__all__ = [
    "Box", "ErrorBudget", "GaussianSpec", "Grid", "GridBudgetError",
    "LipschitzLedger", "McResult", "PolytopeProblem", "SmoothingParams",
    "SolveReport", "TransitionRow", "ValueTable", "alpha_for", "backward_step",
    "build_box", "build_grid", "error_bound", "g_eval", "gaussian_tail_bound",
    "in_smoothing_region", "lipschitz_J_tilde", "lipschitz_h_tilde",
    "mc_estimate", "normalize_last_column", "parameters_for", "project",
    "quadrature_estimate", "solve", "standardize", "std_normal_cdf",
    "terminal_values", "transition_row", "whiten",
]
