"""Macroscopic (mean-field) equations: solvers, criticality and recovery thresholds."""

from .core import Branch, FixedPointSpec, MacroState, MeConfig, MeConvergenceError, QuadratureSpec
from .critical import (CriticalPoint, Direction, EtaOptimum, PerturbationResult, Stability,
                       critical_point_scan, grid_search_optimal_eta, perturbation_check)
from .finite import branch_density_moments, potential, solve_me_finite_as
from .infinite import solve_me_infinite_as
from .lasso_me import solve_me_lasso
from .thresholds import l0_threshold, l1_weak_threshold

__all__ = [
    "Branch", "FixedPointSpec", "MacroState", "MeConfig", "MeConvergenceError", "QuadratureSpec",
    "CriticalPoint", "Direction", "EtaOptimum", "PerturbationResult", "Stability",
    "critical_point_scan", "grid_search_optimal_eta", "perturbation_check",
    "branch_density_moments", "potential", "solve_me_finite_as",
    "solve_me_infinite_as", "solve_me_lasso", "l0_threshold", "l1_weak_threshold",
]
