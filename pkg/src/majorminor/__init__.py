"""Major-minor mean-field games with optimal-stopping (or control) minor players.

Regularized equilibria are computed by damped fixed-point iteration; relaxed
equilibria are approached by annealing the entropy weight to zero and are
checked by an independent certificate.
"""
__version__ = "0.1.0"

from .builtins import builtin_names, builtin_scenarios, get_builtin
from .equilibrium import (Certificate, EquilibriumReport, SolveConfig, anneal_to_relaxed,
                          nonconvexity_regression, phi_lambda_step, solve_regularized_equilibrium, verify)
from .errors import (CapacityError, DimensionMismatch, FeatureOutOfRange, InfeasibleFlow, MajorMinorError,
                     MassMismatch, NonFiniteValue, NotConverged, NumericalFailure, ParseError, ShapeMismatch,
                     ValidationError)
from .flows import MajorMarginal, MeanField, OccupationFlow
from .major import MajorPolicy, solve_regularized, solve_unregularized
from .meanfield import consistency_residual, disintegrate, flow_distance, marginal_law, reconstruct
from .minor import best_response_gap, lp_best_response, solve_dp
from .paths import PathSpace, build_path_space
from .scenario import ActionSpace, AffineTable, FeatureMap, Scenario, evaluate_kernel, load_scenario

__all__ = [
    "ActionSpace", "AffineTable", "CapacityError", "Certificate", "DimensionMismatch", "EquilibriumReport",
    "FeatureMap", "FeatureOutOfRange", "InfeasibleFlow", "MajorMarginal", "MajorMinorError", "MajorPolicy",
    "MassMismatch", "MeanField", "NonFiniteValue", "NotConverged", "NumericalFailure", "OccupationFlow",
    "ParseError", "PathSpace", "Scenario", "ShapeMismatch", "SolveConfig", "ValidationError",
    "anneal_to_relaxed", "best_response_gap", "build_path_space", "builtin_names", "builtin_scenarios",
    "consistency_residual", "disintegrate", "evaluate_kernel", "flow_distance", "get_builtin",
    "load_scenario", "lp_best_response", "marginal_law", "nonconvexity_regression", "phi_lambda_step",
    "reconstruct", "solve_dp", "solve_regularized", "solve_regularized_equilibrium", "solve_unregularized",
    "verify",
]
