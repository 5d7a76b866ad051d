"""Fixed-point solver for quasi-linear elliptic PDEs with Cauchy boundary data.

The equation ``div(A grad u) + F(x, u, grad u) = 0`` with both Dirichlet
and Neumann data on the whole boundary is solved by iterating a
Carleman-weighted, regularized least-squares (quasi-reversibility) map
whose fixed point is the solution.  No initial guess is required.
"""

from .driver import DriverConfig, IterationTrace, contraction_ratio, fixed_point_solve, initial_guess
from .estimator import CarlemanContractionSolver
from .grid import (DiffusionField, Grid, ScalarField, div_a_grad, gradient,
                   l2_norm, normal_flux)
from .nonlinearity import ZERO, NonlinearityEvalError, NonlinearitySpec, chi_m, eval_f
from .problems import (NoiseModel, PROBLEM_NAMES, ProblemSpec, error_report,
                       make_problem, make_test, sample_cauchy_data)
from .qrm import LinearSystem, QrmConfig, QrmOperator, SolverError, assemble, phi_step, solve_qrm
from .weights import CarlemanParams, WeightDomainError, h_lambda_beta_norm, mu, weight_field

__version__ = "0.1.0"

__all__ = [
    "CarlemanContractionSolver",
    "CarlemanParams",
    "DiffusionField",
    "DriverConfig",
    "Grid",
    "IterationTrace",
    "LinearSystem",
    "NoiseModel",
    "NonlinearityEvalError",
    "NonlinearitySpec",
    "PROBLEM_NAMES",
    "ProblemSpec",
    "QrmConfig",
    "QrmOperator",
    "ScalarField",
    "SolverError",
    "WeightDomainError",
    "ZERO",
    "assemble",
    "chi_m",
    "contraction_ratio",
    "div_a_grad",
    "error_report",
    "eval_f",
    "fixed_point_solve",
    "gradient",
    "h_lambda_beta_norm",
    "initial_guess",
    "l2_norm",
    "make_problem",
    "make_test",
    "mu",
    "normal_flux",
    "phi_step",
    "sample_cauchy_data",
    "solve_qrm",
    "weight_field",
]
