"""SVD-free, differentiable estimates of rank, Schatten norms and low-rank penalties.

Everything is built from matrix products: an iterative pseudo-inverse, a
coupled Newton-Schulz square root and Gaussian probing. Results live on a
small reverse-mode tape so they can be used as loss terms.
"""

__version__ = "0.1.0"

from .autodiff import Tape, Var, gradient
from .densemat import ContractError, GaussianSampler, ShapeError, sample_gaussian_block
from .estimator import (EstimateReport, EstimatorConfig, estimate, nuclear_estimate, rank_estimate,
                        schatten_p_estimate)
from .iterops import IterConfig, approx_half_power, approx_project, approx_pseudo_inverse, approx_root
from .oracle import exact_hsum, exact_pinv, exact_rank, exact_schatten, jacobi_svd, singular_values
from .relaxation import (ExpansionCoefficients, expand, generalized_lrr, laguerre_expansion, laplace,
                         nuclear, read_coefficients, taylor_expansion, write_coefficients)
from .solvers import (CompletionProblem, DivergenceError, OptimizerConfig, SeparationProblem, SolveReport,
                      solve_completion, solve_denoising, solve_separation)

__all__ = [
    "Tape", "Var", "gradient",
    "ContractError", "ShapeError", "GaussianSampler", "sample_gaussian_block",
    "EstimateReport", "EstimatorConfig", "estimate", "nuclear_estimate", "rank_estimate",
    "schatten_p_estimate",
    "IterConfig", "approx_half_power", "approx_project", "approx_pseudo_inverse", "approx_root",
    "exact_hsum", "exact_pinv", "exact_rank", "exact_schatten", "jacobi_svd", "singular_values",
    "ExpansionCoefficients", "expand", "generalized_lrr", "laguerre_expansion", "laplace", "nuclear",
    "read_coefficients", "taylor_expansion", "write_coefficients",
    "CompletionProblem", "DivergenceError", "OptimizerConfig", "SeparationProblem", "SolveReport",
    "solve_completion", "solve_denoising", "solve_separation",
]
