"""Triangularized orthogonalization-free eigensolvers for the lowest eigenpairs
of a symmetric matrix."""

__version__ = "0.1.0"

from .directions import DirectionKind, eval_f1, eval_f2, g1, g2, grad_f1, grad_f2
from .exceptions import (ConfigError, DegeneratePolynomialError, DimensionError,
                         DivergenceError, EigenConvergenceError, RateFitError,
                         SingularBlockError, TriOFMError)
from .linalg import (BlockVector, MatrixOperator, apply_operator, random_orthogonal,
                     random_unit_columns, small_gen_eig, small_sym_eig, triu_small)
from .linesearch import CubicPoly, StepsizeStrategy, fixed_stepsize, solve_cubic_select
from .metrics import ReferenceEigen, e_val, e_vec, fit_rate, nnz_thresholded
from .problems import (DftSpec, HubbardSpec, SpectrumSpec, build_dft, build_hubbard,
                       build_random, enumerate_fci_basis)
from .solver import ConvergenceTrace, SolveResult, SolverConfig, rayleigh_ritz_residual, solve

__all__ = [
    "DirectionKind", "eval_f1", "eval_f2", "g1", "g2", "grad_f1", "grad_f2",
    "ConfigError", "DegeneratePolynomialError", "DimensionError", "DivergenceError",
    "EigenConvergenceError", "RateFitError", "SingularBlockError", "TriOFMError",
    "BlockVector", "MatrixOperator", "apply_operator", "random_orthogonal",
    "random_unit_columns", "small_gen_eig", "small_sym_eig", "triu_small",
    "CubicPoly", "StepsizeStrategy", "fixed_stepsize", "solve_cubic_select",
    "ReferenceEigen", "e_val", "e_vec", "fit_rate", "nnz_thresholded",
    "DftSpec", "HubbardSpec", "SpectrumSpec", "build_dft", "build_hubbard", "build_random",
    "enumerate_fci_basis",
    "ConvergenceTrace", "SolveResult", "SolverConfig", "rayleigh_ritz_residual", "solve",
]
