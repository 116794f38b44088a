"""Warm-started iterative linear solvers for Gaussian process posteriors
on growing datasets."""

from ._backend import BACKEND
from .analysis import (DistanceReport, exact_solve, mll, optimize_mll, rkhs_distance,
                       schur_complement, warm_start_report)
from .dataset import Dataset, SequentialSplit, load_csv, sample_split, standardize
from .errors import DatasetError, DivergenceError, NotPositiveDefiniteError, WarmGPError
from .kernel import (BlockedSystem, CovarianceMatrix, KernelHyperparams, cross_kernel,
                     extend_system, gram_matrix, matern32)
from .sampling import (PosteriorSample, RffPrior, eval_posterior, eval_prior, grad_posterior,
                       sample_prior)
from .solvers import BUDGETS, Initialization, SolveResult, SolverConfig, solve, solve_one
from .thompson import BoConfig, TrialRecord, run_bo

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BUDGETS", "BlockedSystem", "BoConfig", "CovarianceMatrix", "Dataset",
    "DatasetError", "DistanceReport", "DivergenceError", "WarmGPError", "Initialization",
    "KernelHyperparams", "NotPositiveDefiniteError", "PosteriorSample", "RffPrior",
    "SequentialSplit", "SolveResult", "SolverConfig", "TrialRecord", "cross_kernel",
    "eval_posterior", "eval_prior", "exact_solve", "extend_system", "grad_posterior",
    "gram_matrix", "load_csv", "matern32", "mll", "optimize_mll", "rkhs_distance",
    "run_bo", "sample_prior", "sample_split", "schur_complement", "solve", "solve_one",
    "standardize", "warm_start_report",
]
