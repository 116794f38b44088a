"""Shared system builders for the test modules."""

import numpy as np

from warmgp.kernel import KernelHyperparams, extend_system, gram_matrix


def matern_system(rng, n, D=3, hyp=None):
    """Random Matérn covariance matrix with a Gaussian right-hand side."""
    hyp = hyp or KernelHyperparams(0.4, 1.0, 0.2)
    X = rng.uniform(size=(n, D))
    return gram_matrix(X, hyp).H, rng.standard_normal(n)


def blocked(rng, n1, n2, D=3, hyp=None):
    hyp = hyp or KernelHyperparams(0.4, 1.0, 0.2)
    X = rng.uniform(size=(n1 + n2, D))
    b = rng.standard_normal(n1 + n2)
    return extend_system(gram_matrix(X[:n1], hyp), X[n1:], b[:n1], b[n1:])
