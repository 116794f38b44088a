"""Exception types raised across the package."""

import numpy as np


class WarmGPError(Exception):
    """Base class for errors raised by this package."""


class NotPositiveDefiniteError(WarmGPError, np.linalg.LinAlgError):
    """A matrix expected to be SPD failed factorization or a curvature check."""


class DivergenceError(WarmGPError, RuntimeError):
    """An iterative solver's relative residual blew past the divergence guard."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DatasetError(WarmGPError, ValueError):
    """Malformed or unusable dataset input."""
