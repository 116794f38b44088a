"""Matérn-3/2 kernel, covariance matrices and blocked system extension."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class KernelHyperparams:
    lengthscale: float
    signal_scale: float = 1.0
    noise_scale: float = 1e-3

    def __post_init__(self):
        for name in ("lengthscale", "signal_scale", "noise_scale"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def signal_var(self):
        return self.signal_scale ** 2

    @property
    def noise_var(self):
        return self.noise_scale ** 2

    def to_log(self):
        return np.log([self.lengthscale, self.signal_scale, self.noise_scale])

    @classmethod
    def from_log(cls, theta):
        l, s, n = np.exp(np.asarray(theta, dtype=np.float64))
        return cls(float(l), float(s), float(n))


@dataclass(frozen=True)
class CovarianceMatrix:
    """H = K(X, X) + noise_var * I together with its inputs."""
    H: np.ndarray
    hyp: KernelHyperparams
    X: np.ndarray

    @property
    def n(self):
        return self.H.shape[0]


@dataclass(frozen=True)
class BlockedSystem:
    H11: np.ndarray
    H12: np.ndarray
    H22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    @property
    def n1(self):
        return self.H11.shape[0]

    @property
    def n2(self):
        return self.H22.shape[0]

    @property
    def b(self):
        return np.concatenate([self.b1, self.b2])

    def assemble(self) -> np.ndarray:
        return np.block([[self.H11, self.H12], [self.H12.T, self.H22]])


def _as2d(X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return X


def matern32(x, x_prime, hyp: KernelHyperparams) -> float:
    x = np.asarray(x, dtype=np.float64)
    x_prime = np.asarray(x_prime, dtype=np.float64)
    if x.shape != x_prime.shape:
        raise ValueError("dimension mismatch")
    r = max(float(np.sqrt(np.sum((x - x_prime) ** 2))), 0.0)
    s = SQRT3 * r / hyp.lengthscale
    return hyp.signal_var * (1.0 + s) * np.exp(-s)


def cross_kernel(X_star, X, hyp: KernelHyperparams) -> np.ndarray:
    """K(X_star, X) without any noise term."""
    return _backend.matern32_cross(_as2d(X_star), _as2d(X), hyp.lengthscale, hyp.signal_var)


def gram_matrix(X, hyp: KernelHyperparams) -> CovarianceMatrix:
    X = _as2d(X)
    H = _backend.matern32_gram(X, hyp.lengthscale, hyp.signal_var)
    H[np.diag_indices_from(H)] += hyp.noise_var
    return CovarianceMatrix(H, hyp, X)


def extend_system(prev: CovarianceMatrix, X2, b1, b2) -> BlockedSystem:
    """Grow ``prev`` by the rows of X2, reusing its matrix as the H11 block."""
    b1 = np.asarray(b1, dtype=np.float64)
    b2 = np.asarray(b2, dtype=np.float64)
    X2 = np.asarray(X2, dtype=np.float64).reshape(-1, prev.X.shape[1])
    if b1.shape != (prev.n,):
        raise ValueError(f"b1 has shape {b1.shape}, expected ({prev.n},)")
    if b2.shape != (X2.shape[0],):
        raise ValueError(f"b2 has shape {b2.shape}, expected ({X2.shape[0]},)")
    if X2.shape[0] == 0:
        return BlockedSystem(prev.H, np.empty((prev.n, 0)), np.empty((0, 0)), b1, b2)
    H12 = cross_kernel(prev.X, X2, prev.hyp)
    H22 = gram_matrix(X2, prev.hyp).H
    return BlockedSystem(prev.H, H12, H22, b1, b2)


def extend_covariance(prev: CovarianceMatrix, X2) -> CovarianceMatrix:
    """Covariance matrix of ``[prev.X; X2]`` built from the blocks of ``prev``."""
    X2 = _as2d(X2)
    n1 = prev.n
    sys = extend_system(prev, X2, np.zeros(n1), np.zeros(X2.shape[0]))
    return CovarianceMatrix(sys.assemble(), prev.hyp, np.vstack([prev.X, X2]))
