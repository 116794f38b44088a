"""Random-Fourier-feature prior samples and pathwise posterior samples.

A prior draw is ``f(x) = s * sqrt(2/F) * sum_i w_i cos(omega_i . x + phi_i)``
with Matérn-3/2 spectral frequencies (a 3-dof multivariate Student-t
scaled by 1/lengthscale). A posterior sample adds the kernel-weighted
correction ``K(x, X) v`` to a prior draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .kernel import KernelHyperparams, cross_kernel

DEFAULT_FEATURES = 2000
MATERN32_DOF = 3.0


@dataclass(frozen=True)
class RffPrior:
    frequencies: np.ndarray   # (F, D)
    phases: np.ndarray        # (F,)
    amplitudes: np.ndarray    # (F,)
    signal_scale: float

    @property
    def num_features(self):
        return self.frequencies.shape[0]

    @property
    def dim(self):
        return self.frequencies.shape[1]

    @property
    def _coef(self):
        return self.signal_scale * np.sqrt(2.0 / self.num_features)

    def features(self, X):
        """Unweighted feature map ``cos(X omega' + phi)``, shape (m, F)."""
        return np.cos(np.asarray(X, dtype=np.float64) @ self.frequencies.T + self.phases)

    def __call__(self, X):
        return eval_prior(self, X)


def sample_spectral_frequencies(rng, F: int, D: int, lengthscale: float) -> np.ndarray:
    """Draw F frequencies from the Matérn-3/2 spectral density in D dims."""
    z = rng.standard_normal((F, D))
    u = rng.chisquare(MATERN32_DOF, size=F)
    return z * np.sqrt(MATERN32_DOF / u)[:, None] / lengthscale


def sample_prior(hyp: KernelHyperparams, D: int, F: int = DEFAULT_FEATURES, seed=0) -> RffPrior:
    if F < 1 or D < 1:
        raise ValueError("need at least one feature and one input dimension")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    omega = sample_spectral_frequencies(rng, F, D, hyp.lengthscale)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=F)
    w = rng.standard_normal(F)
    return RffPrior(omega, phi, w, hyp.signal_scale)


def eval_prior(p: RffPrior, X_star) -> np.ndarray:
    X_star = np.atleast_2d(np.asarray(X_star, dtype=np.float64))
    if X_star.shape[1] != p.dim:
        raise ValueError(f"inputs have {X_star.shape[1]} columns, prior expects {p.dim}")
    return p._coef * (p.features(X_star) @ p.amplitudes)


def grad_prior(p: RffPrior, X_star) -> np.ndarray:
    """Input gradient of the prior draw at each row of X_star, shape (m, D)."""
    X_star = np.atleast_2d(np.asarray(X_star, dtype=np.float64))
    s = np.sin(X_star @ p.frequencies.T + p.phases)
    return -p._coef * ((s * p.amplitudes) @ p.frequencies)


def feature_covariance(p: RffPrior, X, X_prime) -> np.ndarray:
    """Covariance of this draw over its Gaussian amplitudes.

    ``E_w[f(x) f(x')] = s^2 (2/F) sum_i cos(omega_i.x + phi_i) cos(omega_i.x' + phi_i)``,
    the kernel implied by the draw's frequencies and phases.
    """
    return p._coef ** 2 * (p.features(X) @ p.features(X_prime).T)


def build_sample_rhs(p: RffPrior, X, noise_scale: float, seed=0) -> np.ndarray:
    """Right-hand side ``f(X) + eps`` of a posterior sample system."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    eps = rng.standard_normal(X.shape[0]) * noise_scale
    return eval_prior(p, X) + eps


@dataclass
class PosteriorSample:
    prior: RffPrior | None
    X_train: np.ndarray
    weights: np.ndarray
    hyp: KernelHyperparams

    def __post_init__(self):
        self.X_train = np.ascontiguousarray(self.X_train, dtype=np.float64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.X_train.shape[0],):
            raise ValueError(
                f"{self.weights.shape[0]} weights for {self.X_train.shape[0]} training inputs")

    def evaluate(self, X_star):
        return eval_posterior(self, X_star)

    def gradient(self, X_star):
        return grad_posterior(self, X_star)

    def value_and_grad(self, P):
        return value_and_grad_posterior(self, P)


def eval_posterior(s: PosteriorSample, X_star) -> np.ndarray:
    X_star = np.atleast_2d(np.asarray(X_star, dtype=np.float64))
    out = cross_kernel(X_star, s.X_train, s.hyp) @ s.weights
    if s.prior is not None:
        out += eval_prior(s.prior, X_star)
    return out


def grad_posterior(s: PosteriorSample, x_star) -> np.ndarray:
    """Analytic input-gradient of the posterior sample.

    Accepts one point (D,) or a batch (m, D) and returns the same shape.
    """
    x = np.asarray(x_star, dtype=np.float64)
    single = x.ndim == 1
    P = np.ascontiguousarray(np.atleast_2d(x))
    _, g = _backend.matern32_cross_grad(P, s.X_train, s.weights,
                                        s.hyp.lengthscale, s.hyp.signal_var)
    if s.prior is not None:
        g = g + grad_prior(s.prior, P)
    return g[0] if single else g


def value_and_grad_posterior(s: PosteriorSample, P):
    P = np.ascontiguousarray(np.atleast_2d(np.asarray(P, dtype=np.float64)))
    vals, g = _backend.matern32_cross_grad(P, s.X_train, s.weights,
                                           s.hyp.lengthscale, s.hyp.signal_var)
    if s.prior is not None:
        vals = vals + eval_prior(s.prior, P)
        g = g + grad_prior(s.prior, P)
    return vals, g
