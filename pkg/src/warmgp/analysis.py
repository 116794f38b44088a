"""Direct-solve oracle, initial-distance diagnostics and MLL fitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .errors import NotPositiveDefiniteError
from .kernel import BlockedSystem, KernelHyperparams, cross_kernel, gram_matrix

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


def cholesky(H):
    try:
        return cho_factor(np.asarray(H, dtype=np.float64), lower=True)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc


def exact_solve(H, b) -> np.ndarray:
    """Cholesky-based direct solution of ``H v = b`` (b may be a matrix)."""
    return cho_solve(cholesky(H), np.asarray(b, dtype=np.float64))


def euclidean_distance(v_init, v_exact) -> float:
    v_init = np.asarray(v_init, dtype=np.float64)
    v_exact = np.asarray(v_exact, dtype=np.float64)
    if v_init.shape != v_exact.shape:
        raise ValueError("vectors differ in length")
    return float(np.linalg.norm(v_init - v_exact))


def rkhs_distance(H, v_init, v_exact) -> float:
    """``sqrt((v - v_init)' H (v - v_init))``."""
    e = np.asarray(v_exact, dtype=np.float64) - np.asarray(v_init, dtype=np.float64)
    return float(np.sqrt(max(e @ (H @ e), 0.0)))


def rkhs_distance_from_residual(H, r_init) -> float:
    """Same distance written through the initial residual, ``sqrt(r' H^-1 r)``."""
    return float(np.sqrt(max(r_init @ exact_solve(H, r_init), 0.0)))


def schur_complement(sys: BlockedSystem) -> np.ndarray:
    """``H22 - H12' H11^-1 H12``."""
    if sys.n2 == 0:
        return np.empty((0, 0))
    W = cho_solve(cholesky(sys.H11), sys.H12)
    S = sys.H22 - sys.H12.T @ W
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class DistanceReport:
    d_euclid: float          # warm-start Euclidean distance to the solution
    d_rkhs: float            # warm-start RKHS distance to the solution
    d_cold_sq: float
    d_warm_sq: float
    identity_gap: float
    d_euclid_cold: float
    b1_quad: float           # b1' H11^-1 b1

    @property
    def rkhs_ratio(self):
        return self.d_rkhs / np.sqrt(self.d_cold_sq) if self.d_cold_sq > 0 else 0.0

    @property
    def euclid_ratio(self):
        return self.d_euclid / self.d_euclid_cold if self.d_euclid_cold > 0 else 0.0

    def identity_holds(self, rtol=1e-8):
        return abs(self.identity_gap) <= rtol * max(self.d_cold_sq, 1.0)


def warm_start_report(sys: BlockedSystem) -> DistanceReport:
    """Compare cold ``0`` and warm ``[H11^-1 b1; 0]`` starts on a blocked system.

    The warm squared distance is computed twice, as a direct quadratic
    form and through the Schur complement of H11; the identity gap
    ``d_cold^2 - d_warm^2 - b1' H11^-1 b1`` reported is the larger of
    the two in magnitude.
    """
    H = sys.assemble()
    b = sys.b
    v = exact_solve(H, b)
    f11 = cholesky(sys.H11)
    u1 = cho_solve(f11, sys.b1)
    v_warm = np.concatenate([u1, np.zeros(sys.n2)])

    d_cold_sq = float(b @ v)
    e = v - v_warm
    d_warm_direct = float(e @ (H @ e))
    if sys.n2:
        r2 = sys.b2 - sys.H12.T @ u1
        d_warm_schur = float(r2 @ exact_solve(schur_complement(sys), r2))
    else:
        d_warm_schur = 0.0
    b1_quad = float(sys.b1 @ u1)
    gaps = [d_cold_sq - d - b1_quad for d in (d_warm_direct, d_warm_schur)]
    gap = max(gaps, key=abs)
    return DistanceReport(
        d_euclid=float(np.linalg.norm(e)),
        d_rkhs=float(np.sqrt(max(d_warm_direct, 0.0))),
        d_cold_sq=d_cold_sq,
        d_warm_sq=d_warm_direct,
        identity_gap=float(gap),
        d_euclid_cold=float(np.linalg.norm(v)),
        b1_quad=b1_quad,
    )


# -- marginal likelihood -----------------------------------------------------

def _matern_pieces(X, hyp):
    """Kernel matrix and its derivative with respect to log lengthscale."""
    X = np.asarray(X, dtype=np.float64)
    K = cross_kernel(X, X, hyp)
    d = cdist(X, X)
    s = np.sqrt(3.0) * d / hyp.lengthscale
    dK_dlogl = hyp.signal_var * s * s * np.exp(-s)
    return K, dK_dlogl


def mll(X, y, hyp: KernelHyperparams):
    """Exact log marginal likelihood and its gradient in log-parameters.

    Returns ``(value, grad)`` with grad ordered as
    (log lengthscale, log signal_scale, log noise_scale).
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    K, dK_dlogl = _matern_pieces(X, hyp)
    H = K + hyp.noise_var * np.eye(n)
    c = cholesky(H)
    alpha = cho_solve(c, y)
    logdet = 2.0 * np.sum(np.log(np.diagonal(c[0])))
    value = -0.5 * y @ alpha - 0.5 * logdet - 0.5 * n * LOG_2PI

    Hinv = cho_solve(c, np.eye(n))
    A = np.outer(alpha, alpha) - Hinv
    grad = 0.5 * np.array([
        np.sum(A * dK_dlogl),
        np.sum(A * (2.0 * K)),
        np.trace(A) * 2.0 * hyp.noise_var,
    ])
    return float(value), grad


def optimize_mll(X, y, init_hyp: KernelHyperparams, steps: int = 200,
                 step_size: float = 0.1, betas=(0.9, 0.999), eps=1e-8) -> KernelHyperparams:
    """Adam ascent on the MLL over log-parameters; returns the best point seen."""
    theta = init_hyp.to_log()
    best_val, g = mll(X, y, init_hyp)
    best_theta = theta.copy()
    m = np.zeros(3)
    v = np.zeros(3)
    for t in range(1, steps + 1):
        m = betas[0] * m + (1 - betas[0]) * g
        v = betas[1] * v + (1 - betas[1]) * g * g
        mhat = m / (1 - betas[0] ** t)
        vhat = v / (1 - betas[1] ** t)
        theta = theta + step_size * mhat / (np.sqrt(vhat) + eps)
        hyp = KernelHyperparams.from_log(theta)
        try:
            val, g = mll(X, y, hyp)
        except NotPositiveDefiniteError as exc:
            raise FloatingPointError(
                f"MLL factorization failed at step {t}, theta={theta}") from exc
        if not (np.isfinite(val) and np.all(np.isfinite(g))):
            raise FloatingPointError(
                f"non-finite MLL at step {t}: value={val}, grad={g}, theta={theta}")
        if val > best_val:
            best_val, best_theta = val, theta.copy()
    log.debug("optimize_mll: best MLL %.4f at %s", best_val, np.exp(best_theta))
    return KernelHyperparams.from_log(best_theta) if steps else init_hyp


def gp_posterior_mean(X, y, X_star, hyp: KernelHyperparams) -> np.ndarray:
    """Closed-form GP mean ``K(X*, X) (K + s^2 I)^-1 y`` via a dense LU solve."""
    H = gram_matrix(X, hyp).H
    return cross_kernel(X_star, X, hyp) @ np.linalg.solve(H, y)
