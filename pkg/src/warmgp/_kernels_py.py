"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the extension is tested against.
"""

import numpy as np
from scipy.spatial.distance import cdist

SQRT3 = np.sqrt(3.0)


def _distances(A, B):
    # cdist forms explicit differences, so r(x, x) is exactly 0
    return cdist(A, B, metric="euclidean")


def matern32_cross(A, B, lengthscale, variance):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise ValueError("dimension mismatch")
    s = (SQRT3 / lengthscale) * _distances(A, B)
    return variance * (1.0 + s) * np.exp(-s)


def matern32_gram(X, lengthscale, variance):
    K = matern32_cross(X, X, lengthscale, variance)
    # cdist is symmetric to rounding only; mirror the upper triangle
    iu = np.triu_indices(K.shape[0], 1)
    K.T[iu] = K[iu]
    np.fill_diagonal(K, variance)
    return K


def matern32_cross_grad(P, X, w, lengthscale, variance):
    """Value and input-gradient of ``x -> sum_j w_j k(x, X_j)`` at rows of P."""
    P = np.asarray(P, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if P.shape[1] != X.shape[1] or w.shape[0] != X.shape[0]:
        raise ValueError("shape mismatch")
    a = SQRT3 / lengthscale
    s = a * _distances(P, X)
    e = np.exp(-s) * w
    vals = variance * ((1.0 + s) * e).sum(axis=1)
    # d/dx k = -variance a^2 exp(-a r) (x - x'), finite at r = 0
    grads = -variance * a * a * (e.sum(axis=1)[:, None] * P - e @ X)
    return vals, grads


def pivoted_cholesky(H, rank, floor):
    H = np.asarray(H, dtype=np.float64)
    n = H.shape[0]
    rank = min(rank, n)
    d = np.diagonal(H).copy()
    L = np.zeros((n, rank))
    achieved = 0
    for k in range(rank):
        p = int(np.argmax(d))
        if d[p] <= floor:
            break
        L[:, k] = (H[:, p] - L[:, :k] @ L[p, :k]) / np.sqrt(d[p])
        d -= L[:, k] ** 2
        d[p] = 0.0
        achieved = k + 1
    return L[:, :achieved].copy()
