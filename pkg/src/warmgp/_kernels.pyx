# cython: language_level=3
"""Compiled Matérn-3/2 kernels and pivoted Cholesky.

Mirrors ``_kernels_py`` function for function; see that module for the
reference semantics.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

cdef double SQRT3 = 1.7320508075688772


cdef inline double _dist(const double* x, const double* y, Py_ssize_t D) noexcept nogil:
    cdef double acc = 0.0, d
    cdef Py_ssize_t k
    for k in range(D):
        d = x[k] - y[k]
        acc += d * d
    return sqrt(acc)


def matern32_cross(const double[:, ::1] A, const double[:, ::1] B,
                   double lengthscale, double variance):
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], D = A.shape[1]
    cdef Py_ssize_t i, j
    cdef double a = SQRT3 / lengthscale, s
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] K = out
    if B.shape[1] != D:
        raise ValueError("dimension mismatch")
    with nogil:
        for i in range(m):
            for j in range(n):
                s = a * _dist(&A[i, 0], &B[j, 0], D)
                K[i, j] = variance * (1.0 + s) * exp(-s)
    return out


def matern32_gram(const double[:, ::1] X, double lengthscale, double variance):
    cdef Py_ssize_t n = X.shape[0], D = X.shape[1]
    cdef Py_ssize_t i, j
    cdef double a = SQRT3 / lengthscale, s, v
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] K = out
    with nogil:
        for i in range(n):
            K[i, i] = variance
            for j in range(i + 1, n):
                s = a * _dist(&X[i, 0], &X[j, 0], D)
                v = variance * (1.0 + s) * exp(-s)
                K[i, j] = v
                K[j, i] = v
    return out


def matern32_cross_grad(const double[:, ::1] P, const double[:, ::1] X,
                        const double[::1] w, double lengthscale, double variance):
    cdef Py_ssize_t m = P.shape[0], n = X.shape[0], D = P.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double a = SQRT3 / lengthscale, a2 = a * a, r, e, acc
    if X.shape[1] != D or w.shape[0] != n:
        raise ValueError("shape mismatch")
    vals = np.zeros(m, dtype=np.float64)
    grads = np.zeros((m, D), dtype=np.float64)
    cdef double[::1] V = vals
    cdef double[:, ::1] G = grads
    with nogil:
        for i in range(m):
            acc = 0.0
            for j in range(n):
                r = a * _dist(&P[i, 0], &X[j, 0], D)
                e = exp(-r) * w[j]
                acc += (1.0 + r) * e
                for k in range(D):
                    G[i, k] -= a2 * e * (P[i, k] - X[j, k])
            V[i] = variance * acc
            for k in range(D):
                G[i, k] *= variance
    return vals, grads


def pivoted_cholesky(const double[:, ::1] H, Py_ssize_t rank, double floor):
    cdef Py_ssize_t n = H.shape[0]
    cdef Py_ssize_t k, i, j, p
    cdef double best, piv, acc
    if rank > n:
        rank = n
    diag = np.ascontiguousarray(np.diagonal(np.asarray(H)), dtype=np.float64).copy()
    L = np.zeros((n, rank), dtype=np.float64)
    cdef double[::1] d = diag
    cdef double[:, ::1] Lv = L
    cdef Py_ssize_t achieved = 0
    with nogil:
        for k in range(rank):
            p = 0
            best = d[0]
            for i in range(1, n):
                if d[i] > best:
                    best = d[i]
                    p = i
            if best <= floor:
                break
            piv = sqrt(best)
            for i in range(n):
                acc = H[i, p]
                for j in range(k):
                    acc -= Lv[i, j] * Lv[p, j]
                Lv[i, k] = acc / piv
            for i in range(n):
                d[i] -= Lv[i, k] * Lv[i, k]
            d[p] = 0.0
            achieved = k + 1
    return L[:, :achieved].copy()
