"""Iterative solvers for SPD systems ``H v = b`` with cold or warm starts.

Three methods share one contract: start from an initial weight vector,
record the true relative residual ``||H v - b|| / ||b||`` after every
iteration, and stop at the tolerance or the iteration cap, whichever
comes first.

* ``cg``  -- preconditioned conjugate gradients; one iteration is one
  Krylov step.
* ``sgd`` -- stochastic gradient descent with heavy-ball momentum on
  ``J(v) = v'Hv/2 - v'b``; one iteration is one mini-batch update.
* ``ap``  -- alternating projections (block Gauss-Seidel); one iteration
  is one exact block solve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import _backend
from .errors import DivergenceError, NotPositiveDefiniteError

METHODS = ("cg", "sgd", "ap")

# Per-solver iteration caps with roughly equal runtime, keyed by budget name.
BUDGETS = {
    "small": {"cg": 5, "sgd": 120, "ap": 30},
    "large": {"cg": 25, "sgd": 600, "ap": 150},
}


@dataclass(frozen=True)
class SolverConfig:
    method: str = "cg"
    tolerance: float = 0.01
    max_iters: int = 1000
    learning_rate: float = 0.3
    momentum: float = 0.9
    batch_size: int = 100
    block_size: int = 100
    precond_rank: int = 100
    # Diagonal shift of the preconditioner LL' + shift*I; None estimates it
    # from the residual diagonal of the partial factorization.
    precond_shift: float | None = None
    ap_order: str = "cyclic"
    divergence_threshold: float = 1e3
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.block_size < 1:
            raise ValueError("learning_rate, batch_size and block_size must be positive")
        if self.precond_rank < 0:
            raise ValueError("precond_rank must be nonnegative")
        if self.ap_order not in ("cyclic", "greedy"):
            raise ValueError("ap_order must be 'cyclic' or 'greedy'")

    def with_budget(self, budget: str) -> "SolverConfig":
        return replace(self, max_iters=BUDGETS[budget][self.method])


@dataclass(frozen=True)
class Initialization:
    kind: str = "cold"
    u1: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("cold", "warm"):
            raise ValueError(f"unknown initialization kind {self.kind!r}")
        if self.kind == "warm" and self.u1 is None:
            raise ValueError("warm initialization needs u1")

    @classmethod
    def cold(cls):
        return cls("cold")

    @classmethod
    def warm(cls, u1):
        return cls("warm", np.asarray(u1, dtype=np.float64))


@dataclass
class SolveResult:
    v: np.ndarray
    iterations: int
    residual_history: np.ndarray
    converged: bool
    method: str = ""

    @property
    def final_residual(self):
        return float(self.residual_history[-1])


def init_weights(init: Initialization, n1: int, n2: int) -> np.ndarray:
    """Expand an initialization to a full weight vector of length n1 + n2."""
    if init.kind == "cold":
        return np.zeros(n1 + n2)
    u1 = np.asarray(init.u1, dtype=np.float64)
    if u1.shape != (n1,):
        raise ValueError(f"warm start u1 has shape {u1.shape}, expected ({n1},)")
    return np.concatenate([u1, np.zeros(n2)])


def _initial_vector(init: Initialization, n: int) -> np.ndarray:
    if init.kind == "cold":
        return np.zeros(n)
    n1 = np.shape(init.u1)[0]
    if n1 > n:
        raise ValueError(f"warm start has {n1} weights but the system has {n} unknowns")
    return init_weights(init, n1, n - n1)


def relative_residual(H, v, b) -> float:
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        raise ValueError("relative residual is undefined for b = 0")
    return float(np.linalg.norm(H @ v - b) / bnorm)


def quadratic_objective(H, v, b) -> float:
    return float(0.5 * v @ (H @ v) - v @ b)


def _prepare(H, b):
    H = np.ascontiguousarray(H, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or b.shape != (H.shape[0],):
        raise ValueError(f"incompatible shapes H{H.shape}, b{b.shape}")
    return H, b


def _zero_rhs(n, method):
    return SolveResult(np.zeros(n), 0, np.array([0.0]), True, method)


# -- preconditioning ---------------------------------------------------------

def pivoted_cholesky(H, rank: int, floor: float | None = None) -> np.ndarray:
    """Greedy diagonal-pivoted partial Cholesky factor ``L`` with ``LL' ~ H``.

    Stops early when the largest remaining diagonal drops to ``floor``
    (default ``1e-12 * max(diag(H))``), so the result may have fewer
    than ``rank`` columns.
    """
    H = np.ascontiguousarray(H, dtype=np.float64)
    n = H.shape[0]
    if rank < 0 or rank > n:
        raise ValueError(f"rank must lie in [0, {n}]")
    if floor is None:
        floor = 1e-12 * float(np.max(np.diagonal(H))) if n else 0.0
    return _backend.pivoted_cholesky(H, int(rank), float(floor))


class Preconditioner:
    """Applies ``(LL' + shift*I)^{-1}`` through the Woodbury identity."""

    def __init__(self, L, shift):
        self.L = L
        self.shift = float(shift)
        k = L.shape[1]
        if k:
            inner = self.shift * np.eye(k) + L.T @ L
            self._inner = cho_factor(inner, lower=True)

    @property
    def rank(self):
        return self.L.shape[1]

    def __call__(self, r):
        if not self.rank:
            return r.copy()
        L = self.L
        return (r - L @ cho_solve(self._inner, L.T @ r)) / self.shift


def make_preconditioner(H, cfg: SolverConfig) -> Preconditioner:
    n = H.shape[0]
    L = pivoted_cholesky(H, min(cfg.precond_rank, n))
    if cfg.precond_shift is not None:
        shift = cfg.precond_shift
    else:
        resid = np.diagonal(H) - np.einsum("ij,ij->i", L, L)
        shift = max(float(resid.mean()), 1e-10 * float(np.mean(np.diagonal(H))))
    return Preconditioner(L, shift)


# -- solvers -----------------------------------------------------------------

def cg_solve(H, b, init: Initialization, cfg: SolverConfig,
             precond: Preconditioner | None = None) -> SolveResult:
    H, b = _prepare(H, b)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return _zero_rhs(n, "cg")
    if precond is None:
        precond = make_preconditioner(H, cfg)
    v = _initial_vector(init, n)
    r = b - H @ v
    hist = [np.linalg.norm(r) / bnorm]
    converged = hist[0] <= cfg.tolerance
    it = 0
    if not converged and cfg.max_iters > 0:
        z = precond(r)
        p = z.copy()
        rz = r @ z
        while it < cfg.max_iters:
            if rz == 0:
                break
            Hp = H @ p
            pHp = p @ Hp
            if not pHp > 0:
                raise NotPositiveDefiniteError(
                    f"CG breakdown at iteration {it}: p'Hp = {pHp:.3e}")
            alpha = rz / pHp
            v += alpha * p
            r -= alpha * Hp
            it += 1
            hist.append(np.linalg.norm(b - H @ v) / bnorm)
            if hist[-1] <= cfg.tolerance:
                converged = True
                break
            z = precond(r)
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
    return SolveResult(v, it, np.asarray(hist), converged, "cg")


def _top_eigenvalue(H, iters=50):
    x = np.ones(H.shape[0]) / np.sqrt(H.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = H @ x
        lam = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            break
        x = y / nrm
    return lam


def sgd_step_normalizer(H, batch_size: int) -> float:
    """Curvature scale the SGD learning rate is measured against.

    The larger of the top eigenvalue of H (full-batch stability) and
    ``n / batch * max(diag(H))`` (stability of a single rescaled
    coordinate block when H is close to diagonal).
    """
    n = H.shape[0]
    bs = min(batch_size, n)
    return max(_top_eigenvalue(H), n / bs * float(np.max(np.diagonal(H))))


def sgd_solve(H, b, init: Initialization, cfg: SolverConfig,
              rng: np.random.Generator | None = None) -> SolveResult:
    """Mini-batch SGD with momentum.

    Each step samples a batch ``B`` of rows without replacement and uses
    ``(n/|B|) * (H[B] v - b[B])`` on those coordinates as the gradient
    estimate. The step is ``learning_rate / sgd_step_normalizer(H)``.
    """
    H, b = _prepare(H, b)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return _zero_rhs(n, "sgd")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    bs = min(cfg.batch_size, n)
    scale = n / bs
    step = cfg.learning_rate / sgd_step_normalizer(H, bs)
    gamma = cfg.momentum
    v = _initial_vector(init, n)
    m = np.zeros(n)
    hist = [np.linalg.norm(H @ v - b) / bnorm]
    best_v, best_res = v.copy(), hist[0]
    converged = hist[0] <= cfg.tolerance
    it = 0
    full = bs == n
    while not converged and it < cfg.max_iters:
        if full:
            m = gamma * m + (H @ v - b)
        else:
            idx = rng.choice(n, size=bs, replace=False)
            m *= gamma
            m[idx] += scale * (H[idx] @ v - b[idx])
        v = v - step * m
        it += 1
        res = np.linalg.norm(H @ v - b) / bnorm
        hist.append(res)
        if not np.isfinite(res) or res > cfg.divergence_threshold:
            partial = SolveResult(best_v, it, np.asarray(hist), False, "sgd")
            raise DivergenceError(
                f"SGD diverged at iteration {it} (relative residual {res:.3e})", partial)
        if res < best_res:
            best_v, best_res = v.copy(), res
        converged = res <= cfg.tolerance
    return SolveResult(v, it, np.asarray(hist), converged, "sgd")


def _blocks(n, size):
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def ap_solve(H, b, init: Initialization, cfg: SolverConfig) -> SolveResult:
    """Alternating projections over contiguous index blocks.

    Blocks are ``[0, s), [s, 2s), ...`` with a possibly shorter final
    block. ``ap_order='cyclic'`` visits them in index order;
    ``'greedy'`` picks the block with the largest residual norm.
    """
    H, b = _prepare(H, b)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return _zero_rhs(n, "ap")
    blocks = _blocks(n, min(cfg.block_size, n))
    factors = [None] * len(blocks)
    v = _initial_vector(init, n)
    r = b - H @ v
    hist = [np.linalg.norm(r) / bnorm]
    converged = hist[0] <= cfg.tolerance
    it = 0
    while not converged and it < cfg.max_iters:
        if cfg.ap_order == "cyclic":
            j = it % len(blocks)
        else:
            j = int(np.argmax([np.linalg.norm(r[s:e]) for s, e in blocks]))
        s, e = blocks[j]
        if factors[j] is None:
            try:
                factors[j] = cho_factor(H[s:e, s:e], lower=True)
            except LinAlgError as exc:
                raise NotPositiveDefiniteError(
                    f"block [{s}, {e}) is not positive definite") from exc
        v[s:e] += cho_solve(factors[j], r[s:e])
        r = b - H @ v
        it += 1
        hist.append(np.linalg.norm(r) / bnorm)
        converged = hist[-1] <= cfg.tolerance
    return SolveResult(v, it, np.asarray(hist), converged, "ap")


SOLVERS = {"cg": cg_solve, "sgd": sgd_solve, "ap": ap_solve}


def rhs_seed(seed: int, index: int):
    """Seed for right-hand side ``index``; index 0 reuses ``seed`` itself."""
    return seed if index == 0 else [seed, index]


def solve_one(H, b, init: Initialization, cfg: SolverConfig, **kw) -> SolveResult:
    return SOLVERS[cfg.method](H, b, init, cfg, **kw)


def solve(H, B_rhs, inits, cfg: SolverConfig, on_divergence: str = "raise") -> list[SolveResult]:
    """Solve ``H V = B_rhs`` column by column.

    ``inits`` is one Initialization per column (a single one is broadcast).
    With ``on_divergence='keep'`` a diverged SGD column contributes the
    best iterate seen before divergence instead of raising.
    """
    H = np.ascontiguousarray(H, dtype=np.float64)
    B_rhs = np.asarray(B_rhs, dtype=np.float64)
    if B_rhs.ndim == 1:
        B_rhs = B_rhs[:, None]
    if B_rhs.shape[0] != H.shape[0]:
        raise ValueError(f"right-hand sides have {B_rhs.shape[0]} rows, H has {H.shape[0]}")
    k = B_rhs.shape[1]
    if isinstance(inits, Initialization):
        inits = [inits] * k
    if len(inits) != k:
        raise ValueError(f"{len(inits)} initializations for {k} right-hand sides")

    kw = {}
    if cfg.method == "cg":
        kw["precond"] = make_preconditioner(H, cfg)
    out = []
    for i in range(k):
        if cfg.method == "sgd":
            kw["rng"] = np.random.default_rng(rhs_seed(cfg.seed, i))
        try:
            out.append(solve_one(H, B_rhs[:, i], inits[i], cfg, **kw))
        except DivergenceError as exc:
            if on_divergence != "keep" or exc.result is None:
                raise
            out.append(exc.result)
    return out
