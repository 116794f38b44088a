"""Parallel Thompson sampling with budgeted, warm- or cold-started solves.

The objective is itself a GP prior draw on ``[0, 1]^D`` and the surrogate
uses the same hyperparameters, so the only difference between paired warm
and cold runs is how each round's linear solves are initialized.

Every round:

1. absorb the previous round's acquisitions into the mean system
   ``H v = y`` and the sample systems ``H v_s = f_s(X) + eps_s``;
2. run one budgeted solve per system, warm (``[previous; 0]``) or cold;
3. form pathwise posterior samples ``f_s + K(., X)(v - v_s)``;
4. locate each sample's maximizer (candidate search, then Adam) and
   evaluate the objective there.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .kernel import CovarianceMatrix, KernelHyperparams, cross_kernel, extend_covariance, gram_matrix
from .sampling import DEFAULT_FEATURES, PosteriorSample, RffPrior, eval_prior, sample_prior
from .solvers import BUDGETS, Initialization, SolverConfig, solve

LENGTHSCALES = (0.1, 0.2, 0.3, 0.4, 0.5)

# stream ids for derived random generators
_OBJECTIVE, _DESIGN, _OBS, _PRIORS, _SAMPLE_NOISE, _PROPOSE, _SOLVER = range(1, 8)


def _rng(seed, *keys):
    return np.random.default_rng([int(seed), *keys])


@dataclass(frozen=True)
class BoConfig:
    dim: int = 3
    n_init: int = 500
    batch_size: int = 10
    n_samples: int = 10
    n_rounds: int = 10
    lengthscale: float = 0.3
    lengthscale_grid: tuple = LENGTHSCALES
    signal_scale: float = 1.0
    noise_scale: float = 1e-3
    solver: str = "cg"
    budget: str = "small"
    init_mode: str = "warm"
    tolerance: float = 1e-6
    num_features: int = DEFAULT_FEATURES
    num_candidates: int = 1000
    num_proposals: int = 3
    ascent_steps: int = 100
    ascent_lr: float | None = None
    explore_fraction: float = 0.1
    temperature: float | None = None
    seed: int = 0

    def __post_init__(self):
        counts = ("dim", "n_init", "batch_size", "n_samples", "num_features",
                  "num_candidates", "num_proposals")
        for name in counts:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_rounds < 0 or self.ascent_steps < 0:
            raise ValueError("n_rounds and ascent_steps must be nonnegative")
        if self.batch_size > self.n_samples:
            raise ValueError("batch_size cannot exceed n_samples (one acquisition per sample)")
        if not any(math.isclose(self.lengthscale, l) for l in self.lengthscale_grid):
            raise ValueError(f"lengthscale {self.lengthscale} not in grid {self.lengthscale_grid}")
        if self.init_mode not in ("warm", "cold"):
            raise ValueError("init_mode must be 'warm' or 'cold'")
        if self.budget not in BUDGETS:
            raise ValueError(f"unknown budget {self.budget!r}")
        if self.solver not in BUDGETS[self.budget]:
            raise ValueError(f"unknown solver {self.solver!r}")

    @property
    def hyp(self):
        return KernelHyperparams(self.lengthscale, self.signal_scale, self.noise_scale)

    @property
    def max_iters(self):
        return BUDGETS[self.budget][self.solver]

    def solver_config(self, round_index=0) -> SolverConfig:
        return SolverConfig(
            method=self.solver, tolerance=self.tolerance, max_iters=self.max_iters,
            seed=int(_rng(self.seed, _SOLVER, round_index).integers(2 ** 31)))


@dataclass(frozen=True)
class Objective:
    """Deterministic GP-prior draw ``g`` with Gaussian observation noise."""
    prior: RffPrior
    noise_scale: float

    def value(self, X):
        return eval_prior(self.prior, X)

    def observe(self, X, rng):
        g = self.value(X)
        return g + self.noise_scale * rng.standard_normal(g.shape[0])


@dataclass
class TrialRecord:
    round: int
    best_value: float
    mean_residual: float
    avg_sample_residual: float
    wall_clock: float
    mean_iterations: int = 0
    max_sample_iterations: int = 0


@dataclass
class BoState:
    X_obs: np.ndarray
    y_obs: np.ndarray
    cov: CovarianceMatrix
    mean_weights: np.ndarray
    sample_weights: np.ndarray      # (n, n_samples)
    priors: list
    noise_draws: np.ndarray         # (n, n_samples), persisted per point
    objective: Objective
    round: int = 0
    pending_X: np.ndarray | None = None
    pending_y: np.ndarray | None = None
    # weights each system started from in the latest round, for inspection
    round_start_weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.X_obs.shape[0]

    def sample_rhs(self):
        F = np.column_stack([eval_prior(p, self.X_obs) for p in self.priors])
        return F + self.noise_draws


def make_objective(D: int, hyp: KernelHyperparams, seed, num_features: int = DEFAULT_FEATURES):
    prior = sample_prior(hyp, D, num_features, seed=_rng(seed, _OBJECTIVE))
    return Objective(prior, hyp.noise_scale)


def init_design(D: int, n_init: int, seed) -> np.ndarray:
    """Scrambled Halton points in the unit hypercube."""
    return qmc.Halton(d=D, scramble=True, seed=_rng(seed, _DESIGN)).random(n_init)


def init_state(cfg: BoConfig) -> BoState:
    objective = make_objective(cfg.dim, cfg.hyp, cfg.seed, cfg.num_features)
    X = init_design(cfg.dim, cfg.n_init, cfg.seed)
    y = objective.observe(X, _rng(cfg.seed, _OBS, 0))
    prior_rng = _rng(cfg.seed, _PRIORS)
    priors = [sample_prior(cfg.hyp, cfg.dim, cfg.num_features, seed=prior_rng)
              for _ in range(cfg.n_samples)]
    noise = cfg.noise_scale * _rng(cfg.seed, _SAMPLE_NOISE, 0).standard_normal((X.shape[0], cfg.n_samples))
    n = X.shape[0]
    return BoState(X, y, gram_matrix(X, cfg.hyp), np.zeros(n), np.zeros((n, cfg.n_samples)),
                   priors, noise, objective)


def propose_candidates(state: BoState, count: int, lengthscale: float, seed,
                       explore_fraction: float = 0.1, temperature: float | None = None) -> np.ndarray:
    """Mix of uniform exploration points and Gaussian perturbations of observations.

    ``ceil(explore_fraction * count)`` points are uniform on the cube. The
    rest are ``N(x_a, (lengthscale/2)^2 I)`` around anchors ``x_a`` drawn
    with probability ``softmax(y / T)``, ``T = std(y)`` unless given;
    ``T = 0`` puts every anchor on the best observation.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    D = state.X_obs.shape[1]
    n_explore = min(count, math.ceil(explore_fraction * count))
    n_local = count - n_explore
    explore = rng.uniform(size=(n_explore, D))
    y = state.y_obs
    T = float(np.std(y)) if temperature is None else float(temperature)
    if T <= 0:
        anchors = np.full(n_local, int(np.argmax(y)))
    else:
        z = (y - y.max()) / T
        p = np.exp(z)
        anchors = rng.choice(y.shape[0], size=n_local, p=p / p.sum())
    local = state.X_obs[anchors] + rng.normal(scale=lengthscale / 2.0, size=(n_local, D))
    return np.clip(np.vstack([explore, local]), 0.0, 1.0)


def _evaluate_samples(samples, C):
    """Values of every posterior sample at candidates C, shape (m, S)."""
    first = samples[0]
    if all(s.X_train is first.X_train and s.hyp == first.hyp for s in samples):
        W = np.column_stack([s.weights for s in samples])
        out = cross_kernel(C, first.X_train, first.hyp) @ W
        for j, s in enumerate(samples):
            if s.prior is not None:
                out[:, j] += eval_prior(s.prior, C)
        return out
    return np.column_stack([s.evaluate(C) for s in samples])


def select_peaks(samples, state: BoState, rounds: int, per_round: int, seed,
                 lengthscale: float | None = None, explore_fraction: float = 0.1,
                 temperature: float | None = None) -> np.ndarray:
    """Best candidate of each posterior sample over repeated shared proposals.

    Returns an array of shape (n_samples, rounds, D).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if lengthscale is None:
        lengthscale = samples[0].hyp.lengthscale
    D = state.X_obs.shape[1]
    peaks = np.empty((len(samples), rounds, D))
    for r in range(rounds):
        C = propose_candidates(state, per_round, lengthscale, rng, explore_fraction, temperature)
        vals = _evaluate_samples(samples, C)
        peaks[:, r, :] = C[np.argmax(vals, axis=0)]
    return peaks


def ascend_peaks(samples, peaks, steps: int, lr: float = 0.01,
                 betas=(0.9, 0.999), eps=1e-8) -> np.ndarray:
    """Adam ascent from every peak, kept inside the unit cube.

    ``samples`` need only provide ``value_and_grad(P) -> (values, grads)``.
    Each trajectory keeps its best iterate; a trajectory whose gradient
    turns non-finite is frozen. Returns the best point per sample, shape
    (n_samples, D).
    """
    peaks = np.asarray(peaks, dtype=np.float64)
    out = np.empty((peaks.shape[0], peaks.shape[2]))
    for i, s in enumerate(samples):
        P = peaks[i].copy()
        vals, g = s.value_and_grad(P)
        best_P, best_v = P.copy(), vals.copy()
        active = np.all(np.isfinite(g), axis=1)
        m = np.zeros_like(P)
        v = np.zeros_like(P)
        for t in range(1, steps + 1):
            if not active.any():
                break
            g = np.where(active[:, None], g, 0.0)
            m = betas[0] * m + (1 - betas[0]) * g
            v = betas[1] * v + (1 - betas[1]) * g * g
            step = lr * (m / (1 - betas[0] ** t)) / (np.sqrt(v / (1 - betas[1] ** t)) + eps)
            P = np.where(active[:, None], np.clip(P + step, 0.0, 1.0), P)
            vals, g = s.value_and_grad(P)
            better = active & np.isfinite(vals) & (vals > best_v)
            best_P[better] = P[better]
            best_v[better] = vals[better]
            active &= np.all(np.isfinite(g), axis=1)
        out[i] = best_P[np.argmax(best_v)]
    return out


def _absorb_pending(state: BoState, cfg: BoConfig) -> BoState:
    if state.pending_X is None or state.pending_X.shape[0] == 0:
        return state
    Xn, yn = state.pending_X, state.pending_y
    k = Xn.shape[0]
    noise_new = cfg.noise_scale * _rng(cfg.seed, _SAMPLE_NOISE, state.round).standard_normal(
        (k, cfg.n_samples))
    return replace(
        state,
        X_obs=np.vstack([state.X_obs, Xn]),
        y_obs=np.concatenate([state.y_obs, yn]),
        cov=extend_covariance(state.cov, Xn),
        mean_weights=np.concatenate([state.mean_weights, np.zeros(k)]),
        sample_weights=np.vstack([state.sample_weights, np.zeros((k, cfg.n_samples))]),
        noise_draws=np.vstack([state.noise_draws, noise_new]),
        pending_X=None, pending_y=None,
    )


def bo_round(state: BoState, cfg: BoConfig) -> tuple[BoState, TrialRecord]:
    t0 = time.perf_counter()
    r = state.round + 1
    state = _absorb_pending(state, cfg)
    n, S = state.n, cfg.n_samples

    B = np.column_stack([state.y_obs, state.sample_rhs()])
    if cfg.init_mode == "warm":
        start = np.column_stack([state.mean_weights, state.sample_weights])
        inits = [Initialization.warm(start[:, j]) for j in range(S + 1)]
    else:
        start = np.zeros((n, S + 1))
        inits = Initialization.cold()
    results = solve(state.cov.H, B, inits, cfg.solver_config(r), on_divergence="keep")

    mean_w = results[0].v
    sample_w = np.column_stack([res.v for res in results[1:]])
    samples = [PosteriorSample(state.priors[j], state.X_obs, mean_w - sample_w[:, j], cfg.hyp)
               for j in range(S)]

    rng = _rng(cfg.seed, _PROPOSE, r)
    peaks = select_peaks(samples, state, cfg.num_proposals, cfg.num_candidates, rng,
                         cfg.lengthscale, cfg.explore_fraction, cfg.temperature)
    lr = cfg.ascent_lr if cfg.ascent_lr is not None else 0.05 * cfg.lengthscale
    X_new = ascend_peaks(samples, peaks, cfg.ascent_steps, lr=lr)[:cfg.batch_size]
    y_new = state.objective.observe(X_new, _rng(cfg.seed, _OBS, r))

    new_state = replace(state, mean_weights=mean_w, sample_weights=sample_w, round=r,
                        pending_X=X_new, pending_y=y_new, round_start_weights=start)
    record = TrialRecord(
        round=r,
        best_value=float(max(state.y_obs.max(), y_new.max())),
        mean_residual=results[0].final_residual,
        avg_sample_residual=float(np.mean([res.final_residual for res in results[1:]])),
        wall_clock=time.perf_counter() - t0,
        mean_iterations=results[0].iterations,
        max_sample_iterations=max(res.iterations for res in results[1:]),
    )
    return new_state, record


def run_bo(cfg: BoConfig, callback=None) -> list[TrialRecord]:
    """Round 0 describes the initial design (zero weights); rounds 1..n follow."""
    t0 = time.perf_counter()
    state = init_state(cfg)
    records = [TrialRecord(0, float(state.y_obs.max()), 1.0, 1.0, time.perf_counter() - t0)]
    if callback:
        callback(state, records[-1])
    for _ in range(cfg.n_rounds):
        state, rec = bo_round(state, cfg)
        records.append(rec)
        if callback:
            callback(state, rec)
    return records
