"""Command-line experiment runners.

    warmgp regression-bench --data pol.csv --target-col -1 --out results/
    warmgp thompson-bench --budget small --seeds 2 --out results/
    warmgp verify --quick

Every command accepts ``--config FILE`` with flat ``key=value`` lines
(keys are the long flag names, with dashes or underscores); flags given
on the command line override the file. The resolved configuration is
written next to the results as ``config_<hash>.txt``, a file that can be
fed back through ``--config``, and ``<hash>`` is part of every result
file name.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
import time
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from . import _backend
from .analysis import exact_solve, mll, optimize_mll, rkhs_distance, schur_complement, warm_start_report
from .dataset import load_csv, sample_split, standardize
from .errors import DivergenceError, WarmGPError
from .kernel import KernelHyperparams, cross_kernel, extend_system, gram_matrix
from .sampling import build_sample_rhs, feature_covariance, sample_prior
from .solvers import METHODS, Initialization, SolverConfig, solve_one
from .thompson import LENGTHSCALES, BoConfig, run_bo

log = logging.getLogger("warmgp")

REGRESSION_HEADER = ["trial", "solver", "system", "init", "iters", "converged",
                     "final_rel_residual", "d_euclid_ratio", "d_rkhs_ratio", "identity_gap", "seed"]
THOMPSON_HEADER = ["round", "init", "solver", "lengthscale", "seed", "best_value",
                   "mean_residual", "avg_sample_residual", "wall_clock_s"]
SGD_LR_GRID = (0.03, 0.1, 0.3, 1.0)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


# -- config files ------------------------------------------------------------

def read_config(path) -> dict:
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ValueError(f"{path}:{lineno}: empty key")
            out[key.replace("-", "_")] = value
    return out


def format_config(cfg: dict) -> str:
    return "".join(f"{k}={_fmt_value(cfg[k])}\n" for k in sorted(cfg))


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return "" if v is None else str(v)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(format_config(cfg).encode()).hexdigest()[:12]


def _csv_list(kind):
    def parse(s):
        return [kind(x) for x in str(s).split(",") if x.strip()]
    return parse


def _apply_config(sub: argparse.ArgumentParser, values: dict):
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise ValueError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError(f"config key {key!r} expects a boolean, got {value!r}")
            defaults[key] = low in _TRUE
        else:
            # string defaults go through the action's type on parse
            defaults[key] = value
    sub.set_defaults(**defaults)


def resolved_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "config", "command", "verbose")}


def _prepare_out(args, prefix):
    cfg = resolved_config(args)
    h = config_hash(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"config_{h}.txt").write_text(format_config(cfg))
    return out, h


# -- regression benchmark ----------------------------------------------------

def initial_hyperparams(X) -> KernelHyperparams:
    """Median-distance lengthscale, unit signal, noise 0.3 (standardized targets)."""
    sub = X[: min(len(X), 500)]
    med = float(np.median(pdist(sub))) if len(sub) > 1 else 1.0
    return KernelHyperparams(med if med > 0 else 1.0, 1.0, 0.3)


def _run_solver(H, b, init, cfg):
    try:
        return solve_one(H, b, init, cfg)
    except DivergenceError as exc:
        log.warning("%s diverged: %s", cfg.method, exc)
        if exc.result is None:
            raise
        return exc.result


def choose_sgd_lr(H, b, grid, base: SolverConfig) -> float:
    """Grid point needing the fewest cold-start iterations; diverged runs lose."""
    best = None
    for lr in grid:
        cfg = SolverConfig(**{**base.__dict__, "method": "sgd", "learning_rate": lr})
        try:
            res = solve_one(H, b, Initialization.cold(), cfg)
        except DivergenceError:
            continue
        key = (not res.converged, res.iterations, res.final_residual)
        if best is None or key < best[0]:
            best = (key, lr)
    if best is None:
        raise DivergenceError("every learning rate in the grid diverged")
    return best[1]


def regression_trial(split, hyp: KernelHyperparams, trial: int, seed: int, solvers=METHODS,
                     tol=0.01, max_iters=20000, learning_rate=0.3, num_features=2000):
    """Warm and cold solves of the mean and one posterior-sample system.

    Returns rows keyed by REGRESSION_HEADER. The warm start is the exact
    solution of the n1-point system padded with zeros.
    """
    C1 = gram_matrix(split.X1, hyp)
    n1 = split.X1.shape[0]
    rng = np.random.default_rng([seed, 1])
    prior = sample_prior(hyp, split.X1.shape[1], num_features, seed=rng)
    rhs = build_sample_rhs(prior, split.X, hyp.noise_scale, seed=rng)
    systems = {"mean": (split.y1, split.y2), "sample": (rhs[:n1], rhs[n1:])}

    rows = []
    for system, (b1, b2) in systems.items():
        bs = extend_system(C1, split.X2, b1, b2)
        rep = warm_start_report(bs)
        H, b = bs.assemble(), bs.b
        u1 = exact_solve(C1.H, b1)
        for method in solvers:
            cfg = SolverConfig(method=method, tolerance=tol, max_iters=max_iters,
                               learning_rate=learning_rate, seed=seed)
            for init_name, init in (("warm", Initialization.warm(u1)), ("cold", Initialization.cold())):
                res = _run_solver(H, b, init, cfg)
                warm = init_name == "warm"
                rows.append({
                    "trial": trial, "solver": method, "system": system, "init": init_name,
                    "iters": res.iterations, "converged": int(res.converged),
                    "final_rel_residual": res.final_residual,
                    "d_euclid_ratio": rep.euclid_ratio if warm else 1.0,
                    "d_rkhs_ratio": rep.rkhs_ratio if warm else 1.0,
                    "identity_gap": rep.identity_gap, "seed": seed,
                })
    return rows


def cmd_regression_bench(args) -> int:
    for m in args.solvers:
        if m not in METHODS:
            raise ValueError(f"unknown solver {m!r}; choose from {METHODS}")
    data, _ = standardize(load_csv(args.data, args.target_col, header=args.header))
    out, h = _prepare_out(args, "regression")
    path = out / f"regression_{data.name}_{h}.csv"
    lr = args.sgd_lr
    failed = False
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REGRESSION_HEADER)
        writer.writeheader()
        fh.flush()
        for trial in range(args.trials):
            seed = args.seed + trial
            t0 = time.perf_counter()
            try:
                split = sample_split(data, args.n1, args.n2, seed)
                hyp = optimize_mll(split.X1, split.y1, initial_hyperparams(split.X1),
                                   steps=args.mll_steps, step_size=0.1)
                if args.sgd_lr_grid and trial == 0 and "sgd" in args.solvers:
                    bs = extend_system(gram_matrix(split.X1, hyp), split.X2, split.y1, split.y2)
                    base = SolverConfig(tolerance=args.tol, max_iters=args.max_iters, seed=seed)
                    lr = choose_sgd_lr(bs.assemble(), bs.b, args.sgd_lr_grid, base)
                    log.info("SGD learning rate chosen from grid: %g", lr)
                rows = regression_trial(split, hyp, trial, seed, args.solvers, args.tol,
                                        args.max_iters, lr)
            except (WarmGPError, np.linalg.LinAlgError, FloatingPointError) as exc:
                log.error("trial %d failed: %s", trial, exc)
                failed = True
                break
            writer.writerows(rows)
            fh.flush()
            log.info("trial %d done in %.1fs (%s)", trial, time.perf_counter() - t0, hyp)
    print(path)
    return 1 if failed else 0


# -- Thompson sampling benchmark ---------------------------------------------

def thompson_rows(records, cfg: BoConfig):
    for r in records:
        yield {"round": r.round, "init": cfg.init_mode, "solver": cfg.solver,
               "lengthscale": cfg.lengthscale, "seed": cfg.seed, "best_value": r.best_value,
               "mean_residual": r.mean_residual, "avg_sample_residual": r.avg_sample_residual,
               "wall_clock_s": r.wall_clock}


def write_thompson_csv(path, records, cfg: BoConfig):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=THOMPSON_HEADER)
        writer.writeheader()
        writer.writerows(thompson_rows(records, cfg))


def summarize(runs):
    """Mean and standard error across seeds per (solver, lengthscale, init, round)."""
    groups = {}
    for cfg, records in runs:
        for r in records:
            key = (cfg.solver, cfg.lengthscale, cfg.init_mode, r.round)
            groups.setdefault(key, []).append((r.best_value, r.mean_residual, r.avg_sample_residual))
    rows = []
    for key in sorted(groups):
        a = np.array(groups[key])
        se = a.std(axis=0, ddof=1) / np.sqrt(len(a)) if len(a) > 1 else np.zeros(3)
        m = a.mean(axis=0)
        rows.append(dict(zip(("solver", "lengthscale", "init", "round"), key),
                         runs=len(a), best_value_mean=m[0], best_value_se=se[0],
                         mean_residual_mean=m[1], mean_residual_se=se[1],
                         avg_sample_residual_mean=m[2], avg_sample_residual_se=se[2]))
    return rows


def bo_configs(args):
    batch = args.batch_size or args.samples
    for solver in args.solvers:
        for ls in args.lengthscales:
            for s in range(args.seeds):
                for init in ("warm", "cold"):
                    yield BoConfig(dim=args.dim, n_init=args.n_init, batch_size=batch,
                                   n_samples=args.samples, n_rounds=args.rounds, lengthscale=ls,
                                   lengthscale_grid=tuple(args.lengthscales), solver=solver,
                                   budget=args.budget, init_mode=init, seed=args.seed + s,
                                   num_candidates=args.candidates, num_proposals=args.proposals)


def cmd_thompson_bench(args) -> int:
    cfgs = list(bo_configs(args))   # validates before any work
    out, h = _prepare_out(args, "thompson")
    runs = []
    for cfg in cfgs:
        t0 = time.perf_counter()
        records = run_bo(cfg)
        name = f"thompson_{cfg.solver}_l{cfg.lengthscale:g}_s{cfg.seed}_{cfg.init_mode}_{h}.csv"
        write_thompson_csv(out / name, records, cfg)
        runs.append((cfg, records))
        log.info("%s done in %.1fs, final residual %.3g, best %.4f", name,
                 time.perf_counter() - t0, records[-1].mean_residual, records[-1].best_value)
        print(out / name)
    if args.summary:
        rows = summarize(runs)
        with open(out / f"thompson_summary_{h}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return 0


# -- verification suite ------------------------------------------------------

def random_hyperparams(rng) -> KernelHyperparams:
    return KernelHyperparams(float(np.exp(rng.uniform(np.log(0.2), np.log(2.0)))),
                             float(rng.uniform(0.5, 2.0)),
                             float(np.exp(rng.uniform(np.log(0.03), np.log(1.0)))))


def random_blocked_system(rng, n1_range=(50, 500), n2_range=(5, 100), dim_range=(1, 8)):
    n1 = int(rng.integers(n1_range[0], n1_range[1] + 1))
    n2 = int(rng.integers(n2_range[0], n2_range[1] + 1))
    D = int(rng.integers(dim_range[0], dim_range[1] + 1))
    hyp = random_hyperparams(rng)
    X = rng.uniform(size=(n1 + n2, D))
    C1 = gram_matrix(X[:n1], hyp)
    b = rng.standard_normal(n1 + n2)
    return extend_system(C1, X[n1:], b[:n1], b[n1:]), hyp


def check_identity(rng, n_systems):
    worst, ordered = 0.0, True
    for _ in range(n_systems):
        sys_, _ = random_blocked_system(rng)
        rep = warm_start_report(sys_)
        worst = max(worst, abs(rep.identity_gap) / max(rep.d_cold_sq, 1.0))
        ordered &= rep.d_warm_sq < rep.d_cold_sq
    return worst <= 1e-8 and ordered, f"max relative gap {worst:.2e} over {n_systems} systems, d_warm < d_cold: {ordered}"


def check_schur(rng, n_systems):
    worst = 0.0
    for _ in range(n_systems):
        sys_, _ = random_blocked_system(rng)
        v = exact_solve(sys_.assemble(), sys_.b)
        u1 = exact_solve(sys_.H11, sys_.b1)
        v2 = exact_solve(schur_complement(sys_), sys_.b2 - sys_.H12.T @ u1)
        worst = max(worst, np.linalg.norm(v2 - v[sys_.n1:]) / max(np.linalg.norm(v[sys_.n1:]), 1e-300))
    return worst <= 1e-8, f"max relative v2 mismatch {worst:.2e} over {n_systems} systems"


def check_solvers(rng, n_systems, n=200):
    worst = {m: 0.0 for m in METHODS}
    for _ in range(n_systems):
        hyp = KernelHyperparams(float(rng.uniform(0.1, 0.5)), 1.0, float(rng.uniform(0.1, 0.5)))
        H = gram_matrix(rng.uniform(size=(n, 3)), hyp).H
        b = rng.standard_normal(n)
        v = exact_solve(H, b)
        denom = rkhs_distance(H, np.zeros(n), v)
        for m in METHODS:
            cfg = SolverConfig(method=m, tolerance=1e-6, max_iters=200000, seed=int(rng.integers(2 ** 31)))
            res = solve_one(H, b, Initialization.cold(), cfg)
            worst[m] = max(worst[m], rkhs_distance(H, res.v, v) / denom)
    ok = all(w <= 1e-4 for w in worst.values())
    return ok, "max H-norm error " + ", ".join(f"{m}={w:.1e}" for m, w in worst.items())


def check_rff(rng, n_pairs=20, n_priors=200):
    hyp = KernelHyperparams(float(rng.uniform(0.3, 1.0)))
    D = 3
    A, B = rng.uniform(size=(n_pairs, D)), rng.uniform(size=(n_pairs, D))
    exact = np.array([cross_kernel(a, b_, hyp)[0, 0] for a, b_ in zip(A, B)])
    errs = {}
    for F in (50, 2000):
        est = np.zeros(n_pairs)
        for _ in range(n_priors):
            p = sample_prior(hyp, D, F, seed=rng)
            est += np.einsum("ij,ij->i", p._coef * p.features(A), p._coef * p.features(B))
        errs[F] = np.abs(est / n_priors - exact)
    ok = errs[2000].max() <= 0.1 and errs[2000].mean() < errs[50].mean()
    return ok, f"max abs error F=2000 {errs[2000].max():.3f}, mean F=50 {errs[50].mean():.3f} > F=2000 {errs[2000].mean():.3f}"


def fd_mll_gradient(X, y, hyp, h=1e-5):
    theta = hyp.to_log()
    g = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        up = mll(X, y, KernelHyperparams.from_log(theta + e))[0]
        dn = mll(X, y, KernelHyperparams.from_log(theta - e))[0]
        g[i] = (up - dn) / (2 * h)
    return g


def check_mll_gradient(rng, n_settings, n=50):
    worst = 0.0
    for _ in range(n_settings):
        hyp = random_hyperparams(rng)
        X = rng.uniform(size=(n, 2))
        y = rng.standard_normal(n)
        g = mll(X, y, hyp)[1]
        g_fd = fd_mll_gradient(X, y, hyp)
        worst = max(worst, np.linalg.norm(g - g_fd) / max(np.linalg.norm(g_fd), 1e-12))
    return worst <= 1e-5, f"max relative gradient error {worst:.2e} over {n_settings} settings"


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    k = 5 if args.quick else 50
    suites = [
        ("identity-gap", lambda: check_identity(rng, k)),
        ("schur-consistency", lambda: check_schur(rng, k)),
        ("solver-oracle", lambda: check_solvers(rng, 1 if args.quick else 5)),
        ("rff-covariance", lambda: check_rff(rng)),
        ("mll-gradient", lambda: check_mll_gradient(rng, 5 if args.quick else 20)),
    ]
    print(f"kernel backend: {_backend.BACKEND}")
    for name, fn in suites:
        ok, msg = fn()
        print(f"{'PASS' if ok else 'FAIL'} {name}: {msg}")
        if not ok:
            print(f"verification failed: {name}", file=sys.stderr)
            return 1
    return 0


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warmgp", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("regression-bench", help="warm vs cold solves on a growing regression dataset")
    p.add_argument("--config")
    p.add_argument("--data", required=False)
    p.add_argument("--target-col", type=int, default=-1)
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    p.add_argument("--n1", type=int, default=1000)
    p.add_argument("--n2", type=int, default=100)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--max-iters", type=int, default=20000)
    p.add_argument("--solvers", type=_csv_list(str), default=list(METHODS))
    p.add_argument("--sgd-lr", type=float, default=0.3)
    p.add_argument("--sgd-lr-grid", type=_csv_list(float), default=[],
                   help=f"pick the SGD learning rate on trial 0, e.g. {','.join(map(str, SGD_LR_GRID))}")
    p.add_argument("--mll-steps", type=int, default=200)
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_regression_bench)

    p = subs.add_parser("thompson-bench", help="paired warm/cold parallel Thompson sampling")
    p.add_argument("--config")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--n-init", type=int, default=500)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=0, help="0 means one acquisition per sample")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--budget", choices=("small", "large"), default="small")
    p.add_argument("--lengthscales", type=_csv_list(float), default=list(LENGTHSCALES))
    p.add_argument("--seeds", type=int, default=2)
    p.add_argument("--solvers", type=_csv_list(str), default=["cg"])
    p.add_argument("--candidates", type=int, default=1000)
    p.add_argument("--proposals", type=int, default=3)
    p.add_argument("--summary", action="store_true")
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_thompson_bench)

    p = subs.add_parser("verify", help="randomized property checks against direct-solve oracles")
    p.add_argument("--config")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(sub, read_config(args.config))
        args = parser.parse_args(argv)
    if args.command == "regression-bench" and not args.data:
        parser.error("regression-bench needs --data (flag or config key)")
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ValueError as exc:
        print(f"warmgp: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"warmgp: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
