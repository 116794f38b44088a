"""Compare the compiled kernel core against the numpy fallback.

    python3 benchmarks/bench_kernels.py            # full sizes
    python3 benchmarks/bench_kernels.py --quick

Prints one line per (operation, size): best-of-N wall time for each
backend, the speedup, and the max absolute difference between outputs.
"""

import argparse
import timeit

import numpy as np

from warmgp import _kernels_py

try:
    from warmgp import _kernels as _ext
except ImportError:
    _ext = None


def cases(n, D, rng):
    X = rng.uniform(size=(n, D))
    P = rng.uniform(size=(max(n // 10, 1), D))
    w = rng.standard_normal(n)
    H = _kernels_py.matern32_gram(X, 0.3, 1.0) + 1e-2 * np.eye(n)
    rank = min(100, n)
    return {
        "gram": lambda m: m.matern32_gram(X, 0.3, 1.0),
        "cross": lambda m: m.matern32_cross(P, X, 0.3, 1.0),
        "cross_grad": lambda m: m.matern32_cross_grad(P, X, w, 0.3, 1.0),
        "pivoted_chol": lambda m: m.pivoted_cholesky(H, rank, 1e-12),
    }


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dim", type=int, default=8)
    args = ap.parse_args()
    if _ext is None:
        print("compiled extension not built; nothing to compare")
        return
    sizes = (200, 500) if args.quick else (500, 1000, 2000)
    rng = np.random.default_rng(0)
    print(f"{'op':<14}{'n':>6}{'cython [s]':>13}{'python [s]':>13}{'speedup':>9}{'max diff':>11}")
    for n in sizes:
        for name, fn in cases(n, args.dim, rng).items():
            t_ext = min(timeit.repeat(lambda: fn(_ext), number=1, repeat=args.repeat))
            t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
            diff = max_diff(fn(_ext), fn(_kernels_py))
            print(f"{name:<14}{n:>6}{t_ext:>13.4f}{t_py:>13.4f}{t_py / t_ext:>9.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
