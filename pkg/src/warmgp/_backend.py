"""Select the compiled kernel core, falling back to numpy.

Set ``WARMGP_PURE_PYTHON=1`` to force the fallback.
"""

import os

try:
    if os.environ.get("WARMGP_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as impl
    BACKEND = "cython"
except ImportError:
    from . import _kernels_py as impl
    BACKEND = "python"

matern32_cross = impl.matern32_cross
matern32_gram = impl.matern32_gram
matern32_cross_grad = impl.matern32_cross_grad
pivoted_cholesky = impl.pivoted_cholesky

__all__ = ["BACKEND", "matern32_cross", "matern32_gram",
           "matern32_cross_grad", "pivoted_cholesky"]
