import os

import numpy
from setuptools import Extension, setup

ext_kwargs = dict(
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3", "-Wno-unused-function"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

ext_modules = []
if not os.environ.get("WARMGP_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("warmgp._kernels", ["src/warmgp/_kernels.pyx"], **ext_kwargs)],
        language_level=3,
        compiler_directives=dict(boundscheck=False, wraparound=False,
                                 cdivision=True, initializedcheck=False),
    )

setup(ext_modules=ext_modules)
