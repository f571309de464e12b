import os

import numpy as np
from setuptools import Extension, setup

# The compiled core is optional: without Cython (or with DPBANDCOV_NO_EXT=1)
# the package installs pure-Python and falls back at import time.
ext_modules = []
if not os.environ.get("DPBANDCOV_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "dpbandcov._kernels",
                    ["src/dpbandcov/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
