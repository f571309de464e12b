"""Kernel backend selection.

The Cython extension is used when it was built; otherwise (or when
``DPBANDCOV_PURE_PYTHON`` is set) the numpy fallback is loaded.
"""

import os

from . import _kernels_py

if os.environ.get("DPBANDCOV_PURE_PYTHON"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"

CONVERGED = _kernels_py.CONVERGED
MAX_ITER = _kernels_py.MAX_ITER
STALLED = _kernels_py.STALLED

__all__ = ["kernels", "BACKEND", "CONVERGED", "MAX_ITER", "STALLED"]
