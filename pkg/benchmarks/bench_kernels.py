"""Compare the compiled and pure-Python kernels.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Prints one
line per (kernel, size) with the best-of-N wall time of each backend and
the speedup. Exits non-zero if the compiled extension is not built.
"""

import argparse
import sys
import timeit

import numpy as np

from dpbandcov import _kernels_py as py_kernels

try:
    from dpbandcov import _kernels as c_kernels
except ImportError:
    c_kernels = None


def _symmetric(d, rng):
    a = rng.standard_normal((d, d))
    return np.ascontiguousarray(a + a.T)


def cases(rng):
    for d in (50, 200, 500):
        m = np.ascontiguousarray(rng.standard_normal((d, d)))
        yield "gram_power_iteration", d, lambda k, m=m: k.gram_power_iteration(m, np.ones(m.shape[1]), 20 * m.shape[0], 1e-9)
    for d in (10, 30, 60):
        s = _symmetric(d, rng)
        yield "jacobi_eigh", d, lambda k, s=s: k.jacobi_eigh(s, 1e-12, 50)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if c_kernels is None:
        print("compiled extension dpbandcov._kernels is not built", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'size':>6}{'cython_ms':>12}{'python_ms':>12}{'speedup':>9}")
    for name, d, fn in cases(rng):
        tc = min(timeit.repeat(lambda: fn(c_kernels), number=1, repeat=args.repeat)) * 1e3
        tp = min(timeit.repeat(lambda: fn(py_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<22}{d:>6}{tc:>12.3f}{tp:>12.3f}{tp / tc:>9.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
