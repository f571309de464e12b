"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``.

Same algorithms, same stopping rules, same return conventions.
"""

import math

import numpy as np

CONVERGED = 0
MAX_ITER = 1
STALLED = 2


def gram_power_iteration(m, x0, max_iter, tol):
    m = np.ascontiguousarray(m, dtype=np.float64)
    x = np.array(x0, dtype=np.float64, copy=True)
    nrm = math.sqrt(float(x @ x))
    if nrm == 0.0:
        return 0.0, 0, STALLED
    x /= nrm
    lam = 0.0
    for it in range(1, max_iter + 1):
        z = m.T @ (m @ x)
        lam = float(x @ z)
        nrm = math.sqrt(float(z @ z))
        if nrm == 0.0:
            return 0.0, it, STALLED
        res = z - lam * x
        res = math.sqrt(float(res @ res))
        x = z / nrm
        if res <= tol * lam:
            return lam, it, CONVERGED
    return lam, max_iter, MAX_ITER


def jacobi_eigh(a_in, tol, max_sweeps):
    a = np.array(a_in, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    total = math.sqrt(float(np.sum(a * a)))
    upper = np.triu_indices(n, 1)
    for sweep in range(max_sweeps + 1):
        off = math.sqrt(2.0 * float(np.sum(a[upper] ** 2)))
        if off <= tol * total:
            return np.diag(a).copy(), v, sweep, True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, max_sweeps, False
