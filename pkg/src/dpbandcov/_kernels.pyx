# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: Gram power iteration and cyclic Jacobi sweeps.

Both functions mirror ``_kernels_py`` exactly in algorithm and stopping
rule; only the loop bodies differ.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

# power iteration status codes, shared with the Python fallback
DEF CONVERGED = 0
DEF MAX_ITER = 1
DEF STALLED = 2


def gram_power_iteration(const double[:, ::1] m, const double[::1] x0, int max_iter, double tol):
    """Top eigenvalue of ``m.T @ m`` by power iteration from ``x0``.

    Returns ``(lam, iterations, status)``; stops when the residual
    ``||G x - lam x|| <= tol * lam``. Matrix-vector products go through
    BLAS ``dgemv`` on the row-major buffer viewed as column-major ``m.T``.
    """
    cdef int r = <int>m.shape[0], c = <int>m.shape[1]
    cdef int j, it, one = 1, status = MAX_ITER, done = max_iter
    cdef double alpha = 1.0, beta = 0.0
    cdef double acc, nrm, lam = 0.0, res
    cdef char trans_t = b'T', trans_n = b'N'
    cdef double[::1] x = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] y = np.empty(max(r, 1), dtype=np.float64)
    cdef double[::1] z = np.empty(max(c, 1), dtype=np.float64)

    with nogil:
        nrm = 0.0
        for j in range(c):
            nrm += x[j] * x[j]
        nrm = sqrt(nrm)
        if nrm == 0.0:
            status = STALLED
            done = 0
        else:
            for j in range(c):
                x[j] /= nrm
            for it in range(1, max_iter + 1):
                # y = m @ x ; z = m.T @ y
                dgemv(&trans_t, &c, &r, &alpha, &m[0, 0], &c, &x[0], &one, &beta, &y[0], &one)
                dgemv(&trans_n, &c, &r, &alpha, &m[0, 0], &c, &y[0], &one, &beta, &z[0], &one)
                lam = 0.0
                nrm = 0.0
                for j in range(c):
                    lam += x[j] * z[j]
                    nrm += z[j] * z[j]
                if nrm == 0.0:
                    lam = 0.0
                    status = STALLED
                    done = it
                    break
                res = 0.0
                for j in range(c):
                    acc = z[j] - lam * x[j]
                    res += acc * acc
                nrm = sqrt(nrm)
                for j in range(c):
                    x[j] = z[j] / nrm
                if sqrt(res) <= tol * lam:
                    status = CONVERGED
                    done = it
                    break
    return lam, done, status


def jacobi_eigh(const double[:, ::1] a_in, double tol, int max_sweeps):
    """Cyclic-by-row Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, sweeps, converged)`` with
    eigenvalues unsorted (diagonal order).
    """
    cdef Py_ssize_t n = a_in.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double off, total, theta, t, cs, sn, apq, akp, akq
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a_arr = np.array(a_in, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr

    cdef int used = max_sweeps
    cdef bint converged = False

    with nogil:
        total = 0.0
        for p in range(n):
            for q in range(n):
                total += a[p, q] * a[p, q]
        total = sqrt(total)

        for sweep in range(max_sweeps + 1):
            off = 0.0
            for p in range(n):
                for q in range(p + 1, n):
                    off += 2.0 * a[p, q] * a[p, q]
            if sqrt(off) <= tol * total:
                converged = True
                used = sweep
                break
            if sweep == max_sweeps:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    cs = 1.0 / sqrt(t * t + 1.0)
                    sn = t * cs
                    for k in range(n):
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = cs * akp - sn * akq
                        a[k, q] = sn * akp + cs * akq
                    for k in range(n):
                        akp = a[p, k]
                        akq = a[q, k]
                        a[p, k] = cs * akp - sn * akq
                        a[q, k] = sn * akp + cs * akq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        akp = v[k, p]
                        akq = v[k, q]
                        v[k, p] = cs * akp - sn * akq
                        v[k, q] = sn * akp + cs * akq
    return np.diag(a_arr).copy(), v_arr, used, converged
