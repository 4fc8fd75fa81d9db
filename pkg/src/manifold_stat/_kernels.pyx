# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  ``_kernels_py`` holds the reference implementation
with identical signatures and semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

STATUS_CONVERGED = 0
STATUS_AT_DATUM = 1
STATUS_MAX_ITER = 2


def median_objective(const double[:, ::1] x, const double[::1] a):
    cdef Py_ssize_t n = x.shape[0], s = x.shape[1], i, j
    cdef double total = 0.0, acc, d
    for i in range(n):
        acc = 0.0
        for j in range(s):
            d = x[i, j] - a[j]
            acc += d * d
        total += sqrt(acc)
    return total


def weiszfeld(const double[:, ::1] x, const double[::1] start, double tol,
              long max_iter, double tie_tol, double[::1] trace=None):
    """Weiszfeld iteration with the Vardi-Zhang correction at data points.

    Returns ``(point, iterations, status)``.  When ``trace`` is given, the
    objective at iterate k is written to ``trace[k]``.
    """
    cdef Py_ssize_t n = x.shape[0], s = x.shape[1], i, j
    cdef long it = 0
    cdef int status = STATUS_MAX_ITER
    cdef double[::1] y = np.array(start, dtype=np.float64, copy=True)
    cdef double[::1] num = np.empty(s)
    cdef double[::1] res = np.empty(s)
    cdef double[::1] ynew = np.empty(s)
    cdef double dist, acc, wsum, obj, rnorm, beta, step, diff
    cdef long eta
    cdef bint record = trace is not None
    cdef Py_ssize_t ntrace = trace.shape[0] if record else 0

    while it < max_iter:
        for j in range(s):
            num[j] = 0.0
            res[j] = 0.0
        wsum = 0.0
        obj = 0.0
        eta = 0
        for i in range(n):
            acc = 0.0
            for j in range(s):
                diff = x[i, j] - y[j]
                acc += diff * diff
            dist = sqrt(acc)
            obj += dist
            if dist <= tie_tol:
                eta += 1
                continue
            for j in range(s):
                num[j] += x[i, j] / dist
                res[j] += (x[i, j] - y[j]) / dist
            wsum += 1.0 / dist
        if record and it < ntrace:
            trace[it] = obj
        if wsum == 0.0:
            status = STATUS_AT_DATUM
            break
        rnorm = 0.0
        for j in range(s):
            rnorm += res[j] * res[j]
        rnorm = sqrt(rnorm)
        if eta > 0:
            if rnorm <= eta:
                status = STATUS_AT_DATUM
                break
            beta = eta / rnorm
            if beta > 1.0:
                beta = 1.0
        else:
            beta = 0.0
        step = 0.0
        for j in range(s):
            ynew[j] = (1.0 - beta) * num[j] / wsum + beta * y[j]
            diff = ynew[j] - y[j]
            step += diff * diff
            y[j] = ynew[j]
        it += 1
        if sqrt(step) <= tol:
            status = STATUS_CONVERGED
            break

    return np.asarray(y), it, status
