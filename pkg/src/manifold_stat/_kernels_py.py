"""Pure-NumPy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np

STATUS_CONVERGED = 0
STATUS_AT_DATUM = 1
STATUS_MAX_ITER = 2


def median_objective(x, a):
    return float(np.sum(np.sqrt(np.sum((x - a) ** 2, axis=1))))


def weiszfeld(x, start, tol, max_iter, tie_tol, trace=None):
    """Weiszfeld iteration with the Vardi-Zhang correction at data points.

    Returns ``(point, iterations, status)``.  When ``trace`` is given, the
    objective at iterate k is written to ``trace[k]``.
    """
    x = np.asarray(x, dtype=float)
    y = np.array(start, dtype=float, copy=True)
    it = 0
    status = STATUS_MAX_ITER
    while it < max_iter:
        diff = x - y
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        if trace is not None and it < trace.shape[0]:
            trace[it] = dist.sum()
        tied = dist <= tie_tol
        eta = int(tied.sum())
        keep = ~tied
        if not keep.any():
            status = STATUS_AT_DATUM
            break
        w = 1.0 / dist[keep]
        wsum = w.sum()
        target = (w @ x[keep]) / wsum
        if eta:
            rnorm = float(np.linalg.norm(w @ diff[keep]))
            if rnorm <= eta:
                status = STATUS_AT_DATUM
                break
            beta = min(1.0, eta / rnorm)
        else:
            beta = 0.0
        ynew = (1.0 - beta) * target + beta * y
        step = float(np.linalg.norm(ynew - y))
        y = ynew
        it += 1
        if step <= tol:
            status = STATUS_CONVERGED
            break
    return y, it, status
