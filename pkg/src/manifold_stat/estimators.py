"""Euclidean location functionals and their empirical versions.

The sample mean, the unbiased covariance, the spatial median (Weiszfeld
iteration with the Vardi-Zhang modification) and the pooled multisample
mean/scale pair.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import CollinearWarning, EmptySample, MaxIterations, TooFewRows
from .geometry import sym_sqrt, symmetrize


@dataclass(frozen=True)
class LabeledSample:
    """Observations as rows of an ``n x s`` matrix, with optional integer
    group labels (one per row)."""

    data: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if data.shape[0] == 0 or data.size == 0:
            raise EmptySample("sample has no rows")
        if not np.all(np.isfinite(data)):
            raise ValueError("sample contains non-finite values")
        object.__setattr__(self, "data", data)
        if self.groups is not None:
            groups = np.asarray(self.groups).reshape(-1)
            if groups.shape[0] != data.shape[0]:
                raise ValueError("one group label per row is required")
            object.__setattr__(self, "groups", groups)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def s(self) -> int:
        return self.data.shape[1]

    def group_labels(self):
        if self.groups is None:
            return [None]
        return list(np.unique(self.groups))

    def split(self):
        """List of per-group data matrices (one entry when unlabeled)."""
        if self.groups is None:
            return [self.data]
        return [self.data[self.groups == g] for g in np.unique(self.groups)]


def as_sample(x) -> LabeledSample:
    return x if isinstance(x, LabeledSample) else LabeledSample(x)


def mean_vector(sample):
    return as_sample(sample).data.mean(axis=0)


def covariance(sample):
    """Unbiased sample covariance (divisor n - 1)."""
    data = as_sample(sample).data
    if data.shape[0] < 2:
        raise TooFewRows("covariance needs at least two rows")
    centered = data - data.mean(axis=0)
    return symmetrize(centered.T @ centered / (data.shape[0] - 1))


@dataclass(frozen=True)
class MedianSolverConfig:
    tolerance: float = 1e-10
    max_iterations: int = 10000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class MedianResult:
    point: np.ndarray
    iterations: int
    at_datum: bool
    collinear: bool
    objective: float
    trace: np.ndarray | None = field(default=None, repr=False)


def is_collinear(data, rel_tol=1e-10) -> bool:
    """True when the centered rows span at most a line (rank <= 1)."""
    data = np.asarray(data, dtype=float)
    if data.shape[0] <= 2:
        return True
    sv = np.linalg.svd(data - data.mean(axis=0), compute_uv=False)
    if sv[0] == 0.0:
        return False
    return bool(sv.shape[0] < 2 or sv[1] < rel_tol * sv[0])


def median_objective(data, a) -> float:
    data = np.ascontiguousarray(data, dtype=float)
    return float(kernels.median_objective(data, np.ascontiguousarray(a, dtype=float)))


def weiszfeld_residual(data, a):
    """Norm of the sum of unit vectors pointing from ``a`` to the data
    (data points coinciding with ``a`` are skipped)."""
    diff = np.asarray(data, dtype=float) - a
    dist = np.linalg.norm(diff, axis=1)
    keep = dist > 1e-12 * (1.0 + np.linalg.norm(a))
    return float(np.linalg.norm((diff[keep] / dist[keep, None]).sum(axis=0)))


def solve_spatial_median(sample, cfg: MedianSolverConfig | None = None,
                         record_trace: bool = False) -> MedianResult:
    """Spatial median with solver diagnostics.

    Starts at the coordinatewise mean.  ``n = 1`` returns the point and
    ``n = 2`` the midpoint, both flagged collinear.
    """
    cfg = cfg or MedianSolverConfig()
    data = np.ascontiguousarray(as_sample(sample).data)
    n = data.shape[0]
    if n <= 2:
        point = data.mean(axis=0)
        return MedianResult(point, 0, n == 1, True, median_objective(data, point))
    collinear = is_collinear(data)
    if collinear:
        warnings.warn("observations are collinear; the spatial median may not be unique",
                      CollinearWarning, stacklevel=2)
    start = data.mean(axis=0)
    scale = float(np.max(np.abs(data))) + 1.0
    trace = np.full(cfg.max_iterations + 1, np.nan) if record_trace else None
    point, iters, status = kernels.weiszfeld(
        data, np.ascontiguousarray(start), cfg.tolerance, cfg.max_iterations,
        1e-12 * scale, trace,
    )
    if status == kernels.STATUS_MAX_ITER:
        raise MaxIterations(
            f"Weiszfeld iteration did not converge in {cfg.max_iterations} steps"
        )
    point = np.asarray(point, dtype=float)
    if trace is not None:
        # the kernel records objectives before each step; add the final iterate
        trace = trace[: iters + 1]
        trace[iters] = median_objective(data, point)
    at_datum = status == kernels.STATUS_AT_DATUM
    if not at_datum:
        # Weiszfeld approaches an optimal datum only linearly; test the
        # nearest observation directly and snap when it is optimal
        anchor = _optimal_anchor(data, point, 1e-12 * scale)
        if anchor is not None:
            point, at_datum = anchor, True
    return MedianResult(point, int(iters), at_datum, collinear,
                        median_objective(data, point), trace)


def _optimal_anchor(data, point, tie_tol):
    """Nearest observation if it satisfies the data-point optimality condition
    ``||sum_{x_i != y} (x_i - y)/||x_i - y|| || <= multiplicity(y)``."""
    j = int(np.argmin(np.linalg.norm(data - point, axis=1)))
    y = data[j]
    diff = data - y
    dist = np.linalg.norm(diff, axis=1)
    tied = dist <= tie_tol
    if tied.all():
        return y.copy()
    r = np.linalg.norm((diff[~tied] / dist[~tied, None]).sum(axis=0))
    return y.copy() if r <= tied.sum() else None


def spatial_median(sample, cfg: MedianSolverConfig | None = None):
    """Minimizer of the summed Euclidean distance to the observations."""
    return solve_spatial_median(sample, cfg).point


def median_sandwich(sample, center):
    """Sandwich estimate ``C^{-1} Lambda C^{-1}`` of the asymptotic covariance
    of the spatial median, with

    ``Lambda = mean(u u^T)`` and ``C = mean((I - u u^T) / ||x - center||)``,
    ``u = (x - center) / ||x - center||``.  Rows equal to ``center`` are skipped.
    """
    data = as_sample(sample).data
    diff = data - center
    dist = np.linalg.norm(diff, axis=1)
    keep = dist > 1e-12 * (1.0 + np.linalg.norm(center))
    if keep.sum() < 2:
        raise TooFewRows("need at least two rows away from the median")
    u = diff[keep] / dist[keep, None]
    n = data.shape[0]
    s = data.shape[1]
    lam = u.T @ u / n
    c = np.eye(s) * (np.sum(1.0 / dist[keep]) / n) - (u.T * (1.0 / dist[keep])) @ u / n
    c_inv = np.linalg.inv(c)
    return symmetrize(c_inv @ lam @ c_inv)


def pooled_mean_and_scale(sample):
    """Pooled mean ``t = (1/n) sum n_i mean_i`` and scale
    ``B = ((1/n^2) sum n_i Cov_i)^{1/2}`` over the groups of ``sample``."""
    sample = as_sample(sample)
    groups = sample.split()
    n = sample.n
    t = np.zeros(sample.s)
    acc = np.zeros((sample.s, sample.s))
    for g in groups:
        if g.shape[0] < 2:
            raise TooFewRows("every group needs at least two rows")
        t += g.shape[0] * g.mean(axis=0)
        acc += g.shape[0] * covariance(g)
    return t / n, sym_sqrt(acc / n**2)
