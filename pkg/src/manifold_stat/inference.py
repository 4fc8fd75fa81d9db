"""Stabilized frames, quadratic statistics, confidence regions and tests.

A :class:`StabilizedFrame` bundles everything needed to evaluate the
statistic ``(mu_hat - mu)^T G Gamma^T Gamma G (mu_hat - mu)`` at an
estimate ``t_hat``: the projected location, tangent/normal projectors, the
stabilized derivative inverse ``G`` and the normalizing matrix ``Gamma``.
Unknown population quantities are replaced by their values at the empirical
estimate.  Differences between manifold points are chordal (taken in the
ambient space).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FullCircle, ModeMismatch, OnCutlocus, TooFewRows
from .estimators import (
    MedianSolverConfig,
    as_sample,
    covariance,
    mean_vector,
    median_sandwich,
    pooled_mean_and_scale,
    solve_spatial_median,
)
from .geometry import (
    Manifold,
    Mode,
    Sphere,
    as_mode,
    cut_tolerance,
    sym_inv_sqrt,
    sym_sqrt,
    symmetrize,
)
from .limitdist import ChiSquare, reference_law

FRAME_TOL = 1e-8
CIRCLE_SCAN_POINTS = 720
# diagnostics below this value are flagged as close to the cutlocus
DIAGNOSTIC_WARN = 3.0


def default_mode(manifold: Manifold) -> Mode:
    return Mode.SPHERE_TUNED if isinstance(manifold, Sphere) else Mode.STANDARD


@dataclass(frozen=True)
class StabilizedFrame:
    manifold: Manifold
    t: np.ndarray
    mu: np.ndarray
    tan: np.ndarray
    nor: np.ndarray
    G: np.ndarray
    Gamma: np.ndarray
    B: np.ndarray
    a_n: float
    mode: Mode
    gamma_kind: str = "corollary"

    @property
    def Q(self):
        """Quadratic form ``G Gamma^T Gamma G`` of the statistic."""
        gg = self.Gamma @ self.G
        return symmetrize(gg.T @ gg)

    def frame_residual(self) -> float:
        """``|| Gamma tan B B^T tan Gamma^T - tan ||``."""
        k = self.Gamma @ self.tan @ self.B
        return float(np.linalg.norm(k @ k.T - self.tan))

    def commutator_residual(self) -> float:
        return float(np.linalg.norm(self.Gamma @ self.tan - self.tan @ self.Gamma))

    def beta1(self) -> float:
        return beta1(self.manifold, self.mu, self.a_n**2 * self.B @ self.B.T)


def build_frame(manifold: Manifold, t, B, a_n, mode=None, gamma="corollary") -> StabilizedFrame:
    """Stabilized frame at the estimate ``t``.

    ``gamma="corollary"`` uses ``Gamma = a_n (nor + a_n^2 tan B B^T tan)^{-1/2}``.
    ``gamma="isotropic"`` uses ``Gamma = a_n beta^{-1/2} I`` and requires
    ``tan V tan = beta tan`` with ``V = a_n^2 B B^T`` (always true when m = 1).
    """
    mode = default_mode(manifold) if mode is None else as_mode(mode)
    t = manifold._vector(t)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    a_n = float(a_n)
    mu = manifold.project(t)
    tan = manifold.tangent_projector(mu)
    nor = np.eye(manifold.ambient_dim) - tan
    G = manifold.stabilization(t, mode)
    V = a_n**2 * B @ B.T
    tvt = symmetrize(tan @ V @ tan)
    if gamma == "corollary":
        Gamma = a_n * sym_inv_sqrt(nor + tvt)
    elif gamma == "isotropic":
        beta = float(np.trace(tvt)) / manifold.dim
        if np.linalg.norm(tvt - beta * tan) > 1e-8 * max(1.0, np.linalg.norm(tvt)):
            raise ModeMismatch("isotropic Gamma needs tan V tan proportional to tan")
        Gamma = (a_n / math.sqrt(beta)) * np.eye(manifold.ambient_dim)
    else:
        raise ValueError(f"unknown Gamma choice {gamma!r}")
    return StabilizedFrame(manifold, t, mu, tan, nor, G, Gamma, B, a_n, mode, gamma)


def beta1(manifold: Manifold, mu, V) -> float:
    """Scalar ``beta_1`` with ``tan V tan = beta_1 tan``; circle only."""
    if manifold.dim != 1:
        raise ModeMismatch("beta_1 is defined only for one-dimensional manifolds")
    tan = manifold.tangent_projector(mu)
    return float(np.trace(tan @ np.asarray(V, dtype=float) @ tan))


def quadratic_statistic(frame: StabilizedFrame, mu0) -> float:
    mu0 = frame.manifold.check_point(mu0)
    y = frame.Gamma @ (frame.G @ (frame.mu - mu0))
    return float(y @ y)


# ---------------------------------------------------------------------------
# confidence regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfidenceRegion:
    frame: StabilizedFrame
    threshold: float
    level: float
    law: object

    @property
    def center(self):
        return self.frame.mu

    @property
    def Q(self):
        return self.frame.Q

    @property
    def df(self):
        return self.frame.manifold.dim

    def statistic(self, mu):
        return quadratic_statistic(self.frame, mu)

    def contains(self, mu) -> bool:
        return self.statistic(mu) <= self.threshold


def confidence_region(manifold, t, B, a_n, level=0.95, law="chisq", mode=None,
                      gamma="corollary") -> ConfidenceRegion:
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    frame = build_frame(manifold, t, B, a_n, mode, gamma)
    ref = reference_law(manifold.dim, law)
    return ConfidenceRegion(frame, ref.quantile(level), level, ref)


def circle_interval(region: ConfidenceRegion):
    """Arc ``(lo, hi)`` in degrees covered by a region on the circle.

    Starting from the center, the statistic minus the threshold is scanned on a
    720-point grid in each direction until it turns positive; the crossing is
    then located by bisection.  Endpoints are reported in [0, 360).
    """
    manifold = region.frame.manifold
    if not (isinstance(manifold, Sphere) and manifold.s == 2):
        raise ModeMismatch("circle_interval needs a region on the circle")
    q = region.threshold
    c = math.atan2(region.center[1], region.center[0])

    def excess(offset):
        return region.statistic(np.array([math.cos(c + offset), math.sin(c + offset)])) - q

    step = 2.0 * math.pi / CIRCLE_SCAN_POINTS
    ends = []
    for direction in (-1.0, 1.0):
        prev = 0.0
        for k in range(1, CIRCLE_SCAN_POINTS // 2 + 1):
            off = direction * k * step
            if excess(off) > 0:
                lo, hi = prev, off
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    if excess(mid) > 0:
                        hi = mid
                    else:
                        lo = mid
                    if abs(hi - lo) < 1e-13:
                        break
                ends.append(0.5 * (lo + hi))
                break
            prev = off
        else:
            raise FullCircle("statistic stays below the threshold over the whole circle")
    lo_deg = math.degrees(c + ends[0]) % 360.0
    hi_deg = math.degrees(c + ends[1]) % 360.0
    return lo_deg, hi_deg


# ---------------------------------------------------------------------------
# tests
# ---------------------------------------------------------------------------

@dataclass
class TestOutcome:
    statistic: float
    df: int
    p_value: float
    law: object
    defined: bool = True
    reason: str = ""
    diagnostics: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self):
        out = {
            "defined": self.defined,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
        }
        out.update(self.law.describe())
        if self.reason:
            out["reason"] = self.reason
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def _undefined(df, law, reason):
    return TestOutcome(float("nan"), df, float("nan"), law, defined=False, reason=reason)


def _p_value(law, stat):
    return float(min(max(law.sf(stat), 0.0), 1.0))


def location_estimate(sample, functional="mean", cfg: MedianSolverConfig | None = None):
    """``(t_hat, B_hat)`` for the mean or spatial-median functional, with
    ``a_n = sqrt(n)`` absorbed into ``B_hat``."""
    sample = as_sample(sample)
    n = sample.n
    if functional == "mean":
        if n < 2:
            raise TooFewRows("mean functional needs at least two rows")
        return mean_vector(sample), sym_sqrt(covariance(sample)) / math.sqrt(n)
    if functional in ("median", "spatial-median", "spatialmedian"):
        res = solve_spatial_median(sample, cfg)
        return res.point, sym_sqrt(median_sandwich(sample, res.point)) / math.sqrt(n)
    raise ValueError(f"unknown functional {functional!r}")


def one_sample_test(manifold, sample, mu0, functional="mean", mode=None,
                    gamma="corollary", law="chisq", a_n=None, B=None) -> TestOutcome:
    """Test ``H0: location = mu0`` from one sample.

    By default ``a_n = sqrt(n)`` and ``B`` is the plug-in scale of the
    functional; both may be overridden (e.g. for stable-law inference).
    """
    sample = as_sample(sample)
    ref = reference_law(manifold.dim, law)
    t, B_hat = location_estimate(sample, functional)
    if a_n is None:
        a_n = math.sqrt(sample.n)
    if B is None:
        B = B_hat
    if manifold.cutlocus_distance(t) <= cut_tolerance(t):
        return _undefined(manifold.dim, ref, "estimate lies on the cutlocus")
    frame = build_frame(manifold, t, B, a_n, mode, gamma)
    stat = quadratic_statistic(frame, mu0)
    return TestOutcome(stat, manifold.dim, _p_value(ref, stat), ref,
                       diagnostics=cutlocus_diagnostics(manifold, t, sample.n))


def cutlocus_diagnostics(manifold, t, n) -> dict:
    """Speed-of-approach numbers ``sqrt(n) d(t, C)^2`` (general) and
    ``sqrt(n) d(t, C)`` (sphere with tuned stabilization)."""
    d = manifold.cutlocus_distance(t)
    root_n = math.sqrt(n)
    out = {
        "cutlocus_distance": d,
        "condition_general": root_n * d * d,
    }
    key = "condition_general"
    if isinstance(manifold, Sphere):
        out["condition_sphere"] = root_n * d
        key = "condition_sphere"
    out["near_cutlocus"] = bool(out[key] < DIAGNOSTIC_WARN)
    return out


def multisample_mean_inference(manifold, sample, level=0.95, mode=None,
                               gamma="corollary", law="chisq"):
    """Confidence region for the pooled mean location of grouped data.

    Returns ``(region, diagnostics)``; ``diagnostics`` carries the cutlocus
    speed conditions evaluated at the pooled estimate.
    """
    sample = as_sample(sample)
    t, B = pooled_mean_and_scale(sample)
    n = sample.n
    diag = cutlocus_diagnostics(manifold, t, n)
    diag["group_sizes"] = [int(g.shape[0]) for g in sample.split()]
    region = confidence_region(manifold, t, B, math.sqrt(n), level, law, mode, gamma)
    return region, diag


def two_sample_test(manifold, x, y, mode=None, gamma="corollary") -> TestOutcome:
    """Compare the pooled mean locations of two (possibly grouped) samples.

    The statistic is ``d^T [W_x + W_y]^{-1} d`` with ``d`` the difference of
    the two sample mean locations and ``W = G^{-1} (Gamma^T Gamma)^{-1} G^{-1}``
    built from each sample's own stabilized frame.
    """
    x, y = as_sample(x), as_sample(y)
    ref = ChiSquare(manifold.dim)
    frames = []
    for label, smp in (("first", x), ("second", y)):
        t, B = pooled_mean_and_scale(smp)
        if manifold.cutlocus_distance(t) <= cut_tolerance(t):
            return _undefined(manifold.dim, ref, f"{label} sample mean lies on the cutlocus")
        frames.append(build_frame(manifold, t, B, math.sqrt(smp.n), mode, gamma))
    w = np.zeros((manifold.ambient_dim, manifold.ambient_dim))
    for fr in frames:
        g_inv = np.linalg.inv(fr.G)
        w += g_inv @ np.linalg.inv(fr.Gamma.T @ fr.Gamma) @ g_inv.T
    d = frames[0].mu - frames[1].mu
    stat = float(d @ np.linalg.solve(symmetrize(w), d))
    stat = max(stat, 0.0)
    diags = {
        "first": cutlocus_diagnostics(manifold, frames[0].t, x.n),
        "second": cutlocus_diagnostics(manifold, frames[1].t, y.n),
    }
    return TestOutcome(stat, manifold.dim, _p_value(ref, stat), ref, diagnostics=diags)


# ---------------------------------------------------------------------------
# speed conditions
# ---------------------------------------------------------------------------

def _decreasing_tail(values):
    values = np.asarray(values, dtype=float)
    half = values[len(values) // 2:]
    if len(half) < 2:
        half = values[-2:]
    return bool(np.all(half[1:] < half[:-1] * (1.0 - 1e-12)))


def speed_condition(manifold, t_sequence, B_sequence, gamma_norms):
    """Ratios ``||B||/d``, ``||Gamma|| ||B||^2/d^2`` and ``||Gamma|| ||B||^2/d``
    along a sequence, each with a flag telling whether it decreases
    monotonically over the second half of the sequence."""
    if not (len(t_sequence) == len(B_sequence) == len(gamma_norms)):
        raise ValueError("sequences must have equal length")
    if len(t_sequence) < 2:
        raise ValueError("sequences need at least two entries")
    r_b, r_g2, r_g1 = [], [], []
    for t, B, gn in zip(t_sequence, B_sequence, gamma_norms):
        d = manifold.cutlocus_distance(t)
        if d <= cut_tolerance(t):
            raise OnCutlocus("sequence element on the cutlocus")
        b = float(np.linalg.norm(np.atleast_2d(B), 2))
        r_b.append(b / d)
        r_g2.append(gn * b * b / d**2)
        r_g1.append(gn * b * b / d)
    return {
        "bias_ratio": r_b,
        "general_ratio": r_g2,
        "sphere_ratio": r_g1,
        "bias_ratio_decreasing": _decreasing_tail(r_b),
        "general_ratio_decreasing": _decreasing_tail(r_g2),
        "sphere_ratio_decreasing": _decreasing_tail(r_g1),
    }
