"""Reference laws for the quadratic statistic.

``ChiSquare(m)`` is the Gaussian-limit law.  ``StableZetaSq(m, alpha)`` is the
law of ``Z_1^2 + ... + Z_m^2`` where ``(Z_1, ..., Z_m)`` has characteristic
function ``exp(-||t||^alpha)``; its density is the Hankel-type integral

    g(x) = 1 / (2^{m/2} Gamma(m/2) r) * int_0^inf (r u)^{m/2} J_{m/2-1}(r u) exp(-u^alpha) du,

with ``r = sqrt(x)``.  Integrating in ``r`` under the integral sign with
``d/dz [z^{m/2} J_{m/2}(z)] = z^{m/2} J_{m/2-1}(z)`` gives the CDF

    F(x) = 2 / (2^{m/2} Gamma(m/2)) * int_0^inf (r u)^{m/2} J_{m/2}(r u) exp(-u^alpha) du / u,

which avoids integrating the heavy-tailed density out to infinity.  For large
``r`` both are replaced by the tail expansion

    P(zeta^2 > r^2) = sum_{k>=1} (-1)^{k+1} / k! * 2^{k alpha} Gamma((m + k alpha)/2)
                      / (Gamma(m/2) Gamma(1 - k alpha/2)) * r^{-k alpha}

(convergent for alpha < 1, asymptotic otherwise; used only when its terms
have shrunk below 1e-15).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .errors import DomainError, QuadratureFailure

_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)
_QUAD_ABS_TOL = 1e-12
_MAX_SPLIT_ROUNDS = 40
_GEOMETRIC_LEVELS = 50


# ---------------------------------------------------------------------------
# chi-square
# ---------------------------------------------------------------------------

def chisq_cdf(m, x):
    if m < 1:
        raise DomainError("degrees of freedom must be >= 1")
    if x < 0:
        raise DomainError("chi-square argument must be nonnegative")
    return float(special.gammainc(m / 2.0, x / 2.0))


def chisq_quantile(m, p):
    if m < 1:
        raise DomainError("degrees of freedom must be >= 1")
    if not 0.0 < p < 1.0:
        raise DomainError("probability must lie in (0, 1)")
    return float(2.0 * special.gammaincinv(m / 2.0, p))


# ---------------------------------------------------------------------------
# oscillatory quadrature
# ---------------------------------------------------------------------------

def _gl_panels(f, a, b):
    """Return (20-point estimate, |20-point - 10-point|) per panel."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    out = []
    for nodes, weights in (_GL_HI, _GL_LO):
        u = mid[:, None] + half[:, None] * nodes[None, :]
        out.append(half * (f(u) @ weights))
    return out[0], np.abs(out[0] - out[1])


def _panel_edges(freq, upper):
    width = min(math.pi / freq, 0.5) if freq > 0 else 0.5
    n = max(1, math.ceil(upper / width))
    edges = np.linspace(0.0, upper, n + 1)
    # geometric refinement of the first panel: exp(-u^alpha) is not smooth at 0
    first = edges[1]
    geo = first * 0.5 ** np.arange(_GEOMETRIC_LEVELS, 0, -1)
    return np.concatenate(([0.0], geo, edges[1:]))


def oscillatory_integral(f, freq, upper, abs_tol=_QUAD_ABS_TOL):
    """Integrate ``f`` over ``[0, upper]``, where ``f`` oscillates with angular
    frequency about ``freq``.

    Panels are half-periods (at most 0.5 wide), with geometric refinement at
    the origin; each panel uses a 20-point Gauss-Legendre rule checked against
    a 10-point rule, and panels whose discrepancy exceeds their share of
    ``abs_tol`` are bisected.  Returns ``(value, error_estimate)``.
    """
    edges = _panel_edges(freq, upper)
    a, b = edges[:-1], edges[1:]
    total = 0.0
    err_total = 0.0
    for _ in range(_MAX_SPLIT_ROUNDS):
        val, err = _gl_panels(f, a, b)
        share = abs_tol / max(len(a), 1)
        bad = err > share
        total += float(np.sum(val[~bad]))
        err_total += float(np.sum(err[~bad]))
        if not bad.any():
            return total, err_total
        a, b = a[bad], b[bad]
        mid = 0.5 * (a + b)
        a, b = np.concatenate((a, mid)), np.concatenate((mid, b))
    raise QuadratureFailure("oscillatory quadrature did not reach tolerance",
                            error_estimate=err_total + float(np.sum(err)))


def _upper_limit(alpha):
    # exp(-U^alpha) < 1e-16
    return 36.85 ** (1.0 / alpha)


# ---------------------------------------------------------------------------
# stable zeta^2 law
# ---------------------------------------------------------------------------

def _check_stable(m, alpha):
    if int(m) != m or m < 1:
        raise DomainError("dimension m must be a positive integer")
    if not 0.0 < alpha < 2.0:
        raise DomainError("stable index alpha must lie in (0, 2)")


def _norm_const(m):
    return 2.0 / (2.0 ** (m / 2.0) * math.gamma(m / 2.0))


def _tail_terms(m, alpha, kmax=200):
    """Coefficients ``c_k`` with ``P(zeta^2 > r^2) ~ sum_k c_k r^{-k alpha}``."""
    k = np.arange(1, kmax + 1, dtype=float)
    ka = k * alpha
    rg = special.rgamma(1.0 - ka / 2.0)
    logmag = (ka * math.log(2.0) + special.gammaln((m + ka) / 2.0)
              - special.gammaln(m / 2.0) - special.gammaln(k + 1.0))
    with np.errstate(divide="ignore"):
        logmag = logmag + np.log(np.abs(rg))
    sign = np.where(k % 2 == 1, 1.0, -1.0) * np.sign(rg)
    return k, ka, logmag, sign


def tail_series(m, alpha, r, derivative=False):
    """Tail expansion of ``P(zeta_m^2 > r^2)`` (or, with ``derivative``, the
    density of ``||Z||`` at ``r``).

    Returns ``(value, ok)``; ``ok`` is False when the terms never fall below
    1e-15 or the partial sums suffer heavy cancellation, in which case the
    value should not be used.
    """
    _, ka, logmag, sign = _tail_terms(m, alpha)
    logr = math.log(r)
    if derivative:
        with np.errstate(divide="ignore"):
            logmag = logmag + np.log(ka) - (ka + 1.0) * logr
    else:
        logmag = logmag - ka * logr
    with np.errstate(over="ignore"):
        mags = np.exp(logmag)
    finite = np.isfinite(mags)
    if not finite.all():
        return float("nan"), False
    if mags.max() > 1e2:
        return float("nan"), False
    small = np.nonzero((mags < 1e-15) & (sign != 0))[0]
    nonzero = np.nonzero(sign != 0)[0]
    if small.size == 0 or nonzero.size == 0:
        return float("nan"), False
    # truncate where the terms are smallest (asymptotic series) but only once
    # they have become negligible
    stop = small[0]
    terms = sign[: stop + 1] * mags[: stop + 1]
    return float(np.sum(terms)), True


@dataclass(frozen=True)
class ChiSquare:
    m: int

    name = "chisq"

    def cdf(self, x):
        if np.ndim(x):
            return special.gammainc(self.m / 2.0, np.maximum(x, 0.0) / 2.0)
        return chisq_cdf(self.m, max(float(x), 0.0))

    def sf(self, x):
        if np.ndim(x):
            return special.gammaincc(self.m / 2.0, np.maximum(x, 0.0) / 2.0)
        return float(special.gammaincc(self.m / 2.0, max(float(x), 0.0) / 2.0))

    def quantile(self, p):
        return chisq_quantile(self.m, p)

    def describe(self):
        return {"law": "chisq", "df": self.m}


@dataclass(frozen=True)
class StableZetaSq:
    """Squared norm of the first ``m`` coordinates of a spherically symmetric
    stable vector with characteristic function ``exp(-||t||^alpha)``."""

    m: int
    alpha: float

    name = "stable"

    def __post_init__(self):
        _check_stable(self.m, self.alpha)

    # densities ------------------------------------------------------------
    def density(self, x, method="auto"):
        x = float(x)
        if x <= 0:
            raise DomainError("density argument must be positive")
        r = math.sqrt(x)
        if method in ("auto", "series"):
            val, ok = tail_series(self.m, self.alpha, r, derivative=True)
            if ok:
                return max(val / (2.0 * r), 0.0)
            if method == "series":
                raise QuadratureFailure("tail series not accurate at this argument")
        m, alpha = self.m, self.alpha
        nu = m / 2.0 - 1.0

        def integrand(u):
            z = r * u
            return z ** (m / 2.0) * special.jv(nu, z) * np.exp(-u ** alpha)

        val, _ = oscillatory_integral(integrand, r, _upper_limit(alpha))
        g = 0.5 * _norm_const(m) * val / r
        if g < -1e-8:
            raise QuadratureFailure(f"density came out negative ({g:.3e})", abs(g))
        return max(g, 0.0)

    def radial_density(self, r, method="auto"):
        """Density of ``zeta = sqrt(zeta^2)`` at ``r``."""
        return 2.0 * r * self.density(r * r, method=method)

    # distribution function -------------------------------------------------
    def sf(self, x, method="auto"):
        if np.ndim(x):
            return np.array([self.sf(v, method) for v in np.ravel(x)]).reshape(np.shape(x))
        x = float(x)
        if x <= 0:
            return 1.0
        r = math.sqrt(x)
        if method in ("auto", "series"):
            val, ok = tail_series(self.m, self.alpha, r)
            if ok:
                return min(max(val, 0.0), 1.0)
            if method == "series":
                raise QuadratureFailure("tail series not accurate at this argument")
        return 1.0 - self._cdf_quad(r)

    def cdf(self, x, method="auto"):
        if np.ndim(x):
            return np.array([self.cdf(v, method) for v in np.ravel(x)]).reshape(np.shape(x))
        x = float(x)
        if x <= 0:
            return 0.0
        if method == "quad":
            return self._cdf_quad(math.sqrt(x))
        return 1.0 - self.sf(x, method)

    def _cdf_quad(self, r):
        m, alpha = self.m, self.alpha

        def integrand(u):
            z = r * u
            return z ** (m / 2.0) * special.jv(m / 2.0, z) * np.exp(-u ** alpha) / u

        val, _ = oscillatory_integral(integrand, r, _upper_limit(alpha))
        return min(max(_norm_const(m) * val, 0.0), 1.0)

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise DomainError("probability must lie in (0, 1)")
        hi = 1.0
        while self.cdf(hi) < p:
            hi *= 4.0
            if hi > 1e300:
                raise QuadratureFailure("quantile bracket diverged")
        lo = 0.0
        return float(brentq(lambda v: self.cdf(v) - p, lo, hi, xtol=1e-12, rtol=1e-10))

    def describe(self):
        return {"law": "stable", "df": self.m, "alpha": self.alpha}


def zeta_sq_density(m, alpha, s2):
    return StableZetaSq(m, alpha).density(s2)


def zeta_sq_cdf(m, alpha, x):
    if x < 0:
        raise DomainError("argument must be nonnegative")
    return StableZetaSq(m, alpha).cdf(x)


def zeta_sq_quantile(m, alpha, p):
    return StableZetaSq(m, alpha).quantile(p)


def reference_law(m, law="chisq"):
    """Build a law from ``"chisq"``, ``"stable:<alpha>"``, ``("stable", alpha)``
    or an existing law object."""
    if isinstance(law, (ChiSquare, StableZetaSq)):
        if law.m != m:
            raise DomainError(f"law has df {law.m}, manifold dimension is {m}")
        return law
    if isinstance(law, tuple):
        kind, alpha = law
        return reference_law(m, f"{kind}:{alpha}")
    text = str(law).strip().lower()
    if text in ("chisq", "chi2", "gaussian"):
        return ChiSquare(m)
    if text.startswith("stable:"):
        return StableZetaSq(m, float(text.split(":", 1)[1]))
    raise DomainError(f"unknown law {law!r}")


def stable_rate_and_scale(s, alpha, C):
    """Rate ``n -> n^{1 - 1/alpha}`` and the isotropic scale matrix

    ``V = 1/4 (C Gamma(s/2) Gamma(1 - alpha/2) / Gamma((s + alpha)/2))^{2/alpha} I_s``

    for the sample mean of a spherical law with radial tail ``C r^{-alpha}``.
    Only ``1 < alpha < 2`` gives a diverging rate.
    """
    if not 1.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (1, 2) for the sample-mean rate to diverge")
    if not C > 0:
        raise DomainError("tail constant C must be positive")
    base = C * math.gamma(s / 2.0) * math.gamma(1.0 - alpha / 2.0) / math.gamma((s + alpha) / 2.0)
    v = 0.25 * base ** (2.0 / alpha)

    def rate(n):
        return float(n) ** (1.0 - 1.0 / alpha)

    return rate, v * np.eye(s)


def tabulate(law, grid):
    """Rows ``(x, density, cdf)`` on ``grid``; the chi-square law uses scipy's pdf."""
    rows = []
    for x in grid:
        x = float(x)
        if isinstance(law, ChiSquare):
            from scipy.stats import chi2
            dens = float(chi2.pdf(x, law.m))
        else:
            dens = law.density(x) if x > 0 else float("nan")
        rows.append((x, dens, float(law.cdf(x))))
    return rows


def write_table_csv(path_or_file, law, grid):
    rows = tabulate(law, grid)
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file  # noqa: SIM115
    try:
        w = csv.writer(fh)
        w.writerow(["s2", "density", "cdf"])
        for x, d, c in rows:
            w.writerow([repr(x), repr(d), repr(c)])
    finally:
        if own:
            fh.close()
    return rows
