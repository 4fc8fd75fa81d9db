"""Random data generators and Monte Carlo experiments.

Every replication draws from its own generator seeded by
``(seed, replication index)``, so results do not depend on scheduling or on
the number of worker threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError, DomainError, GeneratorFailure, OnCutlocus
from .estimators import LabeledSample
from .geometry import (
    Manifold,
    Mode,
    Sphere,
    Stiefel,
    as_mode,
    cut_tolerance,
    parse_manifold,
    sym_sqrt,
)
from .inference import (
    build_frame,
    default_mode,
    location_estimate,
    quadratic_statistic,
)
from .limitdist import reference_law, stable_rate_and_scale


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for the ``stream``-th independent stream of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("MANIFOLD_STAT_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def sample_rotsym_sphere(mu, kappa, n, rng) -> LabeledSample:
    """Projected normal law: ``x = z / ||z||`` with ``z ~ N(kappa mu, I)``.

    Rotationally symmetric about ``mu``; ``kappa = 0`` is the uniform law.
    """
    mu = np.asarray(mu, dtype=float)
    if kappa < 0:
        raise DomainError("kappa must be nonnegative")
    z = rng.standard_normal((n, mu.shape[0])) + kappa * mu
    norms = np.linalg.norm(z, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        z[bad] = rng.standard_normal((int(bad.sum()), mu.shape[0])) + kappa * mu
        norms = np.linalg.norm(z, axis=1)
    return LabeledSample(z / norms[:, None])


def _uniform_directions(n, s, rng):
    z = rng.standard_normal((n, s))
    return z / np.linalg.norm(z, axis=1)[:, None]


def sample_pareto_spherical(a, alpha, C, n, rng) -> LabeledSample:
    """Spherical law about ``a`` with ``P(||x - a|| > r) = C r^{-alpha}`` for
    ``r >= C^{1/alpha}``."""
    if not 1.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (1, 2)")
    if not C > 0:
        raise DomainError("C must be positive")
    a = np.asarray(a, dtype=float)
    delta = C ** (1.0 / alpha)
    u = 1.0 - rng.random(n)  # in (0, 1]
    radius = delta * u ** (-1.0 / alpha)
    return LabeledSample(a + radius[:, None] * _uniform_directions(n, a.shape[0], rng))


def sample_positive_stable(beta, n, rng):
    """Positive stable variables with Laplace transform ``exp(-lambda^beta)``,
    ``0 < beta < 1`` (Kanter's representation)."""
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)")
    u = rng.random(n) * math.pi
    e = rng.exponential(size=n)
    return (np.sin(beta * u) / np.sin(u) ** (1.0 / beta)) * (
        np.sin((1.0 - beta) * u) / e
    ) ** ((1.0 - beta) / beta)


def sample_spherical_stable(s, alpha, n, rng):
    """Vectors in R^s with characteristic function ``exp(-||t||^alpha)``, as the
    scale mixture ``sqrt(A) N`` with ``A`` positive (alpha/2)-stable and
    ``N ~ N(0, 2 I)``."""
    if not 0.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (0, 2)")
    a = sample_positive_stable(alpha / 2.0, n, rng)
    return np.sqrt(2.0 * a)[:, None] * rng.standard_normal((n, s))


def sample_projected_gaussian_stiefel(manifold: Stiefel, mu, sigma, n, rng,
                                      max_attempts=100) -> LabeledSample:
    """``x = pi(mu + sigma E)`` with i.i.d. standard normal ``E``; the rare
    near rank-deficient draws are redrawn."""
    mu = manifold.check_point(mu)
    p, r = manifold.p, manifold.r
    t = mu + sigma * rng.standard_normal((n, manifold.ambient_dim))
    for _ in range(max_attempts):
        mats = t.reshape(n, r, p).transpose(0, 2, 1)  # column-major points
        u, sv, vt = np.linalg.svd(mats, full_matrices=False)
        bad = sv[:, -1] <= 1e-8
        if not bad.any():
            x = u @ vt
            return LabeledSample(x.transpose(0, 2, 1).reshape(n, p * r))
        t[bad] = mu + sigma * rng.standard_normal((int(bad.sum()), manifold.ambient_dim))
    raise GeneratorFailure("could not draw a full-rank perturbation")


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One coverage/calibration campaign.

    ``law`` is a dict with a ``kind`` of ``rotsym`` (``kappa``),
    ``projected_gaussian`` (``sigma``) or ``pareto`` (``alpha``, ``C``), and an
    optional ``location``; the default location is the first basis point.
    """

    manifold: str
    law: dict
    n: int
    replications: int
    level: float = 0.95
    functional: str = "mean"
    mode: str | None = None
    gamma: str = "corollary"
    seed: int = 0
    keep_statistics: bool = True

    def __post_init__(self):
        try:
            self._manifold = parse_manifold(self.manifold)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n < self._manifold.ambient_dim + 1:
            raise ConfigError("n must be at least s + 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if not isinstance(self.law, dict) or "kind" not in self.law:
            raise ConfigError("law must be a mapping with a 'kind' entry")
        if self.law["kind"] not in ("rotsym", "projected_gaussian", "pareto"):
            raise ConfigError(f"unknown law kind {self.law['kind']!r}")

    @property
    def manifold_obj(self) -> Manifold:
        return self._manifold

    def to_dict(self):
        d = asdict(self)
        d.pop("keep_statistics", None)
        return d

    def true_location(self):
        m = self._manifold
        loc = self.law.get("location")
        if loc is not None:
            return m.check_point(np.asarray(loc, dtype=float))
        if isinstance(m, Stiefel):
            return m.flatten(np.eye(m.p, m.r))
        e = np.zeros(m.ambient_dim)
        e[0] = 1.0
        return e


def _draw(cfg: ExperimentConfig, rng):
    m = cfg.manifold_obj
    mu = cfg.true_location()
    kind = cfg.law["kind"]
    if kind == "rotsym":
        if not isinstance(m, Sphere):
            raise ConfigError("rotsym law needs a sphere")
        return sample_rotsym_sphere(mu, float(cfg.law.get("kappa", 1.0)), cfg.n, rng)
    if kind == "projected_gaussian":
        if not isinstance(m, Stiefel):
            raise ConfigError("projected_gaussian law needs a Stiefel manifold")
        return sample_projected_gaussian_stiefel(m, mu, float(cfg.law.get("sigma", 0.1)), cfg.n, rng)
    # pareto: spherical heavy-tailed law centred at a point with the given
    # location, scaled by ``radius`` (default 1)
    center = float(cfg.law.get("radius", 1.0)) * mu
    return sample_pareto_spherical(center, float(cfg.law["alpha"]), float(cfg.law.get("C", 1.0)), cfg.n, rng)


def _replicate(cfg: ExperimentConfig, index: int):
    m = cfg.manifold_obj
    rng = rng_stream(cfg.seed, index)
    sample = _draw(cfg, rng)
    mode = default_mode(m) if cfg.mode is None else as_mode(cfg.mode)
    if cfg.law["kind"] == "pareto":
        if cfg.functional != "mean":
            raise ConfigError("pareto experiments use the mean functional")
        alpha = float(cfg.law["alpha"])
        rate, V = stable_rate_and_scale(m.ambient_dim, alpha, float(cfg.law.get("C", 1.0)))
        a_n = rate(cfg.n)
        t = sample.data.mean(axis=0)
        B = sym_sqrt(V) / a_n
    else:
        t, B = location_estimate(sample, cfg.functional)
        a_n = math.sqrt(cfg.n)
    if m.cutlocus_distance(t) <= cut_tolerance(t):
        return None
    try:
        frame = build_frame(m, t, B, a_n, mode, cfg.gamma)
    except OnCutlocus:
        return None
    return quadratic_statistic(frame, cfg.true_location())


def _reference(cfg: ExperimentConfig):
    m = cfg.manifold_obj
    if cfg.law["kind"] == "pareto":
        return reference_law(m.dim, f"stable:{float(cfg.law['alpha'])}")
    return reference_law(m.dim, "chisq")


def _run_statistics(cfg: ExperimentConfig):
    threads = min(max_threads(), cfg.replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda i: _replicate(cfg, i), range(cfg.replications)))
    return [_replicate(cfg, i) for i in range(cfg.replications)]


def coverage_experiment(cfg: ExperimentConfig) -> dict:
    """Coverage of the level-``cfg.level`` region and a Kolmogorov-Smirnov
    comparison of the statistic against its reference law.

    Replications whose estimate falls in the cutlocus band are counted and
    excluded from the denominator.
    """
    results = _run_statistics(cfg)
    ref = _reference(cfg)
    stats_arr = np.array([r for r in results if r is not None], dtype=float)
    n_cut = sum(r is None for r in results)
    threshold = ref.quantile(cfg.level)
    report = {
        "config": cfg.to_dict(),
        "reference": ref.describe(),
        "threshold": threshold,
        "replications": cfg.replications,
        "cutlocus_replications": int(n_cut),
        "valid_replications": int(stats_arr.size),
    }
    if stats_arr.size:
        report["coverage"] = float(np.mean(stats_arr <= threshold))
        ks = stats.kstest(stats_arr, ref.cdf)
        report["ks_statistic"] = float(ks.statistic)
        report["ks_pvalue"] = float(ks.pvalue)
    else:
        report["coverage"] = None
    if cfg.keep_statistics:
        report["statistics"] = [None if r is None else float(r) for r in results]
    return report


def rejection_experiment(manifold: Manifold, draw_x, draw_y, replications, seed,
                         level=0.05, mode=None, threads=None) -> dict:
    """Rejection rate of the two-sample test; ``draw_x``/``draw_y`` map a
    generator to a sample."""
    from .inference import two_sample_test

    def one(i):
        rng = rng_stream(seed, i)
        out = two_sample_test(manifold, draw_x(rng), draw_y(rng), mode=mode)
        return out.p_value if out.defined else None

    threads = threads or min(max_threads(), replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pvals = list(pool.map(one, range(replications)))
    else:
        pvals = [one(i) for i in range(replications)]
    valid = np.array([p for p in pvals if p is not None])
    return {
        "replications": replications,
        "undefined": int(sum(p is None for p in pvals)),
        "level": level,
        "rejection_rate": float(np.mean(valid < level)) if valid.size else None,
        "p_values": [None if p is None else float(p) for p in pvals],
    }


# ---------------------------------------------------------------------------
# deterministic demonstrations
# ---------------------------------------------------------------------------

def necessity_demo(a_sequence, u_sequence) -> list[dict]:
    """Circle example with ``t = (u, 0)``, ``t_hat = (u, 1/a)``, ``B = 1/a``:
    exact normal and tangential coordinates of ``Gamma G (mu_hat - mu)``
    next to the predicted normal limit ``-1 / (2 a u^2)``.

    The closed form is evaluated as ``(1 + (a u)^{-2})^{-1/2} - 1`` via
    ``expm1``/``log1p`` to stay exact when ``a u`` is large.
    """
    rows = []
    for a, u in zip(a_sequence, u_sequence):
        a, u = float(a), float(u)
        if a <= 0 or u <= 0:
            raise DomainError("a_n and u_n must be positive")
        x = (a * u) ** -2
        tangential_m1 = math.expm1(-0.5 * math.log1p(x))
        rows.append({
            "a_n": a,
            "u_n": u,
            "a_u2": a * u * u,
            "normal": a * tangential_m1,
            "tangential": 1.0 + tangential_m1,
            "predicted_normal": -0.5 / (a * u * u),
        })
    return rows


def necessity_demo_matrix(a, u):
    """The same quantity computed through the general machinery (frame at
    ``t = (u, 0)`` with standard stabilization, ``Gamma = a``)."""
    circle = Sphere(2)
    frame = build_frame(circle, [u, 0.0], np.eye(2) / a, a, Mode.STANDARD)
    mu_hat = circle.project([u, 1.0 / a])
    return frame.Gamma @ frame.G @ (mu_hat - frame.mu)


def _trend(ns, values):
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = values > 0
    if ok.sum() < 2:
        return "bounded", 0.0
    slope = float(np.polyfit(np.log(ns[ok]), np.log(values[ok]), 1)[0])
    if slope <= 0.02:
        return "bounded", slope
    if slope <= 0.25:
        return "marginal", slope
    return "diverging", slope


def multisample_rate_demo(gamma1, gamma2, a1, schedule) -> dict:
    """Two-group sphere example with ``gamma1 a1 + gamma2 a2 = 0``:
    ``t_n = (1 + gamma1/gamma2)(n1/n - gamma1/(gamma1 + gamma2)) a1`` and the
    condition value ``sqrt(n) ||t_n||`` per schedule entry ``(n1, n)``.

    The overall trend is classified from the log-log slope of the condition
    value against ``n``: ``bounded`` (<= 0.02), ``marginal`` (<= 0.25) or
    ``diverging``.
    """
    a1 = np.asarray(a1, dtype=float)
    if not np.any(a1):
        raise DomainError("a1 must be nonzero")
    if not gamma2 > 0 or gamma1 < 0:
        raise DomainError("need gamma1 >= 0 and gamma2 > 0")
    rows = []
    for n1, n in schedule:
        frac = n1 / n - gamma1 / (gamma1 + gamma2)
        t = (1.0 + gamma1 / gamma2) * frac * a1
        d = float(np.linalg.norm(t))
        on_cut = d <= cut_tolerance(t)
        rows.append({
            "n1": n1,
            "n": n,
            "t": t.tolist(),
            "cutlocus_distance": d,
            "condition": math.sqrt(n) * d,
            "on_cutlocus": bool(on_cut),
        })
    trend, slope = _trend([r["n"] for r in rows], [r["condition"] for r in rows])
    return {"rows": rows, "trend": trend, "loglog_slope": slope}
