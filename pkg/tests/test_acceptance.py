"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import json
import math
import time

import numpy as np
from conftest import fd_jacobian, random_offcut
from test_estimators import grid_oracle_min, random_rotation
from test_limitdist import total_mass

from manifold_stat.cli import main
from manifold_stat.estimators import median_objective, spatial_median
from manifold_stat.geometry import Mode, Sphere, Stiefel, sym_sqrt
from manifold_stat.inference import circle_interval, confidence_region
from manifold_stat.limitdist import zeta_sq_density
from manifold_stat.simulate import (
    ExperimentConfig,
    coverage_experiment,
    necessity_demo,
    necessity_demo_matrix,
    rejection_experiment,
    sample_rotsym_sphere,
)

SEED = 20240611


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} | {detail}")
    assert ok, detail


# 1 ------------------------------------------------------------------------------

def test_c01_circle_example(capsys):
    start = time.perf_counter()
    eta = np.array([-0.661, 0.647])
    v = np.array([[0.148, 0.201], [0.201, 0.379]])
    n = 14
    circle = Sphere(2)
    arcs = {}
    for gamma in ("isotropic", "corollary"):
        region = confidence_region(circle, eta, sym_sqrt(v) / math.sqrt(n), math.sqrt(n), 0.95,
                                   "chisq", Mode.SPHERE_TUNED, gamma)
        arcs[gamma] = circle_interval(region)
    fr = region.frame
    angle = circle.angle_deg(fr.mu)
    norm = float(np.linalg.norm(eta))
    b1 = fr.beta1()
    elapsed = time.perf_counter() - start
    ok = (abs(angle - 135.6) <= 0.1 and abs(norm - 0.925) <= 1e-3 and abs(b1 - 0.467) <= 1e-3
          and all(abs(lo - 113.3) <= 0.3 and abs(hi - 157.9) <= 0.3 for lo, hi in arcs.values())
          and elapsed < 1.0)
    detail = (f"angle={angle:.3f} |eta|={norm:.4f} beta1={b1:.4f} "
              + " ".join(f"{k}=({lo:.2f},{hi:.2f})" for k, (lo, hi) in arcs.items())
              + f" t={elapsed:.3f}s")
    report(capsys, 1, "circle example reproduction", ok, detail)


# 2 ------------------------------------------------------------------------------

def test_c02_stiefel_cutlocus_oracle(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(500):
        p = int(rng.integers(1, 7))
        r = int(rng.integers(1, p + 1))
        t = rng.standard_normal((p, r)) * rng.uniform(0.1, 3.0)
        u, s, vt = np.linalg.svd(t, full_matrices=False)
        s_trunc = s.copy()
        s_trunc[-1] = 0.0
        oracle = np.linalg.norm(t - (u * s_trunc) @ vt)
        m = Stiefel(p, r)
        worst = max(worst, abs(m.cutlocus_distance(m.flatten(t)) - oracle))
    elapsed = time.perf_counter() - start
    report(capsys, 2, "Stiefel cutlocus distance vs truncated SVD", worst <= 1e-10 and elapsed < 5.0,
           f"max|diff|={worst:.2e} t={elapsed:.2f}s")


# 3 ------------------------------------------------------------------------------

JAC_MANIFOLDS = [Sphere(2), Sphere(3), Sphere(5), Stiefel(3, 2), Stiefel(4, 3), Stiefel(3, 3)]


def test_c03_jacobian(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    for m in JAC_MANIFOLDS:
        for _ in range(200):
            t = random_offcut(m, rng, 0.1)
            jac = m.projection_jacobian(t)
            fd = fd_jacobian(m.project, t)
            worst = max(worst, np.linalg.norm(jac - fd) / np.linalg.norm(jac))
    elapsed = time.perf_counter() - start
    report(capsys, 3, "projection Jacobian vs finite differences", worst <= 1e-6 and elapsed < 10.0,
           f"max rel err={worst:.2e} over {len(JAC_MANIFOLDS)}x200 points t={elapsed:.2f}s")


# 4 ------------------------------------------------------------------------------

def test_c04_derivative_bound(capsys):
    rng = np.random.default_rng(SEED + 4)
    worst_excess = -np.inf
    for m in JAC_MANIFOLDS:
        for _ in range(1000):
            t = random_offcut(m, rng, 1e-3)
            op = np.linalg.norm(m.projection_jacobian(t), 2)
            bound = m.distance_to_manifold(t) / m.cutlocus_distance(t) + 1.0
            worst_excess = max(worst_excess, (op - bound) / bound)
    sharp = 0.0
    for s in (2, 3, 5):
        sph = Sphere(s)
        for _ in range(1000):
            t = sph.random_point(rng) * rng.uniform(1e-3, 1.0 - 1e-9)
            op = np.linalg.norm(sph.projection_jacobian(t), 2)
            bound = sph.distance_to_manifold(t) / sph.cutlocus_distance(t) + 1.0
            sharp = max(sharp, abs(op - bound) / bound)
    ok = worst_excess <= 1e-12 and sharp <= 1e-9
    report(capsys, 4, "derivative bound and its sharpness on spheres", ok,
           f"max rel excess={worst_excess:.2e} sphere |op-bound|/bound={sharp:.2e}")


# 5 ------------------------------------------------------------------------------

def fiber_pair(m, rng):
    """Two off-cutlocus points projecting to the same manifold point."""
    mu = m.random_point(rng)
    if isinstance(m, Sphere):
        c0, c1 = rng.uniform(-0.95, 3.0, size=2)
        return mu, mu * (1 + c0), mu * (1 + c1)
    mat = m.as_matrix(mu)
    out = []
    for _ in range(2):
        a = rng.standard_normal((m.r, m.r))
        s = a + a.T
        s *= rng.uniform(0.05, 0.95) / np.linalg.norm(s, 2)
        out.append(m.flatten(mat @ (np.eye(m.r) + s)))
    return mu, out[0], out[1]


def test_c05_fiber_convexity(capsys):
    rng = np.random.default_rng(SEED + 5)
    worst = 0.0
    alphas = np.arange(1, 10) / 10
    for m in JAC_MANIFOLDS:
        for _ in range(200):
            mu, t0, t1 = fiber_pair(m, rng)
            assert np.linalg.norm(m.project(t0) - mu) < 1e-10
            assert np.linalg.norm(m.project(t1) - mu) < 1e-10
            for a in alphas:
                worst = max(worst, np.linalg.norm(m.project((1 - a) * t0 + a * t1) - mu))
    report(capsys, 5, "convexity of projection fibers", worst <= 1e-8,
           f"max |pi(t_a)-mu|={worst:.2e} over {len(JAC_MANIFOLDS)}x200 pairs x 9 alphas")


# 6 ------------------------------------------------------------------------------

def test_c06_necessity_demo(capsys):
    row = necessity_demo([1e4], [1e-2])[0]
    rel = abs(row["normal"] / row["predicted_normal"] - 1.0)
    vec = necessity_demo_matrix(1e4, 1e-2)
    route = abs(vec[0] - row["normal"]) / abs(row["normal"])
    ns = np.geomspace(1e2, 1e10, 9)
    seq = necessity_demo(ns, ns**-0.25)
    tang = [r["tangential"] for r in seq]
    tang_ok = abs(tang[-1] - 1.0) < 1e-6 and all(np.diff(tang) > 0)
    ok = rel < 1e-3 and route < 1e-8 and tang_ok and abs(row["tangential"] - 1) < 1e-3
    report(capsys, 6, "necessity example: normal and tangential coordinates", ok,
           f"normal={row['normal']:.6f} pred={row['predicted_normal']:.6f} rel err={rel:.2e} "
           f"matrix-route diff={route:.1e} tangential(end)={tang[-1]:.10f}")


# 7 ------------------------------------------------------------------------------

def test_c07_stable_density(capsys):
    start = time.perf_counter()
    grid = [0.1, 0.5, 1.0, 2.0, 4.0, 10.0]
    dens_err = max(abs(zeta_sq_density(1, 1.0, s) - 1 / (math.pi * math.sqrt(s) * (1 + s))) for s in grid)
    norm_err = {}
    for m in (1, 2, 3):
        for alpha in (0.8, 1.0, 1.5):
            norm_err[(m, alpha)] = abs(total_mass(m, alpha) - 1.0)
    elapsed = time.perf_counter() - start
    worst = max(norm_err.values())
    ok = dens_err <= 1e-6 and worst <= 1e-6 and elapsed < 30.0
    report(capsys, 7, "stable zeta^2 density closed form and normalization", ok,
           f"density err={dens_err:.1e} max normalization err={worst:.1e} t={elapsed:.2f}s")


# 8 ------------------------------------------------------------------------------

def test_c08_null_calibration(capsys):
    start = time.perf_counter()
    cfg = ExperimentConfig("sphere:3", {"kind": "rotsym", "kappa": 5.0}, n=500, replications=2000,
                           level=0.95, functional="mean", seed=0)
    rep = coverage_experiment(cfg)
    elapsed = time.perf_counter() - start
    ok = rep["ks_pvalue"] > 0.01 and 0.93 <= rep["coverage"] <= 0.97 and elapsed < 120
    report(capsys, 8, "one-sample null calibration on S^2", ok,
           f"KS p={rep['ks_pvalue']:.3f} coverage={rep['coverage']:.4f} "
           f"cutlocus reps={rep['cutlocus_replications']} t={elapsed:.1f}s")


# 9 ------------------------------------------------------------------------------

def test_c09_two_sample_null(capsys):
    sph = Sphere(3)
    mu = np.array([1.0, 0.0, 0.0])
    rep = rejection_experiment(sph, lambda g: sample_rotsym_sphere(mu, 5.0, 200, g),
                               lambda g: sample_rotsym_sphere(mu, 5.0, 200, g), 2000, seed=0, level=0.05)
    rate = rep["rejection_rate"]
    ok = 0.035 <= rate <= 0.065 and rep["undefined"] == 0
    report(capsys, 9, "two-sample null rejection rate", ok, f"rate={rate:.4f} undefined={rep['undefined']}")


# 10 -----------------------------------------------------------------------------

def test_c10_spatial_median(capsys):
    rng = np.random.default_rng(SEED + 10)
    worst_gap = -np.inf
    worst_eq = 0.0
    for _ in range(50):
        x = rng.standard_normal((25, 3)) * rng.uniform(0.5, 2.0, size=3)
        m = spatial_median(x)
        worst_gap = max(worst_gap, median_objective(x, m) - grid_oracle_min(x))
        shift = rng.uniform(-50, 50, size=3)
        h = random_rotation(rng, 3)
        worst_eq = max(worst_eq, np.abs(spatial_median(x + shift) - (m + shift)).max(),
                       np.abs(spatial_median(x @ h.T) - h @ m).max())
    ok = worst_gap <= 1e-6 and worst_eq <= 1e-8
    report(capsys, 10, "spatial median vs grid oracle and equivariance", ok,
           f"max(objective - grid min)={worst_gap:.3e} max equivariance err={worst_eq:.1e}")


# 11 -----------------------------------------------------------------------------

CONFIGS = {
    "coverage": {"experiment": "coverage", "manifold": "sphere:3", "law": {"kind": "rotsym", "kappa": 5.0},
                 "n": 100, "replications": 300, "seed": 4},
    "stiefel": {"experiment": "coverage", "manifold": "stiefel:3x2",
                "law": {"kind": "projected_gaussian", "sigma": 0.1}, "n": 60, "replications": 100,
                "level": 0.9, "seed": 8},
    "pareto": {"experiment": "coverage", "manifold": "sphere:3",
               "law": {"kind": "pareto", "alpha": 1.5, "C": 1.0, "radius": 3.0}, "n": 200,
               "replications": 100, "seed": 6},
    "two_sample": {"experiment": "two_sample", "manifold": "sphere:3", "kappa": 5.0, "n": 80, "l": 60,
                   "replications": 200, "seed": 2},
    "necessity": {"experiment": "necessity", "a": [1e2, 1e4], "u": [0.1, 0.01]},
    "multisample_rate": {"experiment": "multisample_rate", "gamma1": 1.0, "gamma2": 1.0,
                         "a1": [0.5, 0.0, 0.0], "schedule": [[600, 1000], [5100, 10000]]},
}


def test_c11_determinism(tmp_path, capsys, monkeypatch):
    identical = []
    for name, cfg in CONFIGS.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        blobs = []
        for threads in ("1", "4"):
            monkeypatch.setenv("MANIFOLD_STAT_THREADS", threads)
            out = tmp_path / f"{name}-{threads}.out"
            assert main(["simulate", str(path), "-o", str(out)]) == 0
            blobs.append(out.read_bytes())
        identical.append(blobs[0] == blobs[1])
    report(capsys, 11, "simulate output byte-identical across runs", all(identical),
           f"{sum(identical)}/{len(identical)} configs identical (threads 1 vs 4)")
