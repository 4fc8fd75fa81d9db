import numpy as np
import pytest

from manifold_stat.geometry import Sphere, Stiefel

MANIFOLDS = [Sphere(2), Sphere(3), Sphere(5), Stiefel(3, 2), Stiefel(4, 2), Stiefel(3, 3), Stiefel(5, 1)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=MANIFOLDS, ids=lambda m: m.label())
def manifold(request):
    return request.param


def random_offcut(manifold, rng, min_dist=0.1):
    """Ambient point with cutlocus distance at least ``min_dist``."""
    while True:
        t = rng.standard_normal(manifold.ambient_dim) * rng.uniform(0.3, 2.0)
        if manifold.cutlocus_distance(t) >= min_dist:
            return t


def fd_jacobian(f, t, h=None):
    """Central-difference Jacobian with step ``1e-5 (1 + ||t||)``."""
    t = np.asarray(t, dtype=float)
    h = 1e-5 * (1.0 + np.linalg.norm(t)) if h is None else h
    cols = []
    for k in range(t.size):
        e = np.zeros_like(t)
        e[k] = h
        cols.append((f(t + e) - f(t - e)) / (2 * h))
    return np.column_stack(cols)
