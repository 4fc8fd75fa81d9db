import math

import numpy as np
import pytest
from conftest import fd_jacobian, random_offcut
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from manifold_stat.errors import (
    InvalidPoint,
    ModeMismatch,
    NotPSD,
    OnCutlocus,
    RankDeficient,
    Singular,
)
from manifold_stat.geometry import (
    Mode,
    Sphere,
    Stiefel,
    parse_manifold,
    stiefel_stabilization_closed_form,
    sym_inv_sqrt,
    sym_sqrt,
)


def polar_oracle(x):
    """Closest orthonormal-column matrix via the SVD (U V^T)."""
    u, _, vt = np.linalg.svd(x, full_matrices=False)
    return u @ vt


# -- projection ---------------------------------------------------------------

def test_sphere_projection_examples():
    c = Sphere(2)
    np.testing.assert_allclose(c.project([2.0, 0.0]), [1.0, 0.0])
    np.testing.assert_allclose(c.project([-0.661, 0.647]), [-0.715, 0.699], atol=1e-3)
    with pytest.raises(OnCutlocus):
        c.project([0.0, 0.0])


def test_stiefel_projection_orthogonal_columns():
    m = Stiefel(3, 2)
    t = np.column_stack([[2.0, 0, 0], [0, 3.0, 0]])
    np.testing.assert_allclose(m.as_matrix(m.project(m.flatten(t))), np.eye(3, 2), atol=1e-14)


def test_stiefel_projection_matches_svd_polar(rng):
    for p, r in [(3, 2), (4, 4), (6, 3), (5, 1)]:
        m = Stiefel(p, r)
        for _ in range(20):
            x = rng.standard_normal((p, r))
            got = m.as_matrix(m.project(m.flatten(x)))
            np.testing.assert_allclose(got, polar_oracle(x), atol=1e-10)


def test_projection_lands_on_manifold(manifold, rng):
    for _ in range(50):
        mu = manifold.project(random_offcut(manifold, rng, 1e-3))
        assert manifold.membership_residual(mu) < 1e-12


def test_check_point_rejects_off_manifold():
    with pytest.raises(InvalidPoint):
        Sphere(3).check_point([1.0, 1.0, 0.0])


def test_parse_manifold():
    assert parse_manifold("sphere:3") == Sphere(3)
    assert parse_manifold("stiefel:4x2") == Stiefel(4, 2)
    with pytest.raises(ValueError):
        parse_manifold("torus:2")
    with pytest.raises(ValueError):
        Stiefel(2, 3)


# -- projectors ---------------------------------------------------------------

def test_circle_tangent_projector():
    np.testing.assert_allclose(Sphere(2).tangent_projector([1.0, 0.0]), [[0, 0], [0, 1]])


def test_projector_laws(manifold, rng):
    eye = np.eye(manifold.ambient_dim)
    for _ in range(1000 // 7):
        mu = manifold.random_point(rng)
        tan = manifold.tangent_projector(mu)
        assert np.abs(tan @ tan - tan).max() < 1e-10
        assert np.abs(tan - tan.T).max() < 1e-10
        assert np.linalg.matrix_rank(tan, tol=1e-8) == manifold.dim
        assert abs(np.trace(tan) - manifold.dim) < 1e-10
        np.testing.assert_allclose(tan + manifold.normal_projector(mu), eye, atol=1e-15)


def test_stiefel_tangent_halves_symmetric_part():
    m = Stiefel(3, 2)
    mu = np.eye(3, 2)
    s = np.array([[1.0, 2.0], [2.0, -1.0]])
    tan = m.tangent_projector(m.flatten(mu))
    # mu S with S symmetric is normal; mu A with A antisymmetric is tangent
    np.testing.assert_allclose(tan @ m.flatten(mu @ s), 0.0, atol=1e-15)
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(tan @ m.flatten(mu @ a), m.flatten(mu @ a), atol=1e-15)
    assert np.linalg.matrix_rank(tan) == 3


def test_stiefel_dimensions():
    assert Stiefel(3, 2).dim == 3
    assert Stiefel(4, 4).dim == 6
    assert Stiefel(5, 1).dim == 4


# -- Weingarten map -----------------------------------------------------------

def test_sphere_weingarten_radial(rng):
    sph = Sphere(4)
    mu = sph.random_point(rng)
    np.testing.assert_allclose(sph.weingarten(mu, 2.5 * mu), -2.5 * sph.tangent_projector(mu), atol=1e-14)


def test_weingarten_zero_and_linear(manifold, rng):
    mu = manifold.random_point(rng)
    s = manifold.ambient_dim
    np.testing.assert_allclose(manifold.weingarten(mu, np.zeros(s)), 0.0, atol=1e-15)
    xi, eta = rng.standard_normal(s), rng.standard_normal(s)
    a, b = rng.standard_normal(2)
    lhs = manifold.weingarten(mu, a * xi + b * eta)
    rhs = a * manifold.weingarten(mu, xi) + b * manifold.weingarten(mu, eta)
    assert np.abs(lhs - rhs).max() < 1e-10


def test_weingarten_symmetric_and_tangential(manifold, rng):
    mu = manifold.random_point(rng)
    w = manifold.weingarten(mu, rng.standard_normal(manifold.ambient_dim))
    tan = manifold.tangent_projector(mu)
    assert np.abs(w - w.T).max() < 1e-12
    np.testing.assert_allclose(w @ (np.eye(manifold.ambient_dim) - tan), 0.0, atol=1e-12)
    np.testing.assert_allclose(tan @ w, w, atol=1e-12)


def test_weingarten_ignores_tangential_part(manifold, rng):
    mu = manifold.random_point(rng)
    xi = rng.standard_normal(manifold.ambient_dim)
    nor = manifold.normal_projector(mu)
    np.testing.assert_allclose(manifold.weingarten(mu, xi), manifold.weingarten(mu, nor @ xi), atol=1e-12)


# -- Jacobian and stabilization ----------------------------------------------

def test_jacobian_matches_finite_differences(manifold, rng):
    for _ in range(20):
        t = random_offcut(manifold, rng, 0.1)
        jac = manifold.projection_jacobian(t)
        fd = fd_jacobian(manifold.project, t)
        assert np.abs(jac - fd).max() <= 1e-6 * max(1.0, np.abs(jac).max())


def test_stabilization_inverts_jacobian(manifold, rng):
    for _ in range(10):
        t = random_offcut(manifold, rng, 0.1)
        mu = manifold.project(t)
        g = manifold.stabilization(t, Mode.STANDARD)
        fd = fd_jacobian(manifold.project, t)
        assert np.abs(g @ fd - manifold.tangent_projector(mu)).max() < 1e-6


def test_circle_stabilization_examples():
    c = Sphere(2)
    np.testing.assert_allclose(c.stabilization([0.925, 0.0], "standard"), [[1, 0], [0, 0.925]], atol=1e-15)
    np.testing.assert_allclose(c.stabilization([0.925, 0.0], "sphere-tuned"), 0.925 * np.eye(2))


def test_sphere_stabilization_general_route_agrees(rng):
    # the sphere override must equal the generic I - A_{t - mu} construction
    from manifold_stat.geometry import Manifold
    sph = Sphere(4)
    for _ in range(10):
        t = random_offcut(sph, rng, 0.1)
        np.testing.assert_allclose(sph.stabilization(t), Manifold.stabilization(sph, t), atol=1e-13)


def test_stiefel_closed_form_stabilization(rng):
    for p, r in [(3, 2), (4, 3), (5, 2)]:
        m = Stiefel(p, r)
        for _ in range(10):
            t = random_offcut(m, rng, 0.1)
            np.testing.assert_allclose(stiefel_stabilization_closed_form(m, t), m.stabilization(t), atol=1e-12)


def test_tuned_mode_rejected_on_stiefel():
    m = Stiefel(3, 2)
    with pytest.raises(ModeMismatch):
        m.stabilization(m.flatten(2 * np.eye(3, 2)), Mode.SPHERE_TUNED)


def test_stabilization_on_cutlocus():
    with pytest.raises(OnCutlocus):
        Sphere(3).stabilization(np.zeros(3))
    with pytest.raises(OnCutlocus):
        Stiefel(3, 2).stabilization(np.zeros(6))


def test_derivative_bound(manifold, rng):
    for _ in range(100):
        t = random_offcut(manifold, rng, 0.05)
        op = np.linalg.norm(manifold.projection_jacobian(t), 2)
        bound = manifold.distance_to_manifold(t) / manifold.cutlocus_distance(t) + 1.0
        assert op <= bound * (1 + 1e-10)


def test_derivative_bound_sharp_inside_sphere(rng):
    sph = Sphere(3)
    for _ in range(100):
        t = sph.random_point(rng) * rng.uniform(0.05, 0.99)
        op = np.linalg.norm(sph.projection_jacobian(t), 2)
        bound = sph.distance_to_manifold(t) / sph.cutlocus_distance(t) + 1.0
        assert abs(op - bound) < 1e-9


# -- cutlocus -----------------------------------------------------------------

def test_cutlocus_examples():
    assert Sphere(2).cutlocus_distance([3.0, 4.0]) == pytest.approx(5.0)
    m = Stiefel(3, 2)
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)))
    t = q[:, :2] @ np.diag([2.0, 3.0])
    assert m.cutlocus_distance(m.flatten(t)) == pytest.approx(2.0, abs=1e-12)
    assert m.cutlocus_lower_bound(m.flatten(t)) == pytest.approx(math.sqrt(36 / 13), abs=1e-12)
    m2 = Stiefel(2, 2)
    assert m2.cutlocus_lower_bound(m2.flatten(3.0 * np.eye(2))) == pytest.approx(3.0 / math.sqrt(2))


def test_sphere_lower_bound_is_sharp(rng):
    sph = Sphere(2)
    for _ in range(20):
        t = rng.standard_normal(2)
        assert sph.cutlocus_lower_bound(t) == pytest.approx(np.linalg.norm(t), rel=1e-14)


def test_lower_bound_rank_deficient():
    m = Stiefel(3, 2)
    with pytest.raises(RankDeficient):
        m.cutlocus_lower_bound(m.flatten(np.column_stack([[1.0, 0, 0], [2.0, 0, 0]])))


def test_cutlocus_distance_vs_random_rank_deficient(rng):
    m = Stiefel(4, 2)
    t = rng.standard_normal((4, 2))
    d = m.cutlocus_distance(m.flatten(t))
    # any rank-(r-1) matrix is at least d away
    for _ in range(200):
        low = np.outer(rng.standard_normal(4), rng.standard_normal(2))
        assert np.linalg.norm(t - low) >= d - 1e-12
    assert m.cutlocus_lower_bound(m.flatten(t)) <= d + 1e-12


# -- matrix roots ---------------------------------------------------------------

def test_sym_sqrt_examples():
    np.testing.assert_allclose(sym_sqrt(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    with pytest.raises(NotPSD):
        sym_sqrt(np.diag([1.0, -1e-3]))
    with pytest.raises(Singular):
        sym_inv_sqrt(np.diag([1.0, 0.0]))
    # tiny negative eigenvalues are clamped
    np.testing.assert_allclose(sym_sqrt(np.diag([1.0, -1e-12])), np.diag([1.0, 0.0]))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_sym_sqrt_reconstruction(x):
    a = x @ x.T + 0.1 * np.eye(4)
    r = sym_sqrt(a)
    assert np.abs(r - r.T).max() < 1e-12
    assert np.linalg.eigvalsh(r).min() >= -1e-12
    assert np.linalg.norm(r @ r - a) <= 1e-10 * np.linalg.norm(a)
    ri = sym_inv_sqrt(a)
    assert np.abs(ri @ a @ ri - np.eye(4)).max() < 1e-8


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-5, 5)))
def test_stiefel_projection_idempotent(x):
    m = Stiefel(3, 2)
    if m.cutlocus_distance(x) < 1e-3:
        return
    mu = m.project(x)
    np.testing.assert_allclose(m.project(mu), mu, atol=1e-12)
