"""Embedded manifolds: nearest-point projection, tangent/normal projectors,
Weingarten maps, cutlocus distances and the stabilization operator.

Two concrete families are provided, the unit sphere ``Sphere(s)`` in R^s and
the Stiefel manifold ``Stiefel(p, r)`` of p x r matrices with orthonormal
columns.  Stiefel points are p x r matrices flattened column-major into
R^(p*r); every linear operator (projectors, Weingarten map, G) is returned as
a dense symmetric (p*r) x (p*r) matrix acting on such flattened vectors.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidPoint,
    ModeMismatch,
    NotPSD,
    OnCutlocus,
    RankDeficient,
    Singular,
)

EPS_CUT = 1e-12
MEMBERSHIP_TOL = 1e-10
_PSD_SLACK = 1e-10
_INV_SQRT_FLOOR = 1e-12


class Mode(str, enum.Enum):
    """Stabilization variant used for G."""

    STANDARD = "standard"
    SPHERE_TUNED = "sphere-tuned"


def as_mode(mode) -> Mode:
    if isinstance(mode, Mode):
        return mode
    try:
        return Mode(str(mode).lower().replace("_", "-"))
    except ValueError:
        raise ValueError(f"unknown stabilization mode {mode!r}") from None


def cut_tolerance(t) -> float:
    """Width of the numerical band treated as the cutlocus around ``t``."""
    return EPS_CUT * (1.0 + float(np.linalg.norm(t)))


# ---------------------------------------------------------------------------
# symmetric matrix utilities
# ---------------------------------------------------------------------------

def symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def _eigh_psd(a):
    a = symmetrize(a)
    w, v = np.linalg.eigh(a)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and w[0] < -_PSD_SLACK * scale:
        raise NotPSD(f"matrix has negative eigenvalue {w[0]:.3e}")
    return np.clip(w, 0.0, None), v


def sym_sqrt(a):
    """Symmetric positive semidefinite square root via eigendecomposition.

    Eigenvalues in ``[-1e-10, 0)`` (relative to the spectrum scale) are
    clamped to zero; anything more negative raises :class:`NotPSD`.
    """
    w, v = _eigh_psd(a)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def sym_inv_sqrt(a):
    """Inverse of :func:`sym_sqrt`; requires eigenvalues above 1e-12."""
    w, v = _eigh_psd(a)
    if w.size and w[0] <= _INV_SQRT_FLOOR:
        raise Singular(f"smallest eigenvalue {w[0]:.3e} too small for inverse square root")
    return symmetrize((v / np.sqrt(w)) @ v.T)


# ---------------------------------------------------------------------------
# manifolds
# ---------------------------------------------------------------------------

class Manifold:
    """Common interface of the compact submanifolds handled by the package.

    Subclasses define ``dim`` (intrinsic dimension m), ``ambient_dim`` (s),
    and the geometric primitives.  All methods are pure functions of their
    arguments.
    """

    dim: int
    ambient_dim: int

    # -- primitives supplied by subclasses ---------------------------------
    def project(self, t):
        raise NotImplementedError

    def membership_residual(self, x) -> float:
        raise NotImplementedError

    def tangent_projector(self, mu):
        raise NotImplementedError

    def weingarten(self, mu, xi):
        raise NotImplementedError

    def cutlocus_distance(self, t) -> float:
        raise NotImplementedError

    def cutlocus_lower_bound(self, t) -> float:
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError

    # -- shared machinery ---------------------------------------------------
    def _vector(self, t):
        t = np.asarray(t, dtype=float).reshape(-1)
        if t.shape[0] != self.ambient_dim:
            raise ValueError(
                f"expected a vector of length {self.ambient_dim}, got {t.shape[0]}"
            )
        if not np.all(np.isfinite(t)):
            raise ValueError("non-finite coordinates")
        return t

    def check_point(self, mu):
        mu = self._vector(mu)
        res = self.membership_residual(mu)
        if res > MEMBERSHIP_TOL:
            raise InvalidPoint(f"point is off the manifold (residual {res:.3e})")
        return mu

    def _check_off_cutlocus(self, t):
        d = self.cutlocus_distance(t)
        if d <= cut_tolerance(t):
            raise OnCutlocus(f"cutlocus distance {d:.3e} is within the tolerance band")
        return d

    def normal_projector(self, mu):
        return np.eye(self.ambient_dim) - self.tangent_projector(mu)

    def distance_to_manifold(self, t) -> float:
        t = self._vector(t)
        return float(np.linalg.norm(t - self.project(t)))

    def stabilization(self, t, mode=Mode.STANDARD):
        """Stabilized derivative inverse G at the ambient point ``t``.

        ``standard`` gives ``I - A_{t-mu} tan_mu``; ``sphere-tuned`` (spheres
        only) gives ``||t|| I``.
        """
        mode = as_mode(mode)
        t = self._vector(t)
        if mode is Mode.SPHERE_TUNED:
            raise ModeMismatch(f"sphere-tuned stabilization is not available on {self.label()}")
        self._check_off_cutlocus(t)
        mu = self.project(t)
        return symmetrize(np.eye(self.ambient_dim) - self.weingarten(mu, t - mu))

    def projection_jacobian(self, t):
        """Derivative of the projection, ``(Id - A_{t-mu})^{-1} tan_mu``."""
        t = self._vector(t)
        self._check_off_cutlocus(t)
        mu = self.project(t)
        g = np.eye(self.ambient_dim) - self.weingarten(mu, t - mu)
        return np.linalg.solve(g, self.tangent_projector(mu))

    def random_point(self, rng):
        """A point drawn from the uniform (Haar) law on the manifold."""
        while True:
            z = rng.standard_normal(self.ambient_dim)
            if self.cutlocus_distance(z) > 1e-6:
                return self.project(z)


@dataclass(frozen=True)
class Sphere(Manifold):
    """Unit sphere S^(s-1) in R^s."""

    s: int

    def __post_init__(self):
        if self.s < 2:
            raise ValueError("sphere needs ambient dimension s >= 2")

    @property
    def dim(self):
        return self.s - 1

    @property
    def ambient_dim(self):
        return self.s

    def label(self):
        return f"sphere:{self.s}"

    def project(self, t):
        t = self._vector(t)
        d = self._check_off_cutlocus(t)
        return t / d

    def membership_residual(self, x):
        return abs(float(np.linalg.norm(x)) - 1.0)

    def tangent_projector(self, mu):
        mu = self.check_point(mu)
        return np.eye(self.s) - np.outer(mu, mu)

    def weingarten(self, mu, xi):
        mu = self.check_point(mu)
        xi = self._vector(xi)
        return -float(mu @ xi) * (np.eye(self.s) - np.outer(mu, mu))

    def cutlocus_distance(self, t):
        return float(np.linalg.norm(self._vector(t)))

    def cutlocus_lower_bound(self, t):
        t = self._vector(t)
        nrm2 = float(t @ t)
        if nrm2 <= cut_tolerance(t) ** 2:
            raise RankDeficient("t is numerically zero")
        return float(np.sqrt(nrm2))

    def stabilization(self, t, mode=Mode.STANDARD):
        mode = as_mode(mode)
        t = self._vector(t)
        d = self._check_off_cutlocus(t)
        if mode is Mode.SPHERE_TUNED:
            return d * np.eye(self.s)
        mu = t / d
        tan = np.eye(self.s) - np.outer(mu, mu)
        return d * tan + np.outer(mu, mu)

    def angle_deg(self, x) -> float:
        """Polar angle in degrees in [0, 360); circle only."""
        if self.s != 2:
            raise ModeMismatch("angles are only defined on the circle")
        x = self._vector(x)
        return float(np.degrees(np.arctan2(x[1], x[0])) % 360.0)

    def from_angle_deg(self, angle):
        a = np.radians(angle)
        return np.array([np.cos(a), np.sin(a)])


@dataclass(frozen=True)
class Stiefel(Manifold):
    """Stiefel manifold V_{p,r}: p x r matrices X with X^T X = I_r.

    Ambient vectors are the column-major flattening of p x r matrices.
    """

    p: int
    r: int

    def __post_init__(self):
        if not (1 <= self.r <= self.p):
            raise ValueError("Stiefel manifold needs 1 <= r <= p")

    @property
    def dim(self):
        return self.p * self.r - self.r * (self.r + 1) // 2

    @property
    def ambient_dim(self):
        return self.p * self.r

    def label(self):
        return f"stiefel:{self.p}x{self.r}"

    def as_matrix(self, x):
        return np.asarray(x, dtype=float).reshape(self.p, self.r, order="F")

    def flatten(self, x):
        return np.asarray(x, dtype=float).reshape(-1, order="F")

    def _gram_eig(self, t):
        m = self.as_matrix(t)
        return np.linalg.eigh(symmetrize(m.T @ m))

    def project(self, t):
        t = self._vector(t)
        self._check_off_cutlocus(t)
        x = self.as_matrix(t)
        w, v = self._gram_eig(t)
        inv_sqrt = (v / np.sqrt(w)) @ v.T
        y = x @ inv_sqrt
        # one Newton-Schulz step restores orthogonality lost to cond(t^T t)
        y = 0.5 * y @ (3.0 * np.eye(self.r) - y.T @ y)
        return self.flatten(y)

    def membership_residual(self, x):
        m = self.as_matrix(x)
        return float(np.linalg.norm(m.T @ m - np.eye(self.r)))

    def _tan_op(self, mu, x):
        return x - 0.5 * mu @ (mu.T @ x + x.T @ mu)

    def _materialize(self, op):
        s = self.ambient_dim
        out = np.empty((s, s))
        for k in range(s):
            e = np.zeros(s)
            e[k] = 1.0
            out[:, k] = self.flatten(op(self.as_matrix(e)))
        return symmetrize(out)

    def tangent_projector(self, mu):
        mu = self.as_matrix(self.check_point(mu))
        return self._materialize(lambda x: self._tan_op(mu, x))

    def weingarten(self, mu, xi):
        # normal part of xi is mu @ S with S = sym(mu^T xi); A_xi(w) = -tan(w S)
        mu = self.as_matrix(self.check_point(mu))
        xi = self.as_matrix(self._vector(xi))
        s_mat = 0.5 * (mu.T @ xi + xi.T @ mu)
        return self._materialize(
            lambda x: -self._tan_op(mu, self._tan_op(mu, x) @ s_mat)
        )

    def cutlocus_distance(self, t):
        w, _ = self._gram_eig(self._vector(t))
        return float(np.sqrt(max(w[0], 0.0)))

    def cutlocus_lower_bound(self, t):
        t = self._vector(t)
        w, _ = self._gram_eig(t)
        if w[0] <= cut_tolerance(t) ** 2:
            raise RankDeficient("t^T t is singular to tolerance")
        return float(1.0 / np.sqrt(np.sum(1.0 / w)))


def stiefel_stabilization_closed_form(manifold: Stiefel, t):
    """G assembled from the explicit Stiefel operator formula

    ``X -> tan(X) mu^T t + 1/2 mu tan(X)^T t - 1/2 t tan(X)^T mu + (X - tan(X))``.

    Kept separate from :meth:`Manifold.stabilization` (which goes through the
    Weingarten map) so the two constructions can be checked against each other.
    """
    t_flat = manifold._vector(t)
    mu = manifold.as_matrix(manifold.project(t_flat))
    tm = manifold.as_matrix(t_flat)

    def op(x):
        w = manifold._tan_op(mu, x)
        return w @ mu.T @ tm + 0.5 * mu @ w.T @ tm - 0.5 * tm @ w.T @ mu + (x - w)

    return manifold._materialize(op)


_SPEC_RE = re.compile(r"^\s*(sphere)\s*:\s*(\d+)\s*$|^\s*(stiefel)\s*:\s*(\d+)\s*[xX]\s*(\d+)\s*$")


def parse_manifold(text: str) -> Manifold:
    """Parse ``sphere:<s>`` or ``stiefel:<p>x<r>``."""
    m = _SPEC_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse manifold string {text!r}")
    if m.group(1):
        return Sphere(int(m.group(2)))
    return Stiefel(int(m.group(4)), int(m.group(5)))
