"""Sphere and tangent-bundle primitives.

Vectors are plain numpy arrays. A unit vector ``n`` has shape ``(3,)`` (or
``(..., 3)`` for the vectorised helpers) and a tangent vector at ``n`` is any
3-vector orthogonal to it. Local coordinates are the usual polar angle
``theta`` measured from ``e3`` and azimuth ``phi``.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

# below this sin(theta) the (theta, phi) chart is replaced by a rotated one
POLE_TOL = 1e-6
DEFAULT_STEP = 1e-5

ScalarField = Callable[[np.ndarray], float]
VectorField = Callable[[np.ndarray], np.ndarray]


class SphCoord(NamedTuple):
    theta: float
    phi: float


class SphericalBasis(NamedTuple):
    n: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray
    degenerate: bool


class CrossChainResidual(NamedTuple):
    residual: float
    parallel: float


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot normalize a zero vector")
    return v / norm


def from_sph(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def to_sph(n: np.ndarray) -> SphCoord:
    """Inverse of :func:`from_sph`; ``phi`` is wrapped into ``[0, 2*pi)``."""
    n = normalize(n)
    theta = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(n[..., 1], n[..., 0]), 2 * np.pi)
    return SphCoord(theta, phi)


def spherical_basis(theta: float, phi: float) -> SphericalBasis:
    """Orthonormal frame ``(n, e_theta, e_phi)`` at ``(theta, phi)``.

    At a pole ``e_phi`` is still defined from the supplied ``phi`` (so the
    frame stays right-handed) but the result is flagged ``degenerate``
    because ``phi`` carries no geometric information there.
    """
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    n = np.array([st * cp, st * sp, ct])
    e_theta = np.array([ct * cp, ct * sp, -st])
    e_phi = np.array([-sp, cp, 0.0])
    return SphericalBasis(n, e_theta, e_phi, bool(abs(st) < 1e-14))


def tangent_project(v: np.ndarray, n: np.ndarray) -> np.ndarray:
    """``(Id - n n^T) v``, broadcasting over leading axes."""
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    return v - np.sum(v * n, axis=-1, keepdims=True) * n


def cross_matrix(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _align(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Rodrigues rotation taking unit a to unit b; accurate only for a.b >= 0
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    vx = cross_matrix(v)
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def rotate_to_pole(n: np.ndarray) -> np.ndarray:
    """Proper rotation ``K`` with ``K @ e3 == n``.

    For ``n = -e3`` the result is the half turn about ``e1``. In the southern
    hemisphere ``K`` is built as (rotation taking ``-e3`` to ``n``) times
    that half turn, which keeps the construction well conditioned.
    """
    n = normalize(n)
    if n[2] >= 0:
        return _align(E3, n)
    flip = np.diag([1.0, -1.0, -1.0])
    return _align(-E3, n) @ flip


def rotation_about(axis_angle: np.ndarray) -> np.ndarray:
    """Rotation matrices ``exp([a]_x)`` for rotation vectors ``a`` of shape (..., 3)."""
    a = np.asarray(axis_angle, dtype=float)
    angle = np.linalg.norm(a, axis=-1)
    small = angle < 1e-8
    safe = np.where(small, 1.0, angle)
    # sin(x)/x and (1-cos x)/x^2 with series near zero
    s = np.where(small, 1.0 - angle**2 / 6.0, np.sin(angle) / safe)
    c = np.where(small, 0.5 - angle**2 / 24.0, (1.0 - np.cos(angle)) / safe**2)
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    zero = np.zeros_like(ax)
    K = np.stack(
        [
            np.stack([zero, -az, ay], axis=-1),
            np.stack([az, zero, -ax], axis=-1),
            np.stack([-ay, ax, zero], axis=-1),
        ],
        axis=-2,
    )
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + s[..., None, None] * K + c[..., None, None] * (K @ K)


def rotate_vectors(axis_angle: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply ``exp([a]_x)`` to ``v`` row-wise via Rodrigues' formula."""
    a = np.asarray(axis_angle, dtype=float)
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(a, axis=-1, keepdims=True)
    small = angle < 1e-8
    safe = np.where(small, 1.0, angle)
    s = np.where(small, 1.0 - angle**2 / 6.0, np.sin(angle) / safe)
    c = np.where(small, 0.5 - angle**2 / 24.0, (1.0 - np.cos(angle)) / safe**2)
    axv = np.cross(a, v)
    return v + s * axv + c * np.cross(a, axv)


def _equator_chart(n: np.ndarray) -> np.ndarray:
    # rotation R with R @ e1 = n, so R^T n sits at (theta, phi) = (pi/2, 0)
    K = rotate_to_pole(n)
    # K maps e3 -> n; compose with the quarter turn e1 -> e3 about e2
    quarter = np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    return K @ quarter


def _rotgrad_chart(f: ScalarField, theta: float, phi: float, h: float) -> np.ndarray:
    def F(t, p):
        return f(from_sph(t, p))

    d_theta = (F(theta + h, phi) - F(theta - h, phi)) / (2 * h)
    d_phi = (F(theta, phi + h) - F(theta, phi - h)) / (2 * h)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    return np.array(
        [
            -cp * ct / st * d_phi - sp * d_theta,
            -ct * sp / st * d_phi + cp * d_theta,
            d_phi,
        ]
    )


def rotational_gradient(f: ScalarField, n: np.ndarray, h: float = DEFAULT_STEP) -> np.ndarray:
    """``n x grad_n f`` by central differences in the local angles.

    ``f`` only needs to be defined on the sphere near ``n``. Close to the
    poles the chart is rotated so the evaluation point sits on the equator.
    """
    if not 0 < h <= 1e-3:
        raise ValueError("step h must lie in (0, 1e-3]")
    n = normalize(n)
    theta, phi = to_sph(n)
    if np.sin(theta) >= POLE_TOL:
        return _rotgrad_chart(f, float(theta), float(phi), h)
    R = _equator_chart(n)

    def g(m):
        return f(R @ m)

    return R @ _rotgrad_chart(g, np.pi / 2, 0.0, h)


def _divergence_chart(A: VectorField, theta: float, phi: float, h: float) -> float:
    def comps(t, p):
        b = spherical_basis(t, p)
        a = A(b.n)
        return float(np.dot(a, b.e_theta)), float(np.dot(a, b.e_phi))

    st = np.sin(theta)
    at_plus, _ = comps(theta + h, phi)
    at_minus, _ = comps(theta - h, phi)
    d_theta = (np.sin(theta + h) * at_plus - np.sin(theta - h) * at_minus) / (2 * h)
    _, ap_plus = comps(theta, phi + h)
    _, ap_minus = comps(theta, phi - h)
    d_phi = (ap_plus - ap_minus) / (2 * h)
    return float((d_theta + d_phi) / st)


def sphere_divergence(A: VectorField, c: SphCoord, h: float = DEFAULT_STEP) -> float:
    """Surface divergence of the tangent field ``A`` at ``c``.

    ``A`` maps a unit vector to a 3-vector; only its tangential components
    enter.
    """
    theta, phi = float(c[0]), float(c[1])
    if np.sin(theta) >= POLE_TOL:
        return _divergence_chart(A, theta, phi, h)
    n = from_sph(theta, phi)
    R = _equator_chart(n)

    def B(m):
        return R.T @ A(R @ m)

    return _divergence_chart(B, np.pi / 2, 0.0, h)


def _fd_gradient(g: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        dx = np.zeros_like(x)
        dx[i] = h
        grad[i] = (g(x + dx) - g(x - dx)) / (2 * h)
    return grad


def _fd_jacobian(G: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    # J[i, j] = d G_i / d x_j
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.shape[0]):
        dx = np.zeros_like(x)
        dx[j] = h
        cols.append((np.asarray(G(x + dx)) - np.asarray(G(x - dx))) / (2 * h))
    return np.stack(cols, axis=1)


def cross_chain_identity_check(
    a: np.ndarray, g: Callable[[np.ndarray], float], y: np.ndarray, h: float = 1e-5
) -> CrossChainResidual:
    """Check ``grad_y g(a x y) = -a x grad_x g`` and ``a . grad_y g = 0``."""
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    grad_y = _fd_gradient(lambda yy: g(np.cross(a, yy)), y, h)
    grad_x = _fd_gradient(g, np.cross(a, y), h)
    residual = np.linalg.norm(grad_y + np.cross(a, grad_x))
    return CrossChainResidual(float(residual), float(abs(np.dot(a, grad_y))))


def bundle_change_of_variables_check(
    n: np.ndarray,
    omega: np.ndarray,
    f: Callable[[np.ndarray, np.ndarray], float],
    g: Callable[[np.ndarray], np.ndarray],
    h: float = 1e-5,
) -> dict[str, float]:
    """Finite-difference residuals of the tangent-bundle change of variables.

    ``f(m, ndot)`` is a scalar function of a point and a velocity; composing
    with ``ndot = omega x n`` must give::

        grad_n F = grad_m f - omega x grad_ndot f
        grad_omega F = n x grad_ndot f

    ``g`` is a vector field on R^3 used for the two divergence identities
    ``(n x grad_n) . g = -grad_n . (n x g)`` and the same with ``omega``.
    Derivatives are taken in the ambient space.
    """
    n = np.asarray(n, dtype=float)
    omega = np.asarray(omega, dtype=float)
    ndot = np.cross(omega, n)

    grad_m = _fd_gradient(lambda m: f(m, ndot), n, h)
    grad_ndot = _fd_gradient(lambda v: f(n, v), ndot, h)
    grad_n_F = _fd_gradient(lambda nn: f(nn, np.cross(omega, nn)), n, h)
    grad_w_F = _fd_gradient(lambda w: f(n, np.cross(w, n)), omega, h)
    r_n = np.linalg.norm(grad_n_F - (grad_m - np.cross(omega, grad_ndot)))
    r_w = np.linalg.norm(grad_w_F - np.cross(n, grad_ndot))

    def curl_form(point):
        # (c x grad) . g evaluated at ``point`` with c = point's own value
        J = _fd_jacobian(g, point, h)
        # (c x grad) . g = eps_ijk c_j d_k g_i
        c = point
        return float(
            c[1] * J[0, 2] - c[2] * J[0, 1]
            + c[2] * J[1, 0] - c[0] * J[1, 2]
            + c[0] * J[2, 1] - c[1] * J[2, 0]
        )

    lhs_n = curl_form(n)
    rhs_n = -np.trace(_fd_jacobian(lambda x: np.cross(x, g(x)), n, h))
    # omega version: n is a fixed parameter, derivatives act on omega
    Jw = _fd_jacobian(g, omega, h)
    lhs_w = float(
        n[1] * Jw[0, 2] - n[2] * Jw[0, 1]
        + n[2] * Jw[1, 0] - n[0] * Jw[1, 2]
        + n[0] * Jw[2, 1] - n[1] * Jw[2, 0]
    )
    rhs_w = -np.trace(_fd_jacobian(lambda w: np.cross(n, g(w)), omega, h))
    return {
        "grad_n": float(r_n),
        "grad_omega": float(r_w),
        "div_n": float(abs(lhs_n - rhs_n)),
        "div_omega": float(abs(lhs_w - rhs_w)),
    }
