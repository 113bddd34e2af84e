import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polykin import geometry

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
vec3 = arrays(float, 3, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-2)


@given(vec3)
def test_normalize_unit_length(v):
    assert abs(np.linalg.norm(geometry.normalize(v)) - 1) < 1e-14


def test_normalize_zero_raises():
    with pytest.raises(ValueError):
        geometry.normalize(np.zeros(3))


@given(st.floats(0.01, np.pi - 0.01), st.floats(0, 2 * np.pi - 1e-9))
def test_spherical_round_trip(theta, phi):
    c = geometry.to_sph(geometry.from_sph(theta, phi))
    np.testing.assert_allclose([c.theta, c.phi], [theta, phi], atol=1e-10)


@given(vec3)
def test_rotate_to_pole_is_proper_rotation(v):
    n = geometry.normalize(v)
    K = geometry.rotate_to_pole(n)
    np.testing.assert_allclose(K @ geometry.E3, n, atol=1e-12)
    np.testing.assert_allclose(K.T @ K, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(K) - 1) < 1e-12


def test_rotate_to_pole_south():
    K = geometry.rotate_to_pole(-geometry.E3)
    np.testing.assert_allclose(K @ geometry.E3, -geometry.E3, atol=1e-15)


@given(vec3, vec3)
def test_tangent_project_orthogonal(v, m):
    n = geometry.normalize(m)
    t = geometry.tangent_project(v, n)
    assert abs(t @ n) < 1e-12


@given(vec3, vec3)
def test_rotgrad_of_linear_function(a, m):
    # R(n.a) = n x a
    n = geometry.normalize(m)
    g = geometry.rotational_gradient(lambda x: x @ a, n)
    np.testing.assert_allclose(g, np.cross(n, a), atol=1e-8)


def test_rotgrad_near_pole_uses_rotated_chart():
    a = np.array([0.3, -1.2, 0.7])
    n = geometry.normalize(np.array([1e-9, 0.0, 1.0]))
    np.testing.assert_allclose(geometry.rotational_gradient(lambda x: x @ a, n), np.cross(n, a), atol=1e-8)


def test_rotgrad_rejects_bad_step():
    with pytest.raises(ValueError):
        geometry.rotational_gradient(lambda x: x[0], geometry.E3, h=0.1)


@given(vec3, vec3)
def test_rotation_about_preserves_norm(a, v):
    w = geometry.rotate_vectors(0.3 * a, v)
    assert abs(np.linalg.norm(w) - np.linalg.norm(v)) < 1e-12


@given(vec3, vec3)
def test_cross_chain_identity_quadratic(a, y):
    A = np.array([[1.0, 0.2, -0.3], [0.2, 2.0, 0.5], [-0.3, 0.5, 0.7]])
    r = geometry.cross_chain_identity_check(a, lambda x: x @ A @ x + np.sin(x[0]), y)
    assert r.residual < 1e-6 * (1 + np.linalg.norm(a) ** 2 * np.linalg.norm(y))
    assert r.parallel < 1e-6 * (1 + np.linalg.norm(a) ** 2 * np.linalg.norm(y))
