import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polykin.forces import FENEDomainError, FlowField, SpringModel, spring_force, spring_potential

vec3 = arrays(float, 3, elements=st.floats(-1.5, 1.5, allow_nan=False))


@given(vec3)
def test_hookean_force_is_linear(n):
    s = SpringModel("hookean", 2.5)
    np.testing.assert_allclose(spring_force(n, s), 2.5 * n)


@given(vec3)
def test_force_is_potential_gradient(n):
    s = SpringModel("fene", 1.3, 3.0)
    h = 1e-6
    grad = [(spring_potential(n + h * e, s) - spring_potential(n - h * e, s)) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(np.ravel(grad), spring_force(n, s), rtol=1e-5, atol=1e-7)


@given(vec3)
def test_fene_splits_into_hookean_plus_nonlinear(n):
    s = SpringModel("fene", 1.0, 3.0)
    np.testing.assert_allclose(s.force(n), s.H * n + s.nonlinear_force(n), rtol=1e-12, atol=1e-14)


def test_fene_outside_ball_raises():
    with pytest.raises(FENEDomainError):
        spring_force(np.array([3.0, 0, 0]), SpringModel("fene", 1.0, 3.0))


def test_fene_needs_extension():
    with pytest.raises(ValueError):
        SpringModel("fene", 1.0)


def test_flow_constructors():
    assert FlowField.quiescent(2).is_quiescent
    sh = FlowField.simple_shear(2.0)
    assert sh.kappa[0, 1] == 2.0 and np.trace(sh.kappa) == 0
    ex = FlowField.planar_extension(1.0, 2)
    assert np.trace(ex.kappa) == 0
    np.testing.assert_allclose(sh.velocity(np.array([0.0, 1.0, 0.0])), [2.0, 0, 0])


from polykin import geometry
from polykin.forces import OnsagerPotential, onsager_potential, onsager_torque
from polykin.rod import friction_torque
from polykin.spectral import SphereGrid


def test_friction_torque_in_shear():
    # u = (rate y, 0, 0): a rod along e2 is turned about -e3, a rod along e1 feels nothing
    rate, zr = 2.0, 1.5
    k = FlowField.simple_shear(rate).kappa
    np.testing.assert_allclose(friction_torque(geometry.E2, np.zeros(3), k, zr), [0, 0, -zr * rate])
    np.testing.assert_allclose(friction_torque(geometry.E1, np.zeros(3), k, zr), 0)


def test_onsager_uniform_density_constant_potential():
    grid = SphereGrid(16, 32)
    pot = OnsagerPotential(3.0, grid)
    rho = np.full(grid.shape, 1 / (4 * np.pi))
    vals = [onsager_potential(rho, geometry.normalize(v), pot) for v in np.random.default_rng(0).normal(size=(5, 3))]
    # int |n x n'| dn' / (4 pi) = pi / 4
    np.testing.assert_allclose(vals, 3.0 * np.pi / 4, rtol=1e-10)
    assert np.abs(onsager_torque(rho, geometry.E1, pot)).max() < 1e-6


def test_onsager_potential_matches_brute_force_quadrature():
    grid = SphereGrid(24, 48)
    pot = OnsagerPotential(1.0, grid, l_max=12)
    pts = grid.points
    rho = np.exp(2 * pts[..., 2] ** 2)
    rho /= grid.integrate(rho)
    n = geometry.normalize(np.array([0.3, 0.2, 0.9]))
    # brute force on a much finer grid; the kernel is only Lipschitz, so compare loosely
    fine = SphereGrid(400, 800)
    fr = np.exp(2 * fine.points[..., 2] ** 2)
    fr /= fine.integrate(fr)
    brute = fine.integrate(np.linalg.norm(np.cross(n, fine.points), axis=-1) * fr)
    assert abs(onsager_potential(rho, n, pot) - brute) < 2e-3


def test_onsager_grid_mismatch_raises():
    with pytest.raises(ValueError):
        OnsagerPotential(1.0, SphereGrid(8, 16)).field(np.ones((4, 4)))
