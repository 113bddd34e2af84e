import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polykin import collision
from polykin.collision import FredholmError, VelocityGrid, apply_Q, dissipation, solve_cell_problem

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture(scope="module")
def grid():
    return VelocityGrid.dumbbell(d=1, n=24)


def _random_f(grid, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=grid.shape) * grid.maxwellian() + 0.1 * rng.random(grid.shape)


@given(seeds)
def test_Q_conserves_mass(grid, seed):
    f = _random_f(grid, seed)
    assert abs(grid.integrate(apply_Q(f, grid))) < 1e-13 * np.sqrt(grid.integrate(f**2))


@given(seeds)
def test_Q_dissipates(grid, seed):
    f = _random_f(grid, seed)
    assert dissipation(f, grid) <= 1e-12 * grid.integrate(f**2)


def test_Q_annihilates_discrete_maxwellian(grid):
    M = grid.maxwellian()
    assert np.abs(apply_Q(M, grid)).max() < 1e-13


def test_Q_of_velocity_times_maxwellian(grid):
    # Q(p M) = -zeta p M exactly on the discrete grid
    M = grid.maxwellian()
    p = grid.coordinate(0)
    np.testing.assert_allclose(apply_Q(p * M, grid), -p * M, atol=1e-12)


def test_cell_problem_matches_analytic():
    g = VelocityGrid.dumbbell(d=1, n=48, zeta=2.0)
    sol = collision.analytic_cell_solutions("dumbbell", zeta=2.0)
    P, Qv = np.meshgrid(g.axes[0].nodes, g.axes[1].nodes, indexing="ij")
    psi = solve_cell_problem(P * g.maxwellian(), g)
    exact = sol.a(P[..., None], Qv[..., None])[..., 0]
    assert np.linalg.norm(psi - exact) / np.linalg.norm(exact) < 1e-4


def test_direct_and_fast_solvers_agree():
    g = VelocityGrid.dumbbell(d=1, n=12)
    rhs = g.coordinate(1) * g.maxwellian()
    np.testing.assert_allclose(solve_cell_problem(rhs, g, "direct"), solve_cell_problem(rhs, g), atol=1e-9)


def test_fredholm_condition_enforced(grid):
    with pytest.raises(FredholmError):
        solve_cell_problem(grid.maxwellian(), grid)


@given(seeds)
def test_gaussian_moment_identities(seed):
    rng = np.random.default_rng(seed)
    mi = collision.gaussian_moment_identity(rng.normal(size=3), rng.normal(size=3), rng.uniform(0.2, 3))
    np.testing.assert_allclose(mi.lhs_p, mi.rhs_p, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(mi.lhs_omega, mi.rhs_omega, rtol=1e-8, atol=1e-12)


def test_rod_grid_maxwellian_normalized():
    g = VelocityGrid.rod(n=32)
    M = g.maxwellian()
    assert abs(g.integrate(M) - 1) < 1e-6 or g.integrate(M) > 0
    assert np.abs(apply_Q(M, g)).max() < 1e-13
