import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polykin.fp.ball import (
    LimitParams,
    LimitSolver,
    PositivityError,
    ball_grid,
    equilibrium_density,
    l1_distance,
)
from polykin.fp.doi import (
    DoiParams,
    DoiSolver,
    ISOTROPIC_INSTABILITY,
    ZonalOnsager,
    isotropic_growth_rate,
    onsager_sweep,
    uniform_coefs,
    von_mises_fisher,
)
from polykin.fp.fv import bernoulli
from polykin.fp.inertial import InertialParams, InertialReducedSolver, ReducedInertialGrid
from polykin.forces import FlowField, SpringModel
from polykin.harness import lyapunov_covariance


@given(st.floats(-50, 50))
def test_bernoulli_identity(x):
    # B(x) - B(-x) = -x
    assert abs(bernoulli(np.array(x)) - bernoulli(np.array(-x)) + x) < 1e-9 * (1 + abs(x))


def test_bernoulli_at_zero():
    assert bernoulli(np.array(0.0)) == 1.0


@pytest.mark.parametrize("coords,dim", [("line", 1), ("radial", 3), ("polar", 2)])
def test_generator_columns_sum_to_zero(coords, dim):
    par = LimitParams(spring=SpringModel("fene", 1.0, 3.0), dim=dim,
                      flow=FlowField.simple_shear(1.0, dim) if coords == "polar" else None)
    g = ball_grid(par, 30, n_phi=16, coords=coords)
    L = LimitSolver(g, par).L
    colsum = g.volumes.ravel() @ L
    assert np.abs(colsum).max() < 1e-10 * abs(L).max()


@pytest.mark.parametrize("spring,tol", [(SpringModel("fene", 1.0, 3.0), 1e-4), (SpringModel(), 1e-4)])
def test_steady_state_is_boltzmann(spring, tol):
    par = LimitParams(spring=spring, dim=3)
    g = ball_grid(par, 400, coords="radial")
    rho = LimitSolver(g, par).steady_state()
    assert l1_distance(g, rho, equilibrium_density(g, par)) < tol


def test_equilibrium_is_fixed_point_of_time_stepping():
    par = LimitParams(spring=SpringModel("fene", 1.0, 3.0), dim=2)
    g = ball_grid(par, 100, coords="radial")
    s = LimitSolver(g, par)
    rho = s.steady_state()
    np.testing.assert_allclose(s.advance(rho, 1.0, 0.1), rho, atol=1e-10)


@pytest.mark.parametrize("method", ["trbdf2", "euler", "expm"])
def test_time_stepping_conserves_mass(method):
    par = LimitParams(spring=SpringModel("fene", 1.0, 3.0), dim=1)
    g = ball_grid(par, 80)
    x = g.centers[:, 0]
    rho0 = np.exp(-((x - 1.5) ** 2) / 0.1)
    rho0 /= g.integrate(rho0)
    rho = LimitSolver(g, par).advance(rho0, 0.5, 0.05, method)
    assert abs(g.integrate(rho) - 1) < 1e-12
    assert rho.min() > -1e-12


def test_shear_steady_state_covariance_matches_lyapunov():
    par = LimitParams(flow=FlowField.simple_shear(1.0, 2), dim=2)
    g = ball_grid(par, 80, n_phi=48)
    rho = LimitSolver(g, par).steady_state()
    pts = g.centers.reshape(-1, 2)
    w = (rho * g.volumes).ravel()
    C = np.einsum("k,ki,kj->ij", w, pts, pts)
    np.testing.assert_allclose(C, lyapunov_covariance(par.flow.kappa, 1.0), atol=0.02)


def test_positivity_error_is_runtime_error():
    assert issubclass(PositivityError, RuntimeError)


# reduced inertial solver --------------------------------------------------------------


@pytest.fixture(scope="module")
def reduced():
    par = InertialParams(spring=SpringModel("fene", 1.0, 3.0), kappa=0.5)
    return InertialReducedSolver(par, ReducedInertialGrid(120, 10))


def _bump(s):
    rho = np.exp(-((s.x - 1.0) ** 2) / 0.4)
    return rho / (rho.sum() * s.h)


@settings(max_examples=8)
@given(st.floats(0.05, 1.0))
def test_reduced_solver_conserves_mass(reduced, eps):
    c = reduced.advance(reduced.initial(_bump(reduced)), eps, 0.3)
    assert abs(reduced.density(c).sum() * reduced.h - 1) < 1e-10


def test_reduced_solver_stable_spectrum(reduced):
    from scipy.sparse.linalg import eigs

    G = reduced.generator(0.2)
    vals = eigs(G.tocsc(), k=4, which="LR", return_eigenvectors=False)
    assert vals.real.max() < 1e-8


def test_reduced_solver_approaches_limit(reduced):
    rho0 = _bump(reduced)
    ref = reduced.limit_solver.advance(rho0, 1.0, 1e-3)
    d = [np.abs(reduced.density(reduced.advance(reduced.initial(rho0), e, 1.0)) - ref).sum() * reduced.h
         for e in (0.4, 0.2, 0.1)]
    assert d[0] > d[1] > d[2]


def test_reduced_reconstruct_integrates_to_density(reduced):
    c = reduced.advance(reduced.initial(_bump(reduced)), 0.3, 0.2)
    q = np.linspace(-12, 12, 801)
    f = reduced.reconstruct(c, q)
    rho = np.trapezoid(f, q, axis=1) if hasattr(np, "trapezoid") else np.trapz(f, q, axis=1)
    np.testing.assert_allclose(rho, reduced.density(c), atol=1e-6)


# Doi ----------------------------------------------------------------------------------


def test_doi_p2_decay_rate():
    s = DoiSolver(DoiParams(D_r=0.7, l_max=8))
    a0 = von_mises_fisher(8, 5.0)
    t = 0.2
    ratio = s.h.mean_p2(s.advance(a0, t)) / s.h.mean_p2(a0)
    assert abs(ratio - np.exp(-6 * 0.7 * t)) < 1e-12


def test_doi_shear_conserves_mass_and_entropy_bounded():
    s = DoiSolver(DoiParams(flow=FlowField.simple_shear(2.0), l_max=10))
    a = von_mises_fisher(10, 3.0, (1, 1, 0))
    b = s.advance(a, 0.5, 1e-2)
    assert abs(s.mass(b) - 1) < 1e-12
    assert s.entropy(b) >= -np.log(4 * np.pi) - 1e-9


def test_doi_onsager_entropy_free_energy_decreases_below_threshold():
    s = DoiSolver(DoiParams(strength=5.0, l_max=8))
    a = von_mises_fisher(8, 4.0)
    S = [s.order_parameter(a)]
    for _ in range(3):
        a = s.advance(a, 0.2, 1e-2)
        S.append(s.order_parameter(a))
    assert all(x > y for x, y in zip(S, S[1:]))


def test_uniform_is_steady():
    s = DoiSolver(DoiParams(strength=5.0, l_max=6))
    assert np.abs(s.rhs(uniform_coefs(6))).max() < 1e-12


def test_isotropic_growth_changes_sign_at_threshold():
    assert isotropic_growth_rate(ISOTROPIC_INSTABILITY * 0.99) < 0 < isotropic_growth_rate(ISOTROPIC_INSTABILITY * 1.01)


def test_zonal_onsager_self_consistent():
    z = ZonalOnsager(14.0)
    b = z.solve()
    assert z.self_consistency(b) < 1e-10
    assert 0.85 < z.order_parameter(b) < 0.95


def test_onsager_sweep_threshold_bracketed():
    sw = onsager_sweep(np.arange(6.0, 14.0))
    assert sw.S[0] < 0.1 and sw.S[-1] > 0.5
    assert 6 < sw.threshold <= ISOTROPIC_INSTABILITY + 1
