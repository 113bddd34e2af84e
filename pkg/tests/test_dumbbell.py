import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polykin.dumbbell import (
    DumbbellState,
    InertialDumbbell,
    OverdampedDumbbell,
    PhysParamsDumbbell,
    equilibrium_state,
    step_inertial,
)
from polykin.ensemble import Ensemble, simulate_ensemble
from polykin.forces import FlowField, SpringModel
from polykin.harness import inertial_lyapunov_covariance, ou_marginal


def test_params_validation():
    with pytest.raises(ValueError):
        PhysParamsDumbbell(epsilon=0.0)
    with pytest.raises(ValueError):
        PhysParamsDumbbell(flow=FlowField.quiescent(2), dim=3)


@settings(max_examples=10)
@given(st.floats(0.05, 1.0), st.floats(0.01, 0.5))
def test_zero_temperature_rest_state_is_fixed(eps, dt):
    par = PhysParamsDumbbell(epsilon=eps, kBT=0.0)
    s = DumbbellState.zeros(4, 3)
    out = step_inertial(s, par, dt, np.random.default_rng(0))
    assert np.abs(out.n).max() == 0 and np.abs(out.p).max() == 0


def test_equilibrium_sampler_rejects_fene_without_init():
    par = PhysParamsDumbbell(spring=SpringModel("fene", 1.0, 3.0))
    with pytest.raises(ValueError):
        equilibrium_state(10, par, np.random.default_rng(0))


@pytest.mark.parametrize("dt", [0.01, 0.2, 1.0])
def test_hookean_equilibrium_preserved_for_any_dt(dt):
    # the Hookean transition is exact, so an equilibrium sample stays one
    par = PhysParamsDumbbell(epsilon=0.4, dim=2)
    rng = np.random.default_rng(5)
    s = equilibrium_state(40_000, par, rng)
    e = simulate_ensemble(Ensemble(s, 1), InertialDumbbell(par), dt, 4 * dt)
    p, q = e.state.scaled_velocities(par.epsilon)
    var = np.var(np.hstack([p, q]), axis=0)
    assert np.abs(var - 2).max() < 0.06
    assert np.abs(np.var(e.state.n, axis=0) - 1).max() < 0.04


def test_shear_covariance_matches_lyapunov():
    par = PhysParamsDumbbell(epsilon=0.5, flow=FlowField.simple_shear(1.0, 2), dim=2)
    C = inertial_lyapunov_covariance(par)
    s = equilibrium_state(40_000, par, np.random.default_rng(2))
    e = simulate_ensemble(Ensemble(s, 7), InertialDumbbell(par), 0.1, 15.0)
    np.testing.assert_allclose(np.cov(e.state.n.T), C[:2, :2], atol=0.05)


def test_overdamped_relaxation_matches_ou():
    par = PhysParamsDumbbell(dim=1)
    s = DumbbellState.zeros(40_000, 1)
    s.n[:] = 2.0
    e = simulate_ensemble(Ensemble(s, 3), OverdampedDumbbell(par, x_noise=False), 0.01, 0.5)
    m, v = ou_marginal(2.0, 0.5, 1.0)
    assert abs(e.state.n.mean() - m) < 0.03
    assert abs(e.state.n.var() - v) < 0.03
