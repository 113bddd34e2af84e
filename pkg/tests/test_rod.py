import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polykin import geometry
from polykin.ensemble import Ensemble, simulate_ensemble
from polykin.forces import FlowField
from polykin.rod import (
    InertialRod,
    MeanFieldOnsager,
    OverdampedRod,
    PhysParamsRod,
    RodState,
    equilibrium_state,
    step_inertial_rod,
)


def test_inertia_convention():
    par = PhysParamsRod(epsilon=0.3)
    assert abs(par.inertia - par.mass) < 1e-15


@given(st.integers(0, 2**32 - 1), st.floats(0.001, 0.5))
def test_inertial_step_keeps_constraints(seed, dt):
    par = PhysParamsRod(epsilon=0.4, flow=FlowField.simple_shear(1.0))
    s = equilibrium_state(64, par, np.random.default_rng(seed))
    out = step_inertial_rod(s, par, dt, np.random.default_rng(seed + 1))
    r, t = out.constraint_errors()
    assert r < 1e-12 and t < 1e-8


def test_equilibrium_state_fixed_orientation():
    par = PhysParamsRod()
    s = equilibrium_state(10, par, np.random.default_rng(0), np.array([0, 0, 2.0]))
    np.testing.assert_allclose(s.n, np.tile(geometry.E3, (10, 1)))
    assert s.constraint_errors()[1] < 1e-12


def test_params_reject_2d_flow():
    with pytest.raises(ValueError):
        PhysParamsRod(flow=FlowField.quiescent(2))


def test_overdamped_uniform_stays_uniform():
    par = PhysParamsRod()
    s = equilibrium_state(50_000, par, np.random.default_rng(4))
    e = simulate_ensemble(Ensemble(s, 2), OverdampedRod(par, x_noise=False), 0.01, 0.3)
    nn = e.state.n.T @ e.state.n / len(e.state)
    np.testing.assert_allclose(nn, np.eye(3) / 3, atol=0.01)


def test_mean_field_potential_vanishes_on_uniform_sample():
    mf = MeanFieldOnsager(10.0, 4)
    n = geometry.normalize(np.random.default_rng(1).normal(size=(200_000, 3)))
    mf.update(n)
    assert np.abs(mf.gradient(n[:100])).max() < 0.1


def test_mean_field_torque_is_tangent():
    mf = MeanFieldOnsager(10.0, 4)
    n = np.tile(geometry.E3, (100, 1))
    mf.update(n + 0.01 * np.random.default_rng(2).normal(size=n.shape))
    m = geometry.normalize(np.random.default_rng(3).normal(size=(20, 3)))
    g = mf.gradient(m)
    assert np.abs(np.sum(g * m, 1)).max() < 1e-10


def test_inertial_rod_with_mean_field_runs():
    par = PhysParamsRod(epsilon=0.5)
    s = equilibrium_state(300, par, np.random.default_rng(0))
    e = simulate_ensemble(Ensemble(s, 1), InertialRod(par, MeanFieldOnsager(5.0, 4)), 0.02, 0.1)
    assert e.state.constraint_errors()[0] < 1e-12
