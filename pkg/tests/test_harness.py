import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polykin.dumbbell import DumbbellState, PhysParamsDumbbell
from polykin.forces import FlowField, SpringModel
from polykin.harness import (
    MIN_SAMPLES,
    SweepConfig,
    epsilon_sweep,
    estimate_moments,
    fit_decay_rate,
    fit_order,
    free_rotation_bin_probs,
    gaussian_bin_probs,
    hist_l1,
    inertial_lyapunov_covariance,
    jackknife,
    lyapunov_covariance,
    mardia_test,
    n_bins,
    stress_tensor,
)


@given(arrays(float, (200, 2), elements=st.floats(-10, 10, allow_nan=False)))
def test_jackknife_mean_matches_sample_mean(x):
    val, se = jackknife(x, lambda r: r.mean(axis=0))
    np.testing.assert_allclose(val, x.mean(axis=0), atol=1e-9)
    assert np.all(se >= 0)


def test_jackknife_se_of_mean_is_standard_error():
    x = np.random.default_rng(0).normal(size=(100_000, 1))
    _, se = jackknife(x, lambda r: r.mean(axis=0))
    assert abs(se[0] / (1 / np.sqrt(len(x))) - 1) < 0.4


def test_estimators_refuse_small_ensembles():
    with pytest.raises(ValueError, match=str(MIN_SAMPLES)):
        estimate_moments(DumbbellState.zeros(MIN_SAMPLES - 1, 3), 0.5)


def test_moment_columns_fixed_order():
    s = DumbbellState.zeros(200, 2)
    s.n[:] = np.random.default_rng(1).normal(size=(200, 2))
    cols = list(estimate_moments(s, 0.5).columns())
    assert cols[:4] == ["rho", "mean_0", "mean_1", "cov_00"]
    assert cols.index("S") < cols.index("SE_mean_0")


@given(st.floats(0.1, 3.0), st.floats(0.0, 2.0))
def test_lyapunov_covariance_solves_equation(H, rate):
    kappa = FlowField.simple_shear(rate, 2).kappa
    C = lyapunov_covariance(kappa, H)
    A = kappa - 2 * H * np.eye(2)
    np.testing.assert_allclose(A @ C + C @ A.T + 4 * np.eye(2), 0, atol=1e-10)


def test_inertial_lyapunov_reduces_to_equilibrium():
    C = inertial_lyapunov_covariance(PhysParamsDumbbell(epsilon=0.5, dim=2))
    np.testing.assert_allclose(C[:2, :2], np.eye(2), atol=1e-12)


def test_bin_probabilities_sum_to_one():
    e = np.linspace(-1, 1, 33)
    assert abs(free_rotation_bin_probs(e, 0.25, 1.0).sum() - 1) < 1e-12
    assert abs(gaussian_bin_probs(np.linspace(-12, 12, 40), 0.0, 1.0).sum() - 1) < 1e-12


def test_hist_l1_small_for_exact_sample():
    N = 200_000
    x = np.random.default_rng(4).normal(size=N)
    e = np.linspace(-5, 5, n_bins(N) + 1)
    assert hist_l1(x, e, gaussian_bin_probs(e, 0, 1)) < 0.02


def test_mardia_accepts_gaussian_rejects_uniform():
    rng = np.random.default_rng(0)
    assert min(mardia_test(rng.normal(size=(20_000, 3)))) > 1e-3
    assert min(mardia_test(rng.uniform(size=(20_000, 3)))) < 1e-6


@given(st.floats(0.5, 3.0))
def test_fit_order_recovers_power(k):
    eps = np.array([0.4, 0.2, 0.1])
    assert abs(fit_order(eps, 3 * eps**k) - k) < 1e-10


def test_fit_decay_rate_exact_exponential():
    t = np.linspace(0, 1, 11)
    assert abs(fit_decay_rate(t, 2 * np.exp(-3 * t)) - 3) < 1e-12


def test_stress_tensor_equilibrium_sample():
    s = DumbbellState.zeros(50_000, 3)
    s.n[:] = np.random.default_rng(2).normal(size=s.n.shape)
    st_ = stress_tensor(s, SpringModel())
    assert np.abs(st_.tau - np.eye(3)).max() < 5 * st_.se.max()


def test_sweep_needs_two_epsilons():
    with pytest.raises(ValueError, match="need"):
        epsilon_sweep(SweepConfig(engine="fp-inertial-reduced", epsilons=(0.2,)))


def test_reduced_sweep_report():
    rep = epsilon_sweep(SweepConfig(engine="fp-inertial-reduced", spring="fene", epsilons=(0.4, 0.2),
                                    n_cells=120, n_modes=10))
    assert rep.pass_flags["monotone"]
    assert np.isfinite(rep.fitted_order)
    d = json.loads(rep.to_json())
    assert d["epsilons"] == [0.4, 0.2]
