import numpy as np
import pytest

from polykin.dumbbell import DumbbellState, InertialDumbbell, PhysParamsDumbbell
from polykin.ensemble import BLOCK, Ensemble, NumericAbort, simulate_ensemble
from polykin.forces import SpringModel


def _run(N, threads, seed=3, t=0.2):
    par = PhysParamsDumbbell(epsilon=0.5)
    return simulate_ensemble(Ensemble(DumbbellState.zeros(N, 3), seed), InertialDumbbell(par), 0.05, t,
                             threads=threads)


def test_results_independent_of_threads():
    a = _run(BLOCK + 100, 1).state
    b = _run(BLOCK + 100, 3).state
    for k in ("n", "p", "q"):
        np.testing.assert_array_equal(getattr(a, k), getattr(b, k))


def test_prefix_stability():
    # trajectory i only depends on (seed, block, i) so growing N keeps the first block
    a = _run(200, 1).state
    b = _run(300, 1).state
    np.testing.assert_array_equal(a.n, b.n[:200])


def test_different_seeds_differ():
    assert not np.array_equal(_run(200, 1, seed=1).state.n, _run(200, 1, seed=2).state.n)


def test_observers_see_sample_times():
    seen = []
    par = PhysParamsDumbbell(epsilon=0.5)
    simulate_ensemble(Ensemble(DumbbellState.zeros(10, 3), 0), InertialDumbbell(par), 0.1, 1.0,
                      [lambda t, s: seen.append(round(t, 10))], [0.0, 0.5, 1.0])
    assert seen == [0.0, 0.5, 1.0]


def test_ensemble_time_and_steps():
    e = _run(10, 1, t=0.5)
    assert e.steps == 10 and abs(e.time - 0.5) < 1e-12


def test_fene_large_steps_stay_inside_ball():
    par = PhysParamsDumbbell(epsilon=0.3, spring=SpringModel("fene", 1.0, 2.0), dim=3)
    s = DumbbellState.zeros(500, 3)
    s.n[:, 0] = 1.8
    e = simulate_ensemble(Ensemble(s, 4), InertialDumbbell(par), 0.2, 2.0)
    assert np.linalg.norm(e.state.n, axis=1).max() < 2.0


class _Bad:
    def step(self, s, dt, rng):
        out = s.copy()
        out.n[0, 0] = np.nan
        return out

    def valid(self, s):
        return np.ones(len(s), dtype=bool)


def test_non_finite_state_aborts_with_location():
    with pytest.raises(NumericAbort) as info:
        simulate_ensemble(Ensemble(DumbbellState.zeros(5, 1), 0), _Bad(), 0.1, 0.3)
    assert info.value.trajectory == 0 and info.value.step == 1
