"""Exit criteria 1-11.

Every criterion prints one ``PASS``/``FAIL`` line (also repeated in the
terminal summary) and then asserts. Tolerances are the stated ones; the
runtime budget is part of each verdict.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from polykin import verification as V
from polykin.cli import main
from polykin.harness import SweepConfig, epsilon_sweep

pytestmark = pytest.mark.acceptance


def _record(number: int, title: str, verdicts, elapsed: float, budget: float) -> None:
    ok = all(v.passed for v in verdicts) and elapsed < budget
    details = "; ".join(v.line() for v in verdicts)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}) in {elapsed:.1f}s (budget {budget:g}s): {details}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert all(v.passed for v in verdicts), details
    assert elapsed < budget, f"runtime {elapsed:.1f}s over budget {budget:g}s"


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_criterion_01_dumbbell_equilibrium():
    (verdicts, _), dt = _timed(V.dumbbell_equilibrium, 100_000)
    _record(1, "dumbbell Maxwellian", verdicts, dt, 120)


def test_criterion_02_rod_equilibrium():
    verdicts, dt = _timed(V.rod_equilibrium, 100_000)
    _record(2, "rod Maxwellian", verdicts, dt, 180)


@pytest.fixture(scope="module")
def collision_verdicts():
    verdicts, dt = _timed(V.collision_battery)
    return {v.name: v for v in verdicts}, dt


def test_criterion_03_collision_certificate(collision_verdicts):
    vs, dt = collision_verdicts
    names = ["Q_mass_conservation", "Q_dissipation_sign", "Q_maxwellian_order"]
    _record(3, "collision operator", [vs[n] for n in names], dt, 60)


def test_criterion_04_cell_problems(collision_verdicts):
    vs, dt = collision_verdicts
    _record(4, "cell problems", [vs["cell_problem_vs_analytic"], vs["cell_problem_orthogonality"]], dt, 120)


def test_criterion_05_gaussian_moments(collision_verdicts):
    vs, _ = collision_verdicts
    verdict = vs["gaussian_moment_identities"]
    # timed on its own: it is a small part of the shared battery
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    from polykin.collision import gaussian_moment_identity

    for _ in range(100):
        gaussian_moment_identity(rng.normal(size=3), rng.normal(size=3), 1.0)
    _record(5, "Gaussian moment identities", [verdict], time.perf_counter() - t0, 10)


def test_criterion_06_limit_steady_states():
    verdicts, dt = _timed(V.limit_steady_states)
    _record(6, "limit steady states", verdicts, dt, 120)


def test_criterion_07_p2_decay():
    verdicts, dt = _timed(V.p2_decay_battery)
    _record(7, "P2 decay rate", verdicts, dt, 180)


def _sweep_verdicts(tag, rep):
    out = [V._v(f"{tag}_{k}", 0.0, 1.0, ok=v) for k, v in rep.pass_flags.items()]
    out.append(V._v(f"{tag}_distances", rep.distances[-1], np.inf,
                    "L1 " + ", ".join(f"{d:.3g}" for d in rep.distances) + f"; order {rep.fitted_order:.2f}"
                    + "; factorization " + ", ".join(f"{f:.3g}" for f in rep.factorization)))
    return out


@pytest.mark.slow
def test_criterion_08_epsilon_convergence():
    t0 = time.perf_counter()
    verdicts = []
    fp = epsilon_sweep(SweepConfig(engine="fp-inertial-reduced", spring="fene", epsilons=(0.4, 0.2, 0.1, 0.05)))
    verdicts.append(V._v("reduced_fp_monotone", 0.0, 1.0, ok=fp.pass_flags["monotone"]))
    verdicts.append(V._v("reduced_fp_order", fp.fitted_order, 0.8, "fitted order >= 0.8", ok=fp.fitted_order >= 0.8))
    db = epsilon_sweep(SweepConfig(model="dumbbell", epsilons=(0.4, 0.2, 0.1), N=1_000_000, dt=0.05, threads=4))
    verdicts += _sweep_verdicts("sde_dumbbell", db)
    rod = epsilon_sweep(SweepConfig(model="rod", epsilons=(0.4, 0.2, 0.1), N=500_000, dt=0.01, threads=4))
    verdicts += _sweep_verdicts("sde_rod", rod)
    _record(8, "epsilon -> 0 convergence", verdicts, time.perf_counter() - t0, 900)


def test_criterion_09_stress():
    verdicts, dt = _timed(V.stress_battery)
    _record(9, "stress oracle", verdicts, dt, 120)


def test_criterion_10_geometry():
    verdicts, dt = _timed(V.geometry_battery)
    _record(10, "geometry identities", verdicts, dt, 10)


CONFIGS = {
    "fene_dumbbell": "[run]\nmodel = dumbbell\nengine = sde-inertial\nN = 10000\nt_final = 1.0\n"
                     "[physics]\nspring = fene\nn0 = 2.0\nepsilon = 0.3\n[init]\nn_init = 1.5, 0, 0\n",
    "onsager_rod": "[run]\nmodel = rod\nengine = sde-inertial\nN = 5000\nt_final = 0.3\n"
                   "[physics]\nonsager_strength = 8\nflow = shear\nshear_rate = 1\n",
}


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    verdicts = []
    for name, text in CONFIGS.items():
        cfg = tmp_path / f"{name}.ini"
        cfg.write_text(text)
        outs = []
        for threads in (1, 4):
            out = tmp_path / f"{name}_{threads}"
            assert main(["simulate", "--config", str(cfg), "--out", str(out), "--threads", str(threads)]) == 0
            outs.append((out / "moments.csv").read_bytes())
        verdicts.append(V._v(f"{name}_byte_identical", 0.0, 1.0, f"{len(outs[0])} bytes", ok=outs[0] == outs[1]))
    _record(11, "determinism across --threads", verdicts, time.perf_counter() - t0, 60)
