"""Named invariant batteries used by ``polykin verify`` and the test suite.

Each battery returns a list of :class:`Verdict`; a battery passes iff all of
its verdicts pass. ``quick`` shrinks sample sizes and sweep lists for smoke
runs; tolerances are never loosened.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import collision, geometry
from .dumbbell import DumbbellState, InertialDumbbell, PhysParamsDumbbell
from .ensemble import Ensemble, simulate_ensemble
from .forces import FlowField, SpringModel
from .fp.ball import LimitParams, LimitSolver, ball_grid, equilibrium_density, l1_distance
from .fp.doi import DoiParams, DoiSolver, von_mises_fisher
from .harness import (
    SweepConfig,
    epsilon_sweep,
    fit_decay_rate,
    inertial_lyapunov_covariance,
    jackknife,
    mardia_test,
    stress_tensor,
    variance_check,
)
from .rod import InertialRod, OverdampedRod, PhysParamsRod, RodState
from .rod import equilibrium_state as rod_equilibrium_state


@dataclass
class Verdict:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.3e} (tol {self.tolerance:.1e}) {self.detail}".rstrip()


def _v(name, value, tol, detail="", ok=None) -> Verdict:
    value = float(value)
    return Verdict(name, bool(value < tol) if ok is None else bool(ok), value, float(tol), detail)


def report(verdicts: list[Verdict]) -> str:
    return json.dumps([asdict(v) for v in verdicts], indent=2)


# geometry -------------------------------------------------------------------------


def polynomial_battery(count: int = 20, seed: int = 31):
    """Fixed battery of cubic scalar fields on R^3 and linear-plus-quadratic vector fields."""
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(count):
        c1 = rng.normal(size=3)
        c2 = rng.normal(size=(3, 3))
        c3 = rng.normal(size=(3, 3, 3))
        G1 = rng.normal(size=(3, 3))
        G2 = rng.normal(size=(3, 3, 3))

        def g(x, c1=c1, c2=c2, c3=c3):
            return float(c1 @ x + x @ c2 @ x + np.einsum("ijk,i,j,k->", c3, x, x, x) / 3)

        def f(m, v, c2=c2, c3=c3):
            return float(m @ c2 @ v + np.einsum("ijk,i,j,k->", c3, m, v, v) / 3 + m @ v)

        def vec(x, G1=G1, G2=G2):
            return G1 @ x + np.einsum("ijk,j,k->i", G2, x, x) / 2

        fields.append((g, f, vec))
    return fields


def geometry_battery(quick: bool = False) -> list[Verdict]:
    rng = np.random.default_rng(7)
    out = []
    worst_chain = worst_bundle = 0.0
    for g, f, vec in polynomial_battery():
        a, y = rng.normal(size=3), rng.normal(size=3)
        r = geometry.cross_chain_identity_check(a, g, y)
        worst_chain = max(worst_chain, r.residual, r.parallel)
        n = geometry.normalize(rng.normal(size=3))
        w = geometry.tangent_project(rng.normal(size=3), n)
        res = geometry.bundle_change_of_variables_check(n, w, f, vec)
        worst_bundle = max(worst_bundle, *res.values())
    out.append(_v("cross_chain_identity", worst_chain, 1e-6, "20 cubic fields"))
    out.append(_v("bundle_change_of_variables", worst_bundle, 1e-6, "20 polynomial fields"))

    worst_R = worst_tan = 0.0
    for _ in range(100):
        n = geometry.normalize(rng.normal(size=3))
        a = rng.normal(size=3)
        R = geometry.rotational_gradient(lambda m, a=a: float(m @ a), n)
        worst_R = max(worst_R, np.abs(R - np.cross(n, a)).max())
        worst_tan = max(worst_tan, abs(R @ n))
    out.append(_v("rotgrad_linear", worst_R, 1e-8, "R(n.a) = n x a, 100 random n, a"))
    out.append(_v("rotgrad_tangent", worst_tan, 1e-8))

    worst_K = 0.0
    for _ in range(100):
        n = geometry.normalize(rng.normal(size=3))
        K = geometry.rotate_to_pole(n)
        worst_K = max(worst_K, np.abs(K @ geometry.E3 - n).max(), np.abs(K.T @ K - np.eye(3)).max(),
                      abs(np.linalg.det(K) - 1))
    out.append(_v("rotate_to_pole", worst_K, 1e-12))

    # divergence of a rotational-gradient field integrates to zero
    from .spectral import SphereGrid

    grid = SphereGrid(16, 32)
    th, ph = np.meshgrid(grid.theta, grid.phi, indexing="ij")
    a = np.array([0.3, -0.2, 1.0])

    def A(n):
        return np.cross(n, a)

    div = np.array([[geometry.sphere_divergence(A, geometry.SphCoord(t, p)) for t, p in zip(r1, r2)]
                    for r1, r2 in zip(th, ph)])
    out.append(_v("divergence_integral", abs(grid.integrate(div)), 1e-6))
    return out


# collision ------------------------------------------------------------------------


def q_maxwellian_orders(ns=(32, 64, 128, 256)) -> tuple[np.ndarray, float]:
    res = []
    for n in ns:
        g = collision.VelocityGrid.dumbbell(d=1, n=n)
        M = g.maxwellian(cell_average=True)
        res.append(np.abs(collision.apply_Q(M, g)).max())
    res = np.array(res)
    order = -np.polyfit(np.log(ns), np.log(res), 1)[0]
    return res, float(order)


def collision_battery(quick: bool = False) -> list[Verdict]:
    rng = np.random.default_rng(11)
    out = []
    grids = [collision.VelocityGrid.dumbbell(d=1, n=32), collision.VelocityGrid.rod(n=24)]
    worst_mass = 0.0
    worst_diss = -np.inf
    for i in range(50):
        grid = grids[i % 2]
        f = rng.normal(size=grid.shape) * grid.maxwellian() + 0.1 * rng.random(grid.shape)
        norm = np.sqrt(grid.integrate(f**2))
        worst_mass = max(worst_mass, abs(grid.integrate(collision.apply_Q(f, grid))) / norm)
        worst_diss = max(worst_diss, collision.dissipation(f, grid) / norm**2)
    out.append(_v("Q_mass_conservation", worst_mass, 1e-13, "50 random f, relative to ||f||"))
    out.append(_v("Q_dissipation_sign", max(worst_diss, 0.0), 1e-12, "positive part of max D(f)/||f||^2",
                  ok=worst_diss <= 1e-12))
    _, order = q_maxwellian_orders()
    out.append(_v("Q_maxwellian_order", abs(order - 2.0), 0.2, f"observed order {order:.3f}"))

    # cell problems at 64 points per axis
    n = 64
    g = collision.VelocityGrid.dumbbell(d=1, n=n)
    sol = collision.analytic_cell_solutions("dumbbell", zeta=1.0)
    P, Qv = np.meshgrid(g.axes[0].nodes, g.axes[1].nodes, indexing="ij")
    p3, q3 = P[..., None], Qv[..., None]
    M = g.maxwellian()
    errs, orth = [], []
    for k, (rhs, exact) in enumerate([(P * M, sol.a(p3, q3)[..., 0]), (Qv * M, sol.b(p3, q3)[..., 0])]):
        psi = collision.solve_cell_problem(rhs, g)
        errs.append(np.linalg.norm(psi - exact) / np.linalg.norm(exact))
        other = Qv if k == 0 else P
        orth.append(abs(g.integrate(psi * other)))
    # c and d
    for fn, other in [(sol.c, Qv), (sol.d, P)]:
        orth.append(abs(g.integrate(fn(p3, q3)[..., 0] * other)))

    rg = collision.VelocityGrid.rod(kBT=1.0, zeta_t=2.0, zeta_r=0.5, n=n, pole=np.array([0.3, 0.4, 0.866]))
    rsol = collision.analytic_cell_solutions("rod", kBT=1.0, zeta_t=2.0, zeta_r=0.5)
    Pr, W1, W2 = np.meshgrid(*[ax.nodes for ax in rg.axes], indexing="ij")
    Mr = rg.maxwellian()
    W = np.stack([W1, W2], -1)
    for rhs, exact, other in [
        (Pr * Mr, rsol.a(Pr[..., None], W)[..., 0], W1),
        (W1 * Mr, rsol.b(Pr[..., None], W)[..., 0], Pr),
        (W2 * Mr, rsol.b(Pr[..., None], W)[..., 1], Pr),
    ]:
        psi = collision.solve_cell_problem(rhs, rg)
        errs.append(np.linalg.norm(psi - exact) / np.linalg.norm(exact))
        orth.append(abs(rg.integrate(psi * other)))
    out.append(_v("cell_problem_vs_analytic", max(errs), 1e-4, "relative L2, 64 points per axis"))
    out.append(_v("cell_problem_orthogonality", max(orth), 1e-10))

    worst = 0.0
    for _ in range(100):
        A = rng.normal(size=3)
        nvec = geometry.normalize(rng.normal(size=3))
        kBT = rng.uniform(0.2, 3.0)
        mi = collision.gaussian_moment_identity(A, nvec, kBT)
        worst = max(worst, np.abs(mi.lhs_p - mi.rhs_p).max() / np.abs(mi.rhs_p).max(),
                    np.abs(mi.lhs_omega - mi.rhs_omega).max() / max(np.abs(mi.rhs_omega).max(), 1e-300))
    out.append(_v("gaussian_moment_identities", worst, 1e-8, "100 random (A, n)"))
    return out


# equilibrium ---------------------------------------------------------------------


def slowest_relaxation(par: PhysParamsDumbbell) -> float:
    m, g, w2 = par.mass, par.zeta / par.mass, 2 * par.spring.H / par.mass
    lam = np.roots([1.0, g, w2])
    return float(max(1 / np.abs(lam.real).min(), m / par.zeta))


def dumbbell_equilibrium(N: int = 100_000, seed: int = 1, threads: int = 1) -> tuple[list[Verdict], Ensemble]:
    par = PhysParamsDumbbell(epsilon=0.5, spring=SpringModel("hookean", 1.0), dim=3)
    t_final = 20 * slowest_relaxation(par)
    s = DumbbellState.zeros(N, 3)
    ens = simulate_ensemble(Ensemble(s, seed), InertialDumbbell(par), 0.05, t_final, threads=threads)
    p, q = ens.state.scaled_velocities(par.epsilon)
    X = np.hstack([p, q])
    var, se, ok = variance_check(X, 2 * par.kBT)
    dev = np.abs(var - 2 * par.kBT) / se
    ps, pk = mardia_test(X)
    out = [
        _v("dumbbell_velocity_variance", dev.max(), 3.0, f"max |var-2kBT|/SE over 6 components; t={t_final:g}"),
        _v("dumbbell_joint_normality", min(ps, pk), 0.005, f"Mardia p-values skew={ps:.3f} kurt={pk:.3f}",
           ok=min(ps, pk) > 0.005),
    ]
    return out, ens


def rod_equilibrium(N: int = 100_000, seed: int = 2, dt: float = 0.02, threads: int = 1) -> list[Verdict]:
    par = PhysParamsRod(epsilon=0.5)
    t_final = 20 * max(par.inertia / par.zeta_r, 1 / (2 * par.D_r), par.mass / par.zeta_t)
    s = RodState(np.zeros((N, 3)), np.zeros((N, 3)), np.tile(geometry.E3, (N, 1)), np.zeros((N, 3)))
    ens = simulate_ensemble(Ensemble(s, seed), InertialRod(par), dt, t_final, threads=threads)
    st = ens.state
    sp, sw = st.scaled_velocities(par)
    var_p, se_p, _ = variance_check(sp, par.kBT)
    n = st.n
    e1 = geometry.normalize(np.cross(n, np.where(np.abs(n[:, :1]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]])))
    e2 = np.cross(n, e1)
    tang = np.stack([np.sum(sw * e1, 1), np.sum(sw * e2, 1)], 1)
    var_w, se_w, _ = variance_check(tang, par.kBT)
    normal = np.abs(np.sum(st.omega * n, 1)).max()
    return [
        _v("rod_p_variance", (np.abs(var_p - par.kBT) / se_p).max(), 3.0, "max |var-kBT|/SE, 3 components"),
        _v("rod_omega_tangent_variance", (np.abs(var_w - par.kBT) / se_w).max(), 3.0,
           "max |var-kBT|/SE, 2 tangent components"),
        _v("rod_omega_normal", normal, 1e-8, "max |omega.n|"),
        _v("rod_unit_length", np.abs(np.linalg.norm(n, axis=1) - 1).max(), 1e-12),
    ]


def equilibrium_battery(quick: bool = False, threads: int = 1) -> list[Verdict]:
    N = 20_000 if quick else 100_000
    out, _ = dumbbell_equilibrium(N, threads=threads)
    return out + rod_equilibrium(N, threads=threads)


def stress_battery(N: int = 100_000, seed: int = 5, threads: int = 1) -> list[Verdict]:
    spring = SpringModel("hookean", 1.0)
    eq = PhysParamsDumbbell(epsilon=0.5, spring=spring, dim=3)
    rng = np.random.default_rng([seed, 1])
    from .dumbbell import equilibrium_state

    ens = simulate_ensemble(Ensemble(equilibrium_state(N, eq, rng), seed), InertialDumbbell(eq), 0.05, 2.0,
                            threads=threads)
    st = stress_tensor(ens, spring)
    dev = np.abs(st.tau - eq.kBT * np.eye(3)) / st.se
    out = [_v("stress_equilibrium", dev.max(), 3.0, "max |tau - kBT I|/SE")]
    rate = 1.0
    sh = PhysParamsDumbbell(epsilon=0.5, spring=spring, flow=FlowField.simple_shear(rate, 3), dim=3)
    C = inertial_lyapunov_covariance(sh)
    ens = simulate_ensemble(Ensemble(equilibrium_state(N, sh, rng), seed + 1), InertialDumbbell(sh), 0.05,
                            20 * slowest_relaxation(sh), threads=threads)
    st = stress_tensor(ens, spring)
    oracle = spring.H * C[0, 1] / rate
    z = abs(st.tau[0, 1] / rate - oracle) / (st.se[0, 1] / rate)
    out.append(_v("stress_shear_vs_lyapunov", z, 3.0, f"tau12/rate={st.tau[0, 1] / rate:.4f} oracle={oracle:.4f}"))
    asym = np.abs(st.tau - st.tau.T) / np.sqrt(st.se**2 + st.se.T**2 + 1e-300)
    out.append(_v("stress_symmetry", asym.max(), 3.0))
    return out


# limits ------------------------------------------------------------------------------


def limit_steady_states() -> list[Verdict]:
    out = []
    for name, spring, dim, tol in [
        ("fene_steady_state", SpringModel("fene", 1.0, 3.0), 3, 1e-5),
        ("hookean_steady_state", SpringModel("hookean", 1.0), 3, 1e-6),
        ("fene_steady_state_2d", SpringModel("fene", 1.0, 3.0), 2, 1e-5),
    ]:
        par = LimitParams(spring=spring, dim=dim)
        grid = ball_grid(par, n_r=2000, coords="radial")
        rho = LimitSolver(grid, par).steady_state()
        out.append(_v(name, l1_distance(grid, rho, equilibrium_density(grid, par)), tol))
    return out


def p2_decay_spectral(D_r: float = 1.0) -> tuple[float, float]:
    s = DoiSolver(DoiParams(D_r=D_r, l_max=16))
    a0 = von_mises_fisher(16, 20.0)
    t = np.linspace(0, np.log(10) / (6 * D_r), 11)
    y = np.array([s.h.mean_p2(s.advance(a0, tt)) for tt in t])
    return fit_decay_rate(t, y), float(abs(s.mass(s.advance(a0, t[-1])) - 1))


def p2_decay_sde(N: int = 100_000, D_r: float = 1.0, dt: float = 1e-3, seed: int = 3, threads: int = 1):
    """Overdamped rod ensemble from ``e3``; returns (rate, jackknife SE of the rate)."""
    par = PhysParamsRod(zeta_r=1.0 / D_r, kBT=1.0)
    t_end = np.log(10) / (6 * D_r)
    times = np.linspace(0, t_end, 11)
    s = RodState(np.zeros((N, 3)), np.zeros((N, 3)), np.tile(geometry.E3, (N, 1)), np.zeros((N, 3)))
    cols = []
    simulate_ensemble(Ensemble(s, seed), OverdampedRod(par, x_noise=False), dt, t_end,
                      observers=[lambda t, st: cols.append(1.5 * st.n[:, 2] ** 2 - 0.5)],
                      sample_times=times, threads=threads)
    Y = np.stack(cols, 1)
    tt = times[: Y.shape[1]]
    y = Y.mean(0)
    se0 = Y.std(0) / np.sqrt(N)

    def rate(rows):
        return np.array([fit_decay_rate(tt, rows.mean(0), se0)])

    r, se = jackknife(Y, rate)
    return float(r[0]), float(se[0])


def p2_decay_battery(quick: bool = False, threads: int = 1) -> list[Verdict]:
    D_r = 1.0
    r, mass = p2_decay_spectral(D_r)
    out = [_v("p2_decay_spectral", abs(r / (6 * D_r) - 1), 1e-3, f"rate={r:.6f}"),
           _v("doi_mass", mass, 1e-10)]
    rs, se = p2_decay_sde(20_000 if quick else 100_000, D_r, threads=threads)
    out.append(_v("p2_decay_sde", abs(rs / (6 * D_r) - 1), 1e-2, f"rate={rs:.4f} SE={se:.4f}"))
    return out


def limits_battery(quick: bool = False, threads: int = 1) -> list[Verdict]:
    out = limit_steady_states() + p2_decay_battery(quick, threads)
    eps = (0.4, 0.2) if quick else (0.4, 0.2, 0.1, 0.05)
    rep = epsilon_sweep(SweepConfig(engine="fp-inertial-reduced", spring="fene", epsilons=eps))
    out.append(_v("reduced_fp_monotone", 0, 1, str(rep.distances), ok=rep.pass_flags["monotone"]))
    out.append(_v("reduced_fp_order", rep.fitted_order, 0.8, "fitted order must be >= 0.8",
                  ok=rep.fitted_order >= 0.8))
    out.append(_v("reduced_fp_mass", rep.metadata["mass_error"], 1e-10))
    return out


BATTERIES = {
    "geometry": geometry_battery,
    "collision": collision_battery,
    "equilibrium": equilibrium_battery,
    "limits": limits_battery,
}


def run_battery(name: str, quick: bool = False, threads: int = 1) -> list[Verdict]:
    fn = BATTERIES[name]
    if name in ("equilibrium", "limits"):
        return fn(quick, threads)
    return fn(quick)
