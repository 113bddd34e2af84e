"""Estimators, oracles and epsilon sweeps.

Monte Carlo error bars are delete-one-group jackknife estimates over
``JACKKNIFE_GROUPS`` contiguous groups. Distances between a sample and a
reference density are L1 distances of histograms (``HIST_SCALE * N^(1/3)``
bins per axis) against exact bin probabilities.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import linalg, stats
from scipy.special import erf, eval_legendre

from .dumbbell import DumbbellState, InertialDumbbell, PhysParamsDumbbell
from .ensemble import Ensemble, simulate_ensemble
from .forces import FlowField, SpringModel
from .rod import InertialRod, PhysParamsRod, RodState
from .rod import equilibrium_state as rod_equilibrium_state

JACKKNIFE_GROUPS = 20
MIN_SAMPLES = 100
HIST_SCALE = 0.25


# estimators ---------------------------------------------------------------------


def jackknife(values: np.ndarray, estimator: Callable[[np.ndarray], np.ndarray], groups: int = JACKKNIFE_GROUPS):
    """Estimate and jackknife standard error of ``estimator`` over rows."""
    values = np.asarray(values)
    N = values.shape[0]
    if N < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples for error bars, got {N}")
    full = np.asarray(estimator(values))
    edges = np.linspace(0, N, groups + 1).astype(int)
    parts = []
    for g in range(groups):
        keep = np.ones(N, dtype=bool)
        keep[edges[g] : edges[g + 1]] = False
        parts.append(estimator(values[keep]))
    parts = np.asarray(parts)
    se = np.sqrt((groups - 1) / groups * np.sum((parts - parts.mean(axis=0)) ** 2, axis=0))
    return full, se


@dataclass
class MomentSet:
    rho: float
    mean_n: np.ndarray
    cov_nn: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    S: float
    se: dict[str, np.ndarray] = field(default_factory=dict)

    def columns(self) -> dict[str, float]:
        """Flat ``name -> value`` mapping in the fixed CSV column order."""
        d = self.mean_n.size
        out = {"rho": self.rho}
        out.update({f"mean_{i}": self.mean_n[i] for i in range(d)})
        out.update({f"cov_{i}{j}": self.cov_nn[i, j] for i in range(d) for j in range(i, d)})
        out.update({f"J1_{i}": self.J1[i] for i in range(self.J1.size)})
        out.update({f"J2_{i}": self.J2[i] for i in range(self.J2.size)})
        out["S"] = self.S
        out.update({f"SE_mean_{i}": self.se["mean_n"][i] for i in range(d)})
        out.update({f"SE_cov_{i}{j}": self.se["cov_nn"][i, j] for i in range(d) for j in range(i, d)})
        out.update({f"SE_J1_{i}": self.se["J1"][i] for i in range(self.J1.size)})
        out.update({f"SE_J2_{i}": self.se["J2"][i] for i in range(self.J2.size)})
        out["SE_S"] = self.se["S"]
        return out


def _order_S(nn: np.ndarray) -> float:
    return float(1.5 * np.linalg.eigvalsh(nn - np.eye(3) / 3)[-1])


def _moment_rows(state, epsilon: float, par=None) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """``(n, J1 integrand, J2 integrand, is_rod)`` per trajectory."""
    if isinstance(state, RodState):
        L = par.L if par is not None else float(np.sqrt(12.0))
        # J2 = (1/eps) int (sqrt(j) omega) f = (L/sqrt(12)) <omega>
        return state.n, state.p, state.omega * L / np.sqrt(12.0), True
    return state.n, state.p, state.q, False


def estimate_moments(ens: Ensemble | DumbbellState | RodState, epsilon: float, par=None) -> MomentSet:
    """Moments with the ``1/eps`` flux scaling.

    With scaled velocities ``eps p`` the flux ``(1/eps) int (eps p) f`` is
    the ensemble mean of the unscaled velocity.
    """
    state = ens.state if isinstance(ens, Ensemble) else ens
    n, v1, v2, rod = _moment_rows(state, epsilon, par)
    N, d = n.shape
    if N < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} trajectories, got {N}")
    iu = np.triu_indices(d)

    def est(rows):
        nn = rows[:, :d]
        m = nn.mean(axis=0)
        c = np.cov(nn, rowvar=False, bias=False).reshape(d, d)
        out = [m, c[iu], rows[:, d : 2 * d].mean(axis=0), rows[:, 2 * d :].mean(axis=0)]
        S = _order_S(nn.T @ nn / len(nn)) if rod else 0.0
        return np.concatenate(out + [[S]])

    val, se = jackknife(np.hstack([n, v1, v2]), est)
    k = iu[0].size

    def unpack(x):
        c = np.zeros((d, d))
        c[iu] = x[d : d + k]
        c = c + np.triu(c, 1).T
        return x[:d], c, x[d + k : 2 * d + k], x[2 * d + k : 3 * d + k], float(x[-1])

    m, c, j1, j2, S = unpack(val)
    sm, sc, sj1, sj2, sS = unpack(se)
    return MomentSet(1.0, m, c, j1, j2, S, {"mean_n": sm, "cov_nn": sc, "J1": sj1, "J2": sj2, "S": sS})


@dataclass
class StressTensor:
    tau: np.ndarray
    se: np.ndarray

    def asymmetry(self) -> float:
        return float(np.abs(self.tau - self.tau.T).max())


def stress_tensor(ens: Ensemble | DumbbellState, spring: SpringModel) -> StressTensor:
    """Kramers form ``<n (x) F(n)>`` with jackknife errors."""
    state = ens.state if isinstance(ens, Ensemble) else ens
    n = state.n
    d = n.shape[1]
    F = spring.force(n)
    rows = (n[:, :, None] * F[:, None, :]).reshape(len(n), -1)
    tau, se = jackknife(rows, lambda r: r.mean(axis=0))
    return StressTensor(tau.reshape(d, d), se.reshape(d, d))


# oracles ------------------------------------------------------------------------


def lyapunov_covariance(kappa: np.ndarray, H: float, zeta: float = 1.0, kBT: float = 1.0) -> np.ndarray:
    """Stationary ``<n n>`` of the overdamped Hookean dumbbell in flow."""
    kappa = np.atleast_2d(kappa)
    A = kappa - 2 * H / zeta * np.eye(len(kappa))
    return linalg.solve_continuous_lyapunov(A, -4 * kBT / zeta * np.eye(len(kappa)))


def inertial_lyapunov_covariance(par: PhysParamsDumbbell) -> np.ndarray:
    """Stationary covariance of ``(n, q)`` for the inertial Hookean dumbbell."""
    if par.spring.is_fene:
        raise ValueError("the Lyapunov oracle needs a Hookean spring")
    d, m, g = par.dim, par.mass, par.zeta / par.mass
    I, Z = np.eye(d), np.zeros((d, d))
    A = np.block([[Z, I], [g * par.flow.kappa - 2 * par.spring.H / m * I, -g * I]])
    B = np.vstack([Z, par.noise / m * I])
    return linalg.solve_continuous_lyapunov(A, -B @ B.T)


def ou_marginal(n0: float, t: float, H: float, zeta: float = 1.0, kBT: float = 1.0) -> tuple[float, float]:
    """Mean and variance at time ``t`` of the overdamped Hookean component started at ``n0``."""
    r = 2 * H / zeta
    return n0 * np.exp(-r * t), kBT / H * -np.expm1(-2 * r * t)


def gaussian_bin_probs(edges: np.ndarray, mean: float, var: float) -> np.ndarray:
    z = (edges - mean) / np.sqrt(2 * var)
    return 0.5 * np.diff(erf(z))


def free_rotation_bin_probs(edges: np.ndarray, D_r: float, t: float, l_max: int = 200) -> np.ndarray:
    """Bin probabilities of ``mu = n.e3`` under free rotational diffusion from ``e3``.

    ``rho(mu) = sum_l (2l+1)/2 exp(-l(l+1) D_r t) P_l(mu)`` on ``[-1, 1]``;
    ``int P_l = (P_{l+1} - P_{l-1})/(2l+1)``.
    """
    cdf = (edges + 1) / 2
    for l in range(1, l_max + 1):
        w = np.exp(-l * (l + 1) * D_r * t)
        if w < 1e-17:
            break
        cdf = cdf + 0.5 * w * (eval_legendre(l + 1, edges) - eval_legendre(l - 1, edges))
    return np.diff(cdf)


def n_bins(N: int) -> int:
    return max(8, int(round(HIST_SCALE * N ** (1 / 3))))


def hist_l1(sample: np.ndarray, edges: np.ndarray, probs: np.ndarray) -> float:
    """L1 distance between the empirical and reference bin masses (tails included)."""
    counts, _ = np.histogram(sample, bins=edges)
    emp = counts / len(sample)
    return float(np.abs(emp - probs).sum() + abs((1 - emp.sum()) - (1 - probs.sum())))


def factorization_distance(a: np.ndarray, b: np.ndarray, edges_a: np.ndarray, edges_b: np.ndarray, probs_b: np.ndarray) -> float:
    """L1 between the joint histogram of (a, b) and rho_hat(a) times the exact b-law."""
    H, _, _ = np.histogram2d(a, b, bins=[edges_a, edges_b])
    joint = H / len(a)
    marg = joint.sum(axis=1)
    return float(np.abs(joint - np.outer(marg, probs_b)).sum())


def noise_floor(probs: np.ndarray, N: int, seed: int, draws: int = 8) -> float:
    """Expected histogram L1 of an exact N-sample against ``probs``."""
    rng = np.random.default_rng([seed, 0xF10])
    p = np.append(probs, max(0.0, 1 - probs.sum()))
    p = p / p.sum()
    return float(np.mean([np.abs(rng.multinomial(N, p) / N - p).sum() for _ in range(draws)]))


def mardia_test(x: np.ndarray, cov: np.ndarray | None = None) -> tuple[float, float]:
    """Mardia skewness and kurtosis p-values for multivariate normality.

    Skewness uses the identity ``mean_ij (z_i.z_j)^3 = sum_abc (mean z_a z_b z_c)^2``
    so the cost is linear in the sample size.
    """
    x = np.asarray(x, dtype=float)
    N, d = x.shape
    xc = x - x.mean(axis=0)
    S = np.cov(xc, rowvar=False, bias=True) if cov is None else cov
    z = xc @ np.linalg.inv(np.linalg.cholesky(S)).T
    m3 = np.einsum("ia,ib,ic->abc", z, z, z) / N
    b1 = float(np.sum(m3**2))
    b2 = float(np.mean(np.sum(z**2, axis=1) ** 2))
    dof = d * (d + 1) * (d + 2) / 6
    p_skew = float(stats.chi2.sf(N * b1 / 6, dof))
    zk = (b2 - d * (d + 2)) / np.sqrt(8 * d * (d + 2) / N)
    p_kurt = float(2 * stats.norm.sf(abs(zk)))
    return p_skew, p_kurt


def variance_check(x: np.ndarray, target: float, k: float = 3.0) -> tuple[np.ndarray, np.ndarray, bool]:
    """Per-column sample variances, their SE, and whether all lie within ``k`` SE."""
    var, se = jackknife(x, lambda r: r.var(axis=0, ddof=1))
    return var, se, bool(np.all(np.abs(var - target) <= k * se))


def fit_order(epsilons, distances) -> float:
    """Least-squares slope of ``log d`` against ``log eps``."""
    e = np.log(np.asarray(epsilons, float))
    d = np.log(np.asarray(distances, float))
    return float(np.polyfit(e, d, 1)[0])


def fit_decay_rate(t: np.ndarray, y: np.ndarray, se: np.ndarray | None = None) -> float:
    """Zero-intercept weighted fit of ``log(y/y0) = -r t``."""
    t = np.asarray(t, float) - t[0]
    ly = np.log(np.asarray(y, float) / y[0])
    if se is None:
        w = np.ones_like(t)
    else:
        se = np.asarray(se, float)
        # the t = 0 point carries no weight in a zero-intercept fit
        w = np.where(se > 0, (np.asarray(y) / np.where(se > 0, se, 1.0)) ** 2, 0.0)
    return float(-np.sum(w * t * ly) / np.sum(w * t * t))


# epsilon sweeps -----------------------------------------------------------------


@dataclass
class SweepConfig:
    model: Literal["dumbbell", "rod"] = "dumbbell"
    engine: Literal["sde", "fp-inertial-reduced"] = "sde"
    epsilons: tuple[float, ...] = (0.4, 0.2, 0.1)
    N: int = 1_000_000
    dt: float = 0.01
    t_final: float = 1.0
    seed: int = 2024
    zeta: float = 1.0
    kBT: float = 1.0
    H: float = 1.0
    n_init: float = 6.0
    spring: str = "hookean"
    n0: float = 3.0
    D_r: float = 0.25
    n_cells: int = 300
    n_modes: int = 12
    threads: int = 1
    smallest_l1_max: float = 0.02  # calibrated to the N = 1e6 noise floor


@dataclass
class ConvergenceReport:
    epsilons: list[float]
    distances: list[float]
    factorization: list[float]
    fitted_order: float
    noise_floor: float
    pass_flags: dict[str, bool]
    metadata: dict

    def __post_init__(self):
        if any(d <= 0 for d in self.distances):
            raise ValueError("distances must be strictly positive")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ValueError("epsilons must be strictly decreasing")

    @property
    def passed(self) -> bool:
        return all(self.pass_flags.values())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=float)


def _strictly_decreasing(x) -> bool:
    return all(b < a for a, b in zip(x, x[1:]))


def _dumbbell_point(cfg: SweepConfig, eps: float):
    spring = SpringModel("hookean", cfg.H)
    par = PhysParamsDumbbell(eps, cfg.zeta, cfg.kBT, spring, dim=3)
    rng = np.random.default_rng([cfg.seed, 0xD0B])
    s = DumbbellState.zeros(cfg.N, 3)
    # Maxwellian velocities from a common draw at every epsilon
    v = np.sqrt(2 * cfg.kBT)
    s.p[:] = v * rng.standard_normal((cfg.N, 3)) / eps
    s.q[:] = v * rng.standard_normal((cfg.N, 3)) / eps
    s.n[:, 0] = cfg.n_init
    out = simulate_ensemble(Ensemble(s, cfg.seed), InertialDumbbell(par), cfg.dt, cfg.t_final, threads=cfg.threads)
    n1 = out.state.n[:, 0]
    q1 = eps * out.state.q[:, 0]
    mean, var = ou_marginal(cfg.n_init, out.time, cfg.H, cfg.zeta, cfg.kBT)
    sd = np.sqrt(var)
    nb = n_bins(cfg.N)
    e_n = np.linspace(mean - 5 * sd, mean + 5 * sd, nb + 1)
    p_n = gaussian_bin_probs(e_n, mean, var)
    th = 2 * cfg.kBT
    e_q = np.linspace(-5 * np.sqrt(th), 5 * np.sqrt(th), nb + 1)
    p_q = gaussian_bin_probs(e_q, 0.0, th)
    return hist_l1(n1, e_n, p_n), factorization_distance(n1, q1, e_n, e_q, p_q), p_n


def _rod_point(cfg: SweepConfig, eps: float):
    kBT = cfg.D_r * cfg.zeta
    par = PhysParamsRod(eps, cfg.zeta, cfg.zeta, kBT)
    rng = np.random.default_rng([cfg.seed, 0x50D])
    s = rod_equilibrium_state(cfg.N, par, rng, n_init=(0.0, 0.0, 1.0))
    out = simulate_ensemble(Ensemble(s, cfg.seed), InertialRod(par), cfg.dt, cfg.t_final, threads=cfg.threads)
    n = out.state.n
    mu = n[:, 2]
    e_phi = np.cross(np.array([0.0, 0.0, 1.0]), n)
    e_phi /= np.maximum(np.linalg.norm(e_phi, axis=1, keepdims=True), 1e-300)
    w = np.sqrt(par.inertia) * np.sum(out.state.omega * e_phi, axis=1)
    nb = n_bins(cfg.N)
    e_mu = np.linspace(-1, 1, nb + 1)
    p_mu = free_rotation_bin_probs(e_mu, par.D_r, out.time)
    e_w = np.linspace(-5 * np.sqrt(kBT), 5 * np.sqrt(kBT), nb + 1)
    p_w = gaussian_bin_probs(e_w, 0.0, kBT)
    return hist_l1(mu, e_mu, p_mu), factorization_distance(mu, w, e_mu, e_w, p_w), p_mu


def _reduced_sweep(cfg: SweepConfig):
    from .fp.inertial import InertialParams, InertialReducedSolver, ReducedInertialGrid, velocity_quadrature

    spring = SpringModel("fene", cfg.H, cfg.n0) if cfg.spring == "fene" else SpringModel("hookean", cfg.H)
    par = InertialParams(cfg.zeta, cfg.kBT, spring)
    solver = InertialReducedSolver(par, ReducedInertialGrid(cfg.n_cells, cfg.n_modes))
    x = solver.x
    rho0 = np.exp(-((x - 1.0) ** 2) / 0.4)
    rho0 /= rho0.sum() * solver.h
    ref = solver.limit_solver.advance(rho0, cfg.t_final, method="expm")
    qn, qw = velocity_quadrature(par.theta, 64)
    M = np.exp(-(qn**2) / (2 * par.theta)) / np.sqrt(2 * np.pi * par.theta)
    dist, fact, mass_err = [], [], []
    for eps in cfg.epsilons:
        c = solver.advance(solver.initial(rho0), eps, cfg.t_final)
        rho = solver.density(c)
        dist.append(float(np.sum(np.abs(rho - ref)) * solver.h))
        f = solver.reconstruct(c, qn)
        fact.append(float(np.sum(np.abs(f - np.outer(rho, M)) * qw[None, :]) * solver.h))
        mass_err.append(abs(rho.sum() - rho0.sum()) * solver.h)
    meta = {"n_cells": cfg.n_cells, "n_modes": cfg.n_modes, "spring": cfg.spring, "mass_error": max(mass_err)}
    return dist, fact, 0.0, meta


def epsilon_sweep(cfg: SweepConfig) -> ConvergenceReport:
    """Distance of the configuration marginal to the limit at ``t_final``.

    SDE engines compare against exact limit laws (overdamped Hookean
    Gaussian; free rotational diffusion series) and all epsilons share
    seeds, so the Monte Carlo noise is common to the sweep. The reduced
    FP engine compares with the limit solver on the same grid.
    """
    eps = [float(e) for e in cfg.epsilons]
    if len(eps) < 2:
        raise ValueError("need ≥2 epsilons")
    eps = sorted(eps, reverse=True)
    t0 = time.perf_counter()
    if cfg.engine == "fp-inertial-reduced":
        if cfg.model != "dumbbell":
            raise ValueError("the reduced inertial solver is for the dumbbell")
        dist, fact, floor, meta = _reduced_sweep(cfg)
    else:
        point = _dumbbell_point if cfg.model == "dumbbell" else _rod_point
        dist, fact = [], []
        probs = None
        for e in eps:
            d, f, probs = point(cfg, e)
            dist.append(d)
            fact.append(f)
        floor = noise_floor(probs, cfg.N, cfg.seed)
        meta = {"N": cfg.N, "dt": {str(e): cfg.dt for e in eps}, "bins_per_axis": n_bins(cfg.N)}
    meta.update(
        {"model": cfg.model, "engine": cfg.engine, "seeds": {str(e): cfg.seed for e in eps}, "t_final": cfg.t_final,
         "wall_time": time.perf_counter() - t0, "thresholds": "engineering calibration, not from theory"}
    )
    order = fit_order(eps, dist)
    flags = {"monotone": _strictly_decreasing(dist), "factorization": fact[eps.index(min(eps))] < 0.5 * fact[0]}
    if cfg.engine == "fp-inertial-reduced":
        flags["order"] = order >= 0.8
    else:
        flags["smallest_l1"] = dist[-1] < cfg.smallest_l1_max
    if 0.1 in eps and 0.4 in eps:
        flags["factorization"] = fact[eps.index(0.1)] < 0.5 * fact[eps.index(0.4)]
    return ConvergenceReport(eps, dist, fact, order, floor, flags, meta)
