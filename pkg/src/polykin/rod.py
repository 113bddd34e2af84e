"""Langevin integrators for the rigid rod.

State ``(x, p, n, omega)`` with ``|n| = 1`` and ``omega . n = 0``. With
``m = eps^2`` and moment of inertia ``j = m L^2 / 12``::

    dx = p dt,        dp = -(zeta_t/m)(p - kappa x) dt + sqrt(2 kBT zeta_t)/m dW
    dn = omega x n dt
    j domega = [-zeta_r (omega - n x kappa n) - R U] dt + sqrt(2 kBT zeta_r) P_n dW

``P_n = I - n n`` and ``R = n x grad`` is the rotational gradient. The noise
amplitudes make ``exp(-(p^2 + omega^2)/(2 kBT))`` in the scaled velocities
``(eps p, sqrt(j) omega)`` stationary.

Rotation step: with ``n`` frozen, ``omega`` is an Ornstein-Uhlenbeck process
relaxing to ``omega* = n x kappa n - R U / zeta_r``. Its value at the end of
the step and its time integral ``dphi`` are sampled jointly and exactly;
``n`` is then rotated by ``exp([dphi]_x)`` and ``omega`` is carried along.
Afterwards ``n`` is renormalized and ``omega`` projected to the tangent plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .dumbbell import _apply, _exact_linear
from .ensemble import BatchState
from .forces import FlowField, OnsagerPotential
from .spectral import Harmonics, eval_harmonics, funk_hecke_sine


@dataclass(frozen=True)
class PhysParamsRod:
    epsilon: float = 1.0
    zeta_t: float = 1.0
    zeta_r: float = 1.0
    kBT: float = 1.0
    L: float = float(np.sqrt(12.0))
    flow: FlowField = field(default_factory=FlowField.quiescent)
    onsager: OnsagerPotential | None = None

    def __post_init__(self):
        if min(self.epsilon, self.zeta_t, self.zeta_r, self.L) <= 0 or self.kBT < 0:
            raise ValueError("epsilon, frictions and L must be positive, kBT non-negative")
        if self.flow.dim != 3:
            raise ValueError("rod flow must be three-dimensional")

    @property
    def mass(self) -> float:
        return self.epsilon**2

    @property
    def inertia(self) -> float:
        return self.mass * self.L**2 / 12

    @property
    def D_r(self) -> float:
        return self.kBT / self.zeta_r

    @property
    def D_t(self) -> float:
        return self.kBT / self.zeta_t


@dataclass
class RodState(BatchState):
    x: np.ndarray
    p: np.ndarray
    n: np.ndarray
    omega: np.ndarray

    def scaled_velocities(self, par: PhysParamsRod) -> tuple[np.ndarray, np.ndarray]:
        return par.epsilon * self.p, np.sqrt(par.inertia) * self.omega

    def constraint_errors(self) -> tuple[float, float]:
        """``max ||n| - 1|`` and ``max |omega . n|``."""
        r = np.abs(np.linalg.norm(self.n, axis=1) - 1).max(initial=0.0)
        t = np.abs(np.sum(self.omega * self.n, axis=1)).max(initial=0.0)
        return float(r), float(t)


def friction_torque(n: np.ndarray, omega: np.ndarray, grad_u: np.ndarray, zeta_r: float) -> np.ndarray:
    """``-zeta_r (omega - n x (grad_u n))`` for one or many rods."""
    n = np.asarray(n, dtype=float)
    kn = n @ np.asarray(grad_u, dtype=float).T
    return -zeta_r * (np.asarray(omega, dtype=float) - np.cross(n, kn))


class MeanFieldOnsager:
    """Onsager potential generated by the ensemble's own orientation density.

    ``prepare`` projects the empirical density on spherical harmonics up to
    ``l_max``; the potential is ``strength * lambda_l * a_lm`` and its
    rotational gradient is evaluated exactly from the expansion.
    """

    def __init__(self, strength: float, l_max: int = 8):
        self.strength = strength
        self.harmonics = Harmonics(l_max)
        self.kernel = funk_hecke_sine(l_max)[self.harmonics.ls]
        self.coefs = np.zeros(self.harmonics.n_coef, dtype=complex)

    def update(self, n: np.ndarray) -> None:
        Y = eval_harmonics(self.harmonics.l_max, n)
        density = np.conj(Y).mean(axis=0)
        self.coefs = self.strength * self.kernel * density

    def gradient(self, n: np.ndarray) -> np.ndarray:
        """``R U`` at each row of ``n``."""
        return self.harmonics.rotgrad_at(self.coefs, n)


def _ou_integrated(gamma: float, sigma: float, h: float):
    """Decay ``e``, drift weight ``w`` and Cholesky factors of (omega', dphi) noise."""
    x = gamma * h
    e = np.exp(-x)
    a = -np.expm1(-x)
    w = a / gamma
    var_w = sigma**2 * -np.expm1(-2 * x) / (2 * gamma)
    if x < 1e-2:
        f = x**3 / 3 - x**4 / 4 + 7 * x**5 / 60 - x**6 / 24
    else:
        f = x - 2 * a - 0.5 * np.expm1(-2 * x)
    var_phi = sigma**2 * f / gamma**3
    cov = sigma**2 * a * a / (2 * gamma**2)
    l11 = np.sqrt(var_w)
    l21 = cov / l11 if l11 > 0 else 0.0
    l22 = np.sqrt(max(var_phi - l21 * l21, 0.0))
    return e, w, l11, l21, l22


def _rotate(n: np.ndarray, omega: np.ndarray, dphi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n_new = geometry.rotate_vectors(dphi, n)
    om_new = geometry.rotate_vectors(dphi, omega)
    n_new /= np.linalg.norm(n_new, axis=1, keepdims=True)
    om_new -= np.sum(om_new * n_new, axis=1, keepdims=True) * n_new
    return n_new, om_new


def _project(v: np.ndarray, n: np.ndarray) -> np.ndarray:
    return v - np.sum(v * n, axis=1, keepdims=True) * n


def _target_rate(n: np.ndarray, par: PhysParamsRod, potential) -> np.ndarray:
    """``n x kappa n - R U / zeta_r``, the angular velocity friction relaxes to."""
    w = np.cross(n, n @ par.flow.kappa.T)
    if potential is not None:
        w = w - potential.gradient(n) / par.zeta_r
    return w


_CACHE: dict = {}


def _translation(par: PhysParamsRod, h: float):
    key = (par.epsilon, par.zeta_t, par.kBT, par.flow.kappa.tobytes(), h)
    if key not in _CACHE:
        if len(_CACHE) > 64:
            _CACHE.clear()
        I, Z = np.eye(3), np.zeros((3, 3))
        g = par.zeta_t / par.mass
        A = np.block([[Z, I], [g * par.flow.kappa, -g * I]])
        B = np.vstack([Z, np.sqrt(2 * par.kBT * par.zeta_t) / par.mass * I])
        _CACHE[key] = _exact_linear(A, B, h)
    return _CACHE[key]


def step_inertial_rod(s: RodState, par: PhysParamsRod, dt: float, rng, potential=None) -> RodState:
    if dt == 0:
        return s.copy()
    N = len(s)
    xi = rng.standard_normal((N, 12))
    zx = _apply(np.hstack([s.x, s.p]), _translation(par, float(dt)), xi[:, :6])
    j = par.inertia
    gamma = par.zeta_r / j
    sigma = np.sqrt(2 * par.kBT * par.zeta_r) / j
    e, w, l11, l21, l22 = _ou_integrated(gamma, sigma, float(dt))
    star = _target_rate(s.n, par, potential)
    dev = s.omega - star
    z1 = _project(xi[:, 6:9], s.n)
    z2 = _project(xi[:, 9:12], s.n)
    omega = star + e * dev + l11 * z1
    dphi = star * dt + w * dev + l21 * z1 + l22 * z2
    n, omega = _rotate(s.n, omega, dphi)
    return RodState(zx[:, :3], zx[:, 3:], n, omega)


def step_overdamped_rod(
    x: np.ndarray, n: np.ndarray, par: PhysParamsRod, dt: float, rng, potential=None, x_noise: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Geodesic Euler-Maruyama: rotate ``n`` by ``h omega* + sqrt(2 D_r h) P_n xi``."""
    if dt == 0:
        return x.copy(), n.copy()
    xi = rng.standard_normal((len(n), 6))
    x_new = x + dt * x @ par.flow.kappa.T
    if x_noise:
        x_new = x_new + np.sqrt(2 * par.D_t * dt) * xi[:, :3]
    dphi = dt * _target_rate(n, par, potential) + np.sqrt(2 * par.D_r * dt) * _project(xi[:, 3:], n)
    n_new = geometry.rotate_vectors(dphi, n)
    n_new /= np.linalg.norm(n_new, axis=1, keepdims=True)
    return x_new, n_new


@dataclass
class InertialRod:
    par: PhysParamsRod
    potential: MeanFieldOnsager | None = None

    def __post_init__(self):
        if self.potential is not None:
            self.prepare = lambda st: self.potential.update(st.n)

    def step(self, s: RodState, dt: float, rng) -> RodState:
        return step_inertial_rod(s, self.par, dt, rng, self.potential)

    def valid(self, s: RodState) -> np.ndarray:
        return np.ones(len(s), dtype=bool)


@dataclass
class OverdampedRod:
    par: PhysParamsRod
    potential: MeanFieldOnsager | None = None
    x_noise: bool = True

    def __post_init__(self):
        if self.potential is not None:
            self.prepare = lambda st: self.potential.update(st.n)

    def step(self, s: RodState, dt: float, rng) -> RodState:
        x, n = step_overdamped_rod(s.x, s.n, self.par, dt, rng, self.potential, self.x_noise)
        return RodState(x, s.p.copy(), n, s.omega.copy())

    def valid(self, s: RodState) -> np.ndarray:
        return np.ones(len(s), dtype=bool)


def uniform_orientations(N: int, rng: np.random.Generator) -> np.ndarray:
    return geometry.normalize(rng.standard_normal((N, 3)))


def equilibrium_state(
    N: int, par: PhysParamsRod, rng: np.random.Generator, n_init: np.ndarray | None = None
) -> RodState:
    """Maxwellian velocities; orientations uniform or all equal to ``n_init``."""
    if n_init is None:
        n = uniform_orientations(N, rng)
    else:
        n = np.tile(geometry.normalize(np.asarray(n_init, dtype=float)), (N, 1))
    p = np.sqrt(par.kBT) / par.epsilon * rng.standard_normal((N, 3))
    omega = np.sqrt(par.kBT / par.inertia) * _project(rng.standard_normal((N, 3)), n)
    return RodState(np.zeros((N, 3)), p, n, omega)
