"""Langevin integrators for the elastic dumbbell.

Inertial system, with ``m = eps^2`` and ``gamma = zeta/m``::

    dx = p dt,   dp = -gamma (p - kappa x) dt + sqrt(4 kBT zeta)/m dW1
    dn = q dt,   dq = [-gamma (q - kappa n) - 2 F(n)/m] dt + sqrt(4 kBT zeta)/m dW2

For a Hookean spring the pairs ``(x, p)`` and ``(n, q)`` are linear Gaussian
systems, and each step applies their exact transition (mean map and
covariance from matrix exponentials), so friction, flow and spring are
integrated without any restriction from the stiffness ``zeta/eps^2``.

For FENE the spring is written ``F = H_eff(n) n`` with the secant stiffness
``H_eff = H / (1 - |n|^2/n0^2)`` frozen over the step, and the flow term
``gamma kappa n`` is frozen as a constant forcing. Each component of
``(n, q)`` is then a damped scalar oscillator whose transition is evaluated
in closed form per trajectory; it stays stable however stiff the spring gets
near the wall.

Overdamped system::

    dx = kappa x dt + sqrt(4 kBT/zeta) dW1
    dn = (kappa n - 2 F(n)/zeta) dt + sqrt(4 kBT/zeta) dW2

integrated by Euler-Maruyama. FENE steps that leave ``|n| < n0 (1 - 1e-9)``,
or change ``1 - |n|^2/n0^2`` by more than a factor 2, are redone as two half
steps (see ``ensemble.guarded_step``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
from scipy.linalg import expm

from .ensemble import BatchState, Ensemble, simulate_ensemble
from .forces import FlowField, SpringModel

FENE_MARGIN = 1e-9
STIFFNESS_RATIO = 2.0


@dataclass(frozen=True)
class PhysParamsDumbbell:
    epsilon: float = 1.0
    zeta: float = 1.0
    kBT: float = 1.0
    spring: SpringModel = field(default_factory=SpringModel)
    flow: FlowField | None = None
    dim: int = 3

    def __post_init__(self):
        if self.epsilon <= 0 or self.zeta <= 0 or self.kBT < 0:
            raise ValueError("epsilon and zeta must be positive, kBT non-negative")
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.flow is None:
            object.__setattr__(self, "flow", FlowField.quiescent(self.dim))
        if self.flow.dim != self.dim:
            raise ValueError("flow dimension does not match dim")

    @property
    def mass(self) -> float:
        return self.epsilon**2

    @property
    def noise(self) -> float:
        """Force noise amplitude ``sqrt(4 kBT zeta)``."""
        return float(np.sqrt(4 * self.kBT * self.zeta))


@dataclass
class DumbbellState(BatchState):
    x: np.ndarray
    n: np.ndarray
    p: np.ndarray
    q: np.ndarray

    @classmethod
    def zeros(cls, N: int, d: int = 3) -> "DumbbellState":
        return cls(*(np.zeros((N, d)) for _ in range(4)))

    def scaled_velocities(self, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
        """``(eps p, eps q)``, whose equilibrium law is ``exp(-(p^2+q^2)/(4 kBT))``."""
        return epsilon * self.p, epsilon * self.q


def _psd_factor(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def _exact_linear(A: np.ndarray, B: np.ndarray, h: float):
    """Transition of ``dz = (A z + c) dt + B dW`` over ``h``: (Phi, Gamma, factor of Sigma).

    Van Loan's block exponential on ``h / 2^k`` with ``|A| h / 2^k <= 1``,
    then ``k`` doublings, which avoids overflow of ``exp(-A h)`` for stiff A.
    """
    k = A.shape[0]
    Z = np.zeros((k, k))
    halvings = max(0, int(np.ceil(np.log2(max(np.abs(A).sum(axis=1).max() * h, 1.0)))))
    tau = h / 2**halvings
    E = expm(np.block([[-A, B @ B.T], [Z, A.T]]) * tau)
    Phi = E[k:, k:].T
    Sigma = Phi @ E[:k, k:]
    Gam = expm(np.block([[A, np.eye(k)], [Z, Z]]) * tau)[:k, k:]
    for _ in range(halvings):
        Sigma = Sigma + Phi @ Sigma @ Phi.T
        Gam = Gam + Phi @ Gam
        Phi = Phi @ Phi
    return Phi, Gam, _psd_factor(Sigma)


_CACHE: dict = {}


def _propagators(par: PhysParamsDumbbell, h: float):
    key = (par.epsilon, par.zeta, par.kBT, par.spring.H, par.dim, par.flow.kappa.tobytes(), h)
    if key not in _CACHE:
        if len(_CACHE) > 64:
            _CACHE.clear()
        _CACHE[key] = _build_propagators(par, h)
    return _CACHE[key]


def _build_propagators(par: PhysParamsDumbbell, h: float):
    d, m = par.dim, par.mass
    g = par.zeta / m
    I, Z = np.eye(d), np.zeros((d, d))
    kap = par.flow.kappa
    B = np.vstack([Z, par.noise / m * I])
    A_x = np.block([[Z, I], [g * kap, -g * I]])
    A_n = np.block([[Z, I], [g * kap - (2 * par.spring.H / m) * I, -g * I]])
    return _exact_linear(A_x, B, h), _exact_linear(A_n, B, h)


def _apply(z: np.ndarray, prop, noise: np.ndarray, forcing: np.ndarray | None = None) -> np.ndarray:
    Phi, Gam, L = prop
    out = z @ Phi.T + noise @ L.T
    if forcing is not None:
        out += forcing @ Gam.T
    return out


def _sinhc(z: np.ndarray) -> np.ndarray:
    # sinh(z)/z for |z| < 0.5, Taylor series to z^16
    z2 = z * z
    out = np.ones_like(z)
    term = np.ones_like(z)
    for k in range(1, 9):
        term = term * z2 / ((2 * k) * (2 * k + 1))
        out = out + term
    return out


def _oscillator(a: np.ndarray, gamma: float, sigma: float, h: float):
    """Exact transition of ``dn = q dt, dq = (-a n - gamma q + c) dt + sigma dW``.

    Vectorized over stiffnesses ``a > 0``. Returns ``Phi`` (N, 2, 2), the
    response ``g`` (N, 2) to a unit constant forcing ``c``, and a lower
    Cholesky factor (N, 2, 2) of the noise covariance.
    """
    a = np.asarray(a, dtype=float)
    c = -0.5 * gamma
    delta = np.sqrt((c * c - a).astype(complex))
    z = delta * h
    E1, E2 = np.exp((c + delta) * h), np.exp((c - delta) * h)
    eC = 0.5 * (E1 + E2)
    small = np.abs(z) < 0.5
    safe = np.where(small, 1.0, delta)
    eS = np.where(small, np.exp(c * h) * h * _sinhc(np.where(small, z, 0)), (E1 - E2) / (2 * safe))
    eC, eS = eC.real, eS.real
    Phi = np.empty(a.shape + (2, 2))
    Phi[:, 0, 0] = eC - c * eS
    Phi[:, 0, 1] = eS
    Phi[:, 1, 0] = -a * eS
    Phi[:, 1, 1] = eC + c * eS
    # integral of Phi against (0, 1): A^{-1} (Phi - I) e_2
    g = np.stack([(1.0 - Phi[:, 1, 1] - gamma * Phi[:, 0, 1]) / a, Phi[:, 0, 1]], axis=-1)
    # Sigma = Sigma_inf - Phi Sigma_inf Phi^T with Sigma_inf = diag(s^2/(2 gamma a), s^2/(2 gamma))
    s_nn = sigma**2 / (2 * gamma * a)
    s_qq = sigma**2 / (2 * gamma)
    S00 = s_nn - (Phi[:, 0, 0] ** 2 * s_nn + Phi[:, 0, 1] ** 2 * s_qq)
    S01 = -(Phi[:, 0, 0] * Phi[:, 1, 0] * s_nn + Phi[:, 0, 1] * Phi[:, 1, 1] * s_qq)
    S11 = s_qq - (Phi[:, 1, 0] ** 2 * s_nn + Phi[:, 1, 1] ** 2 * s_qq)
    L = np.zeros_like(Phi)
    L[:, 0, 0] = np.sqrt(np.clip(S00, 0.0, None))
    pos = L[:, 0, 0] > 0
    L[:, 1, 0] = np.where(pos, S01 / np.where(pos, L[:, 0, 0], 1.0), 0.0)
    L[:, 1, 1] = np.sqrt(np.clip(S11 - L[:, 1, 0] ** 2, 0.0, None))
    return Phi, g, L


def _fene_step_nq(s: DumbbellState, par: PhysParamsDumbbell, h: float, xi: np.ndarray):
    m = par.mass
    gamma = par.zeta / m
    r2 = np.sum(s.n**2, axis=1)
    a = 2 * par.spring.H / (1 - r2 / par.spring.n0**2) / m
    Phi, g, L = _oscillator(a, gamma, par.noise / m, h)
    force = gamma * s.n @ par.flow.kappa.T
    d = par.dim
    e1, e2 = xi[:, :d], xi[:, d:]
    n = Phi[:, 0, 0, None] * s.n + Phi[:, 0, 1, None] * s.q + g[:, 0, None] * force + L[:, 0, 0, None] * e1
    q = (
        Phi[:, 1, 0, None] * s.n + Phi[:, 1, 1, None] * s.q + g[:, 1, None] * force
        + L[:, 1, 0, None] * e1 + L[:, 1, 1, None] * e2
    )
    return n, q


def step_inertial(s: DumbbellState, par: PhysParamsDumbbell, dt: float, rng) -> DumbbellState:
    """Advance a batch of dumbbells one step of the inertial system."""
    if dt == 0:
        return s.copy()
    d = par.dim
    px, pn = _propagators(par, float(dt))
    xi = rng.standard_normal((len(s), 4 * d))
    zx = _apply(np.hstack([s.x, s.p]), px, xi[:, : 2 * d])
    if par.spring.is_fene:
        n, q = _fene_step_nq(s, par, float(dt), xi[:, 2 * d :])
        return DumbbellState(zx[:, :d], n, zx[:, d:], q)
    zn = _apply(np.hstack([s.n, s.q]), pn, xi[:, 2 * d :])
    return DumbbellState(zx[:, :d], zn[:, :d], zx[:, d:], zn[:, d:])


def step_overdamped(
    x: np.ndarray, n: np.ndarray, par: PhysParamsDumbbell, dt: float, rng, x_noise: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    if dt == 0:
        return x.copy(), n.copy()
    kap = par.flow.kappa
    amp = np.sqrt(4 * par.kBT / par.zeta * dt)
    xi = rng.standard_normal((len(x), 2 * par.dim))
    d = par.dim
    x_new = x + dt * x @ kap.T + (amp * xi[:, :d] if x_noise else 0.0)
    drift = n @ kap.T - 2.0 / par.zeta * par.spring.force(n)
    n_new = n + dt * drift + amp * xi[:, d:]
    return x_new, n_new


def _fene_ok(n: np.ndarray, spring: SpringModel) -> np.ndarray:
    if not spring.is_fene:
        return np.ones(len(n), dtype=bool)
    return np.linalg.norm(n, axis=1) < spring.n0 * (1 - FENE_MARGIN)


def _fene_accept(old: np.ndarray, new: np.ndarray, spring: SpringModel) -> np.ndarray:
    """Inside the ball, and the secant stiffness changed by less than a factor 2."""
    ok = _fene_ok(new, spring)
    if not spring.is_fene:
        return ok
    g_old = 1 - np.sum(old**2, axis=1) / spring.n0**2
    g_new = 1 - np.sum(new**2, axis=1) / spring.n0**2
    ratio = g_old / np.where(ok, g_new, 1.0)
    return ok & (ratio < STIFFNESS_RATIO) & (ratio > 1 / STIFFNESS_RATIO)


@dataclass
class InertialDumbbell:
    par: PhysParamsDumbbell

    def step(self, s: DumbbellState, dt: float, rng) -> DumbbellState:
        if self.par.spring.is_fene and not _fene_ok(s.n, self.par.spring).all():
            raise ValueError("FENE state outside the admissible ball")
        return step_inertial(s, self.par, dt, rng)

    def valid(self, s: DumbbellState) -> np.ndarray:
        return _fene_ok(s.n, self.par.spring)

    def accept(self, old: DumbbellState, new: DumbbellState) -> np.ndarray:
        return _fene_accept(old.n, new.n, self.par.spring)


@dataclass
class OverdampedDumbbell:
    """Overdamped dynamics on a ``DumbbellState``; ``p``, ``q`` are left at zero."""

    par: PhysParamsDumbbell
    x_noise: bool = True

    def step(self, s: DumbbellState, dt: float, rng) -> DumbbellState:
        x, n = step_overdamped(s.x, s.n, self.par, dt, rng, self.x_noise)
        return DumbbellState(x, n, s.p.copy(), s.q.copy())

    def valid(self, s: DumbbellState) -> np.ndarray:
        return _fene_ok(s.n, self.par.spring)

    def accept(self, old: DumbbellState, new: DumbbellState) -> np.ndarray:
        return _fene_accept(old.n, new.n, self.par.spring)


def equilibrium_state(
    N: int, par: PhysParamsDumbbell, rng: np.random.Generator, n_init: np.ndarray | None = None
) -> DumbbellState:
    """``x = 0``; velocities from the Maxwellian; ``n`` given or Hookean-equilibrium Gaussian."""
    d = par.dim
    s = DumbbellState.zeros(N, d)
    v = np.sqrt(2 * par.kBT) / par.epsilon
    s.p[:] = v * rng.standard_normal((N, d))
    s.q[:] = v * rng.standard_normal((N, d))
    if n_init is None:
        if par.spring.is_fene:
            raise ValueError("FENE equilibrium sampling needs an explicit n_init")
        s.n[:] = np.sqrt(par.kBT / par.spring.H) * rng.standard_normal((N, d))
    else:
        s.n[:] = np.broadcast_to(n_init, (N, d))
    return s


def run(ens: Ensemble, par: PhysParamsDumbbell, dt: float, t_final: float, inertial: bool = True, **kw):
    dyn = InertialDumbbell(par) if inertial else OverdampedDumbbell(par, kw.pop("x_noise", True))
    return simulate_ensemble(ens, dyn, dt, t_final, **kw)
