"""Reduced inertial kinetic equation for the dumbbell (d = 1, x-homogeneous).

In scaled velocities (``m = eps^2``) the density ``f(t, n, q)`` solves

    eps^2 d_t f + eps d_n(q f) + eps d_q(b f) = Q(f),   b = zeta kappa n - 2 F(n),

with ``Q(f) = zeta theta d_q(M d_q(f/M))`` and ``theta = 2 kBT``. The
translational velocity ``p`` only enters through ``Q`` in the homogeneous
case, so its marginal stays Maxwellian and it is carried analytically.

Velocity discretization: ``f = sum_k c_k(n) He_k(q/sqrt(theta)) M(q)/Z``.
The Hermite functions are the eigenfunctions of the collision operator,
``Q(He_k M) = -k zeta He_k M``, and the moment system reads

    d_t c_k = Fl(c_{k-1}) / (eps sqrt(theta))
              - (k+1) sqrt(theta)/eps d_n c_{k+1} - k zeta/eps^2 c_k,

where ``Fl(c) = b c - theta d_n c``. Even modes live at cell centres and odd
modes at faces, vanishing at the walls (specular reflection). Centre-to-face
fluxes use the Scharfetter-Gummel form, so as ``eps -> 0`` the scheme for
``rho = c_0`` collapses onto the limit solver on the same grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg
from scipy.special import factorial

from ..forces import FlowField, SpringModel
from .ball import LimitParams, LimitSolver
from .fv import StructuredGrid, bernoulli


@dataclass(frozen=True)
class ReducedInertialGrid:
    n_cells: int = 400
    n_modes: int = 16
    width: float = 6.0  # Hookean truncation in standard deviations
    n_q: int = 64  # velocity nodes used only for reconstruction/quadrature


@dataclass(frozen=True)
class InertialParams:
    zeta: float = 1.0
    kBT: float = 1.0
    spring: SpringModel = field(default_factory=SpringModel)
    kappa: float = 0.0  # 1D velocity gradient

    @property
    def theta(self) -> float:
        return 2 * self.kBT

    def limit(self) -> LimitParams:
        return LimitParams(self.zeta, self.kBT, self.spring, FlowField(np.array([[self.kappa]])), dim=1)


class InertialReducedSolver:
    def __init__(self, par: InertialParams, grid: ReducedInertialGrid = ReducedInertialGrid()):
        self.par, self.cfg = par, grid
        lim = par.limit()
        R = lim.extent(grid.width)
        self.line = StructuredGrid("line", (np.linspace(-R, R, grid.n_cells + 1),), 1)
        self.h = 2 * R / grid.n_cells
        self.x = self.line.centers[:, 0]
        self.xf = self.line.edges[0][1:-1]
        self.limit_solver = LimitSolver(self.line, lim)
        self._build_blocks()

    # spatial blocks ------------------------------------------------------
    def _build_blocks(self):
        p, n, h = self.par, self.cfg.n_cells, self.h
        th = p.theta
        nf = n - 1
        U = p.spring.potential(self.x[:, None]) / p.kBT
        P = (U[:-1] - U[1:]) + p.zeta * p.kappa * self.xf * h / th
        L = np.arange(nf)
        # centre -> face Scharfetter-Gummel flux of (b c - theta c')
        self.S_cf = sparse.csr_matrix(
            (np.concatenate([th / h * bernoulli(-P), -th / h * bernoulli(P)]),
             (np.concatenate([L, L]), np.concatenate([L, L + 1]))),
            shape=(nf, n),
        )
        # face -> centre divergence and centre -> face gradient
        self.Dv = sparse.csr_matrix(
            (np.concatenate([np.full(nf, -1 / h), np.full(nf, 1 / h)]),
             (np.concatenate([L + 1, L]), np.concatenate([L, L]))),
            shape=(n, nf),
        )
        self.Gr = sparse.csr_matrix(
            (np.concatenate([np.full(nf, -1 / h), np.full(nf, 1 / h)]),
             (np.concatenate([L, L]), np.concatenate([L, L + 1]))),
            shape=(nf, n),
        )
        # face -> centre flux as the weighted adjoint of S_cf's potential part:
        # Fl = -theta e^-U d(w c), with w the logarithmic mean of e^U at faces.
        # This keeps the free-streaming/force coupling skew in the energy
        # sum_k int c_k^2 e^U / k!, which a plain central flux does not.
        U = U - U.min()
        dU = U[:-1] - U[1:]
        w = np.exp(U[1:]) / bernoulli(dU)
        self.S_fc = (-th * sparse.diags(np.exp(-U)) @ self.Dv @ sparse.diags(w)).tocsr()
        if p.kappa != 0.0:
            avg = sparse.csr_matrix(
                (np.full(2 * nf, 0.5), (np.concatenate([L, L + 1]), np.concatenate([L, L]))), shape=(n, nf)
            )
            self.S_fc = (self.S_fc + sparse.diags(p.zeta * p.kappa * self.x) @ avg).tocsr()

    def sizes(self) -> list[int]:
        n = self.cfg.n_cells
        return [n if k % 2 == 0 else n - 1 for k in range(self.cfg.n_modes + 1)]

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes())])

    def generator(self, epsilon: float) -> sparse.csr_matrix:
        K = self.cfg.n_modes
        sq = np.sqrt(self.par.theta)
        zeta = self.par.zeta
        blocks = [[None] * (K + 1) for _ in range(K + 1)]
        for k in range(K + 1):
            even = k % 2 == 0
            if k > 0:
                flux = self.S_fc if even else self.S_cf
                blocks[k][k - 1] = flux / (epsilon * sq)
            if k < K:
                deriv = self.Dv if even else self.Gr
                blocks[k][k + 1] = -(k + 1) * sq / epsilon * deriv
            size = self.sizes()[k]
            blocks[k][k] = sparse.identity(size, format="csr") * (-k * zeta / epsilon**2)
        return sparse.bmat(blocks, format="csr")

    # state -----------------------------------------------------------------
    def initial(self, rho0: np.ndarray) -> np.ndarray:
        """Coefficients of ``f0 = rho0(n) M(q) / Z``."""
        c = np.zeros(self.offsets()[-1])
        c[: self.cfg.n_cells] = rho0
        return c

    def density(self, c: np.ndarray) -> np.ndarray:
        return c[: self.cfg.n_cells].copy()

    def modes(self, c: np.ndarray) -> list[np.ndarray]:
        o = self.offsets()
        return [c[o[k] : o[k + 1]] for k in range(self.cfg.n_modes + 1)]

    def flux_J2(self, c: np.ndarray, epsilon: float) -> np.ndarray:
        """``(1/eps) int q f dq`` at interior faces."""
        return np.sqrt(self.par.theta) * self.modes(c)[1] / epsilon

    def advance(self, c0: np.ndarray, epsilon: float, t_final: float) -> np.ndarray:
        if t_final <= 0:
            return c0.copy()
        return splinalg.expm_multiply(self.generator(epsilon) * t_final, c0)

    def reconstruct(self, c: np.ndarray, q: np.ndarray) -> np.ndarray:
        """``f(n_i, q_j)`` at cell centres; face modes are averaged to centres."""
        th = self.par.theta
        xi = q / np.sqrt(th)
        Z = np.sqrt(2 * np.pi * th)
        M = np.exp(-0.5 * xi**2) / Z
        f = np.zeros((self.cfg.n_cells, q.size))
        He_prev, He = np.zeros_like(xi), np.ones_like(xi)
        for k, ck in enumerate(self.modes(c)):
            if k % 2 == 1:
                padded = np.concatenate([[0.0], ck, [0.0]])
                ck = 0.5 * (padded[1:] + padded[:-1])
            f += np.outer(ck, He * M)
            He_prev, He = He, xi * He - k * He_prev
        return f


def velocity_quadrature(theta: float, n: int = 64, width: float = 6.0) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes and weights on ``[-width sqrt(2 theta), width sqrt(2 theta)]``."""
    vmax = width * np.sqrt(2 * theta)
    h = 2 * vmax / n
    nodes = -vmax + h * (np.arange(n) + 0.5)
    return nodes, np.full(n, h)


def flux_moments(
    f: np.ndarray, epsilon: float, q: tuple[np.ndarray, np.ndarray], p: tuple[np.ndarray, np.ndarray] | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``rho = int f``, ``J1 = (1/eps) int p f``, ``J2 = (1/eps) int q f``.

    ``f`` has shape ``(n, n_q)`` or ``(n, n_p, n_q)``; ``q`` and ``p`` are
    (nodes, weights) pairs. Without a ``p`` axis ``J1`` is returned as zeros.
    """
    qn, qw = q
    if f.ndim == 2:
        rho = f @ qw
        J2 = f @ (qn * qw) / epsilon
        return rho, np.zeros_like(rho), J2
    pn, pw = p
    rho = np.einsum("ipq,p,q->i", f, pw, qw)
    J1 = np.einsum("ipq,p,q->i", f, pn * pw, qw) / epsilon
    J2 = np.einsum("ipq,p,q->i", f, pw, qn * qw) / epsilon
    return rho, J1, J2


def hermite_norms(K: int) -> np.ndarray:
    """``int He_k^2 M / Z = k!``."""
    return factorial(np.arange(K + 1))


def solve_inertial_reduced(
    rho0: np.ndarray, par: InertialParams, epsilon: float, t_final: float,
    grid: ReducedInertialGrid = ReducedInertialGrid(),
) -> tuple[np.ndarray, InertialReducedSolver]:
    """Evolve ``f0 = rho0 M`` and return the mode coefficients at ``t_final``."""
    solver = InertialReducedSolver(par, grid)
    return solver.advance(solver.initial(rho0), epsilon, t_final), solver
