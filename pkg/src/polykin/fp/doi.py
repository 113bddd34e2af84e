"""Doi (Smoluchowski) equation for rod orientations on the unit sphere.

    d_t rho + R . ((n x kappa n) rho) = D_r R . [R rho + (rho/kBT) R U]

Spatially homogeneous. ``rho`` is stored as complex ``Y_l^m`` coefficients;
the Laplace-Beltrami part is diagonal and integrated exactly, while the flow
and Onsager terms are evaluated pseudo-spectrally on a product grid and
advanced with exponential time differencing (ETDRK2). The mass coefficient
``a_00`` is untouched by every term, so mass is conserved to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..forces import FlowField
from ..spectral import Harmonics, SphereGrid, eval_harmonics, funk_hecke_sine

NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class DoiParams:
    D_r: float = 1.0
    kBT: float = 1.0
    strength: float = 0.0  # Onsager excluded-volume strength
    flow: FlowField = field(default_factory=FlowField.quiescent)
    l_max: int = 16


class DoiSolver:
    def __init__(self, par: DoiParams):
        self.par = par
        L = par.l_max
        # grid fine enough that quadratic products are integrated exactly
        self.h = Harmonics(L, SphereGrid(3 * L // 2 + 2, 3 * L + 4))
        self.kernel = funk_hecke_sine(L)[self.h.ls]
        self.lin = par.D_r * self.h.laplacian
        pts = self.h.grid.points
        self.omega_flow = None if par.flow.is_quiescent else np.cross(pts, pts @ par.flow.kappa.T)
        self.nonlinear_active = self.omega_flow is not None or par.strength != 0.0

    # conversions -----------------------------------------------------------
    def project(self, values: np.ndarray) -> np.ndarray:
        return self.h.forward(values)

    def values(self, coefs: np.ndarray) -> np.ndarray:
        return self.h.backward(coefs)

    def mass(self, coefs: np.ndarray) -> float:
        return float((np.sqrt(4 * np.pi) * coefs[0]).real)

    def potential_coefs(self, coefs: np.ndarray) -> np.ndarray:
        return self.par.strength * self.kernel * coefs

    def order_tensor(self, coefs: np.ndarray) -> np.ndarray:
        """``<n n> - I/3`` from the grid values."""
        g = self.h.grid
        rho = self.values(coefs)
        nn = np.einsum("ij,ija,ijb->ab", g.weights * rho, g.points, g.points)
        return nn / g.integrate(rho) - np.eye(3) / 3

    def order_parameter(self, coefs: np.ndarray) -> float:
        """``S``: 3/2 times the largest eigenvalue of the order tensor."""
        return float(1.5 * np.linalg.eigvalsh(self.order_tensor(coefs))[-1])

    def entropy(self, coefs: np.ndarray) -> float:
        rho = self.values(coefs)
        return self.h.grid.integrate(np.where(rho > 0, rho * np.log(np.where(rho > 0, rho, 1.0)), 0.0))

    # dynamics ----------------------------------------------------------------
    def nonlinear(self, coefs: np.ndarray) -> np.ndarray:
        out = np.zeros_like(coefs)
        if not self.nonlinear_active:
            return out
        rho = self.values(coefs)
        flux = np.zeros((3,) + rho.shape)
        if self.omega_flow is not None:
            flux -= np.moveaxis(self.omega_flow, -1, 0) * rho
        if self.par.strength != 0.0:
            grad = np.stack([self.values(c) for c in self.h.rotgrad(self.potential_coefs(coefs))])
            flux += self.par.D_r / self.par.kBT * grad * rho
        return self.h.rotdiv(self.project(flux))

    def rhs(self, coefs: np.ndarray) -> np.ndarray:
        return self.lin * coefs + self.nonlinear(coefs)

    def _phi(self, h: float):
        z = self.lin * h
        e = np.exp(z)
        small = np.abs(z) < 1e-6
        zs = np.where(small, 1.0, z)
        phi1 = np.where(small, 1 + z / 2, np.expm1(zs) / zs)
        phi2 = np.where(small, 0.5 + z / 6, (np.expm1(zs) - zs) / zs**2)
        return e, phi1, phi2

    def advance(self, coefs: np.ndarray, t_final: float, dt: float = 1e-3, check: bool = True) -> np.ndarray:
        a = np.asarray(coefs, dtype=complex).copy()
        if t_final <= 0:
            return a
        if not self.nonlinear_active:
            return np.exp(self.lin * t_final) * a
        n = max(1, int(np.ceil(t_final / dt - 1e-9)))
        h = t_final / n
        e, phi1, phi2 = self._phi(h)
        for _ in range(n):
            Na = self.nonlinear(a)
            b = e * a + h * phi1 * Na
            a = b + h * phi2 * (self.nonlinear(b) - Na)
            if not np.all(np.isfinite(a)):
                raise FloatingPointError("Doi solver produced non-finite coefficients")
        if check:
            self._check(a)
        return a

    def _check(self, coefs: np.ndarray) -> None:
        from .ball import PositivityError

        low = self.values(coefs).min()
        if low < -NEGATIVE_TOL and self.par.strength == 0.0 and self.omega_flow is None:
            raise PositivityError(f"density reached {low:.3e}")

    def steady_state(self, coefs0: np.ndarray, t_max: float = 50.0, dt: float = 1e-2, tol: float = 1e-10) -> np.ndarray:
        """March to a steady state; stops when ``|rhs| < tol``."""
        a = np.asarray(coefs0, dtype=complex)
        t = 0.0
        while t < t_max:
            a = self.advance(a, 1.0, dt, check=False)
            t += 1.0
            if np.max(np.abs(self.rhs(a))) < tol:
                break
        return a


def uniform_coefs(l_max: int) -> np.ndarray:
    c = np.zeros((l_max + 1) ** 2, dtype=complex)
    c[0] = 1 / np.sqrt(4 * np.pi)
    return c


def von_mises_fisher(l_max: int, kappa: float, axis=(0.0, 0.0, 1.0), grid: SphereGrid | None = None) -> np.ndarray:
    """Harmonic coefficients of ``exp(kappa n.axis)``, normalized."""
    h = Harmonics(l_max, grid)
    m = np.asarray(axis, float) / np.linalg.norm(axis)
    vals = np.exp(kappa * (h.grid.points @ m - 1))
    vals /= h.grid.integrate(vals)
    return h.forward(vals)


def solve_doi_limit(rho0: np.ndarray, par: DoiParams, t_final: float, dt: float = 1e-3) -> np.ndarray:
    """Advance harmonic coefficients ``rho0``."""
    return DoiSolver(par).advance(rho0, t_final, dt)


# axisymmetric Onsager equilibria -----------------------------------------------


@dataclass
class ZonalOnsager:
    """Boltzmann self-consistency ``rho = exp(-U[rho]/kBT)/Z`` for ``rho(n.e3)``.

    Even Legendre modes only (head-tail symmetry). ``U = strength * K rho``
    with ``K`` the ``|n x n'|`` kernel, diagonal in Legendre modes.
    """

    strength: float
    kBT: float = 1.0
    l_max: int = 24
    n_quad: int = 96

    def __post_init__(self):
        self.mu, self.w = np.polynomial.legendre.leggauss(self.n_quad)
        self.ls = np.arange(0, self.l_max + 1, 2)
        self.lam = funk_hecke_sine(self.l_max)[self.ls]
        self.P = np.array([np.polynomial.legendre.Legendre.basis(l)(self.mu) for l in self.ls])
        # rho(mu) = sum_l b_l (2l+1)/(4 pi) P_l(mu); b_l = <P_l>, b_0 = 1

    def density(self, b: np.ndarray) -> np.ndarray:
        return ((2 * self.ls + 1) / (4 * np.pi) * b) @ self.P

    def potential(self, b: np.ndarray) -> np.ndarray:
        return self.strength * ((2 * self.ls + 1) / (4 * np.pi) * self.lam * b) @ self.P

    def boltzmann(self, b: np.ndarray) -> np.ndarray:
        U = self.potential(b)
        g = np.exp(-(U - U.min()) / self.kBT)
        g /= 2 * np.pi * np.sum(self.w * g)
        return 2 * np.pi * self.P @ (self.w * g)

    def solve(self, S_guess: float = 0.6, tol: float = 1e-13) -> np.ndarray:
        """Return moments ``b_l = <P_l>``; starts from a Maier-Saupe-like guess."""
        k = max(0.0, 10 * S_guess)
        g = np.exp(k * self.mu**2)
        g /= 2 * np.pi * np.sum(self.w * g)
        b = 2 * np.pi * self.P @ (self.w * g)
        sol = optimize.root(lambda x: np.concatenate([[0.0], (self.boltzmann(np.r_[1.0, x]) - np.r_[1.0, x])[1:]])[1:],
                            b[1:], method="hybr", tol=tol)
        return np.r_[1.0, sol.x]

    def order_parameter(self, b: np.ndarray) -> float:
        return float(b[1]) if self.ls.size > 1 else 0.0

    def self_consistency(self, b: np.ndarray) -> float:
        """``|S(rho) - S(Boltzmann(rho))|``."""
        return abs(self.order_parameter(b) - self.order_parameter(self.boltzmann(b)))

    def to_coefs(self, b: np.ndarray, l_max: int) -> np.ndarray:
        """Complex ``Y_l^0`` coefficients: ``a_l0 = sqrt((2l+1)/(4 pi)) b_l``."""
        c = np.zeros((l_max + 1) ** 2, dtype=complex)
        for l, bl in zip(self.ls, b):
            if l <= l_max:
                c[l * l + l] = np.sqrt((2 * l + 1) / (4 * np.pi)) * bl
        return c


ISOTROPIC_INSTABILITY = 32.0 / np.pi  # strength/kBT at which isotropy loses stability


@dataclass
class OnsagerSweep:
    strengths: np.ndarray
    S: np.ndarray
    residuals: np.ndarray
    threshold: float


def onsager_sweep(strengths, kBT: float = 1.0, l_max: int = 24) -> OnsagerSweep:
    """Stable steady-state order parameter along an increasing strength ramp.

    Follows the isotropic branch until it loses linear stability, then the
    nematic branch (continuation from the previous solution). The threshold
    is the first strength with ``S > 0.1``.
    """
    strengths = np.asarray(sorted(strengths), dtype=float)
    S, res = [], []
    b_prev = None
    for a in strengths:
        z = ZonalOnsager(a, kBT, l_max)
        if b_prev is None or abs(b_prev[1]) < 1e-6:
            if a * kBT**-1 <= ISOTROPIC_INSTABILITY * 1.0:
                b = np.zeros(z.ls.size)
                b[0] = 1.0
            else:
                b = z.solve(0.6)
        else:
            b = z.solve(b_prev[1])
        S.append(z.order_parameter(b))
        res.append(z.self_consistency(b))
        b_prev = b
    S = np.array(S)
    above = np.nonzero(S > 0.1)[0]
    threshold = float(strengths[above[0]]) if above.size else float("nan")
    return OnsagerSweep(strengths, S, np.array(res), threshold)


def isotropic_growth_rate(strength: float, D_r: float = 1.0, kBT: float = 1.0) -> float:
    """Linear growth rate of a P2 perturbation of the uniform state."""
    lam2 = funk_hecke_sine(2)[2]
    return -6 * D_r * (1 + strength * lam2 / (4 * np.pi * kBT))
