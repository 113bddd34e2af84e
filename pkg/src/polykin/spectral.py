"""Quadrature and spherical harmonics on the unit sphere.

The product grid is Gauss-Legendre in ``cos(theta)`` times a uniform grid
in ``phi``. Harmonics use scipy's complex ``Y_l^m`` (Condon-Shortley
phase). The rotational gradient ``R = n x grad`` acts on ``Y_l^m`` through
the angular-momentum ladder operators: ``R = i L`` with ``L = -i n x grad``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.special import eval_legendre, sph_harm_y


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre (cos theta) x uniform (phi) product grid."""

    n_theta: int = 32
    n_phi: int = 64

    @cached_property
    def _gl(self):
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        # north pole first
        return x[::-1], w[::-1]

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self._gl[0])

    @property
    def phi(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights of shape (n_theta, n_phi); they sum to 4 pi."""
        return np.outer(self._gl[1], np.full(self.n_phi, 2 * np.pi / self.n_phi))

    @cached_property
    def points(self) -> np.ndarray:
        T, P = np.meshgrid(self.theta, self.phi, indexing="ij")
        st = np.sin(T)
        return np.stack([st * np.cos(P), st * np.sin(P), np.cos(T)], axis=-1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))


def harmonic_index(l_max: int) -> tuple[np.ndarray, np.ndarray]:
    ls, ms = [], []
    for l in range(l_max + 1):
        for m in range(-l, l + 1):
            ls.append(l)
            ms.append(m)
    return np.array(ls), np.array(ms)


def eval_harmonics(l_max: int, points: np.ndarray) -> np.ndarray:
    """``Y_l^m`` at unit vectors ``points`` (..., 3) -> (..., n_coef)."""
    pts = np.asarray(points, dtype=float)
    theta = np.arccos(np.clip(pts[..., 2], -1.0, 1.0))
    phi = np.arctan2(pts[..., 1], pts[..., 0])
    ls, ms = harmonic_index(l_max)
    return sph_harm_y(ls, ms, theta[..., None], phi[..., None])


def funk_hecke_sine(l_max: int) -> np.ndarray:
    """Eigenvalues of the zonal kernel ``|n x n'| = sqrt(1 - (n.n')^2)``.

    ``lambda_l = 2 pi int_{-1}^{1} sqrt(1 - t^2) P_l(t) dt`` computed with
    Gauss-Chebyshev quadrature of the second kind, which is exact here.
    """
    k = l_max // 2 + l_max + 4
    j = np.arange(1, k + 1)
    t = np.cos(j * np.pi / (k + 1))
    w = np.pi / (k + 1) * np.sin(j * np.pi / (k + 1)) ** 2
    return np.array([2 * np.pi * np.sum(w * eval_legendre(l, t)) for l in range(l_max + 1)])


@dataclass
class Harmonics:
    """Spherical-harmonic transforms up to degree ``l_max`` on a product grid."""

    l_max: int
    grid: SphereGrid = field(default=None)

    def __post_init__(self):
        if self.grid is None:
            # enough nodes to integrate products of two band-limited fields
            self.grid = SphereGrid(self.l_max + 8, 2 * self.l_max + 16)
        self.ls, self.ms = harmonic_index(self.l_max)
        self.n_coef = self.ls.size
        Y = eval_harmonics(self.l_max, self.grid.points)
        self._Y = Y.reshape(-1, self.n_coef)
        self._Yw = np.conj(self._Y) * self.grid.weights.reshape(-1)[:, None]

    def index(self, l: int, m: int) -> int:
        return l * l + l + m

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Grid values (n_theta, n_phi) or (..., n_theta, n_phi) -> coefficients."""
        v = np.asarray(values)
        flat = v.reshape(v.shape[:-2] + (-1,))
        return flat @ self._Yw

    def backward(self, coefs: np.ndarray) -> np.ndarray:
        c = np.asarray(coefs)
        out = (c @ self._Y.T).real
        return out.reshape(c.shape[:-1] + self.grid.shape)

    def evaluate(self, coefs: np.ndarray, points: np.ndarray) -> np.ndarray:
        Y = eval_harmonics(self.l_max, points)
        return (Y @ np.asarray(coefs)).real

    @cached_property
    def laplacian(self) -> np.ndarray:
        """Diagonal of ``R . R`` (the Laplace-Beltrami operator)."""
        return -(self.ls * (self.ls + 1)).astype(float)

    @cached_property
    def rotational(self) -> tuple[sparse.csr_matrix, sparse.csr_matrix, sparse.csr_matrix]:
        """Coefficient-space matrices of the three components of ``R``."""
        n = self.n_coef
        Lp = sparse.lil_matrix((n, n), dtype=complex)
        Lm = sparse.lil_matrix((n, n), dtype=complex)
        Lz = sparse.lil_matrix((n, n), dtype=complex)
        for j, (l, m) in enumerate(zip(self.ls, self.ms)):
            Lz[j, j] = m
            if m < l:
                Lp[self.index(l, m + 1), j] = np.sqrt((l - m) * (l + m + 1))
            if m > -l:
                Lm[self.index(l, m - 1), j] = np.sqrt((l + m) * (l - m + 1))
        Lp, Lm, Lz = Lp.tocsr(), Lm.tocsr(), Lz.tocsr()
        Rx = 0.5j * (Lp + Lm)
        Ry = 0.5 * (Lp - Lm)
        Rz = 1j * Lz
        return Rx.tocsr(), Ry.tocsr(), Rz.tocsr()

    def rotgrad(self, coefs: np.ndarray) -> np.ndarray:
        """Coefficients of the three components of ``R f``: shape (3, n_coef)."""
        return np.stack([R @ coefs for R in self.rotational])

    def rotdiv(self, vector_coefs: np.ndarray) -> np.ndarray:
        """Coefficients of ``R . A`` from the coefficients of ``A``'s components."""
        return sum(R @ c for R, c in zip(self.rotational, vector_coefs))

    def rotgrad_at(self, coefs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """``R f`` evaluated at arbitrary unit vectors, shape (..., 3)."""
        Y = eval_harmonics(self.l_max, points)
        return np.stack([(Y @ c).real for c in self.rotgrad(coefs)], axis=-1)

    def mean_p2(self, coefs: np.ndarray) -> float:
        """``int P2(n.e3) rho dn`` for a density with coefficients ``coefs``."""
        if self.l_max < 2:
            return 0.0
        return float((np.sqrt(4 * np.pi / 5) * coefs[self.index(2, 0)]).real)
