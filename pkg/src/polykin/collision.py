"""Velocity-space collision operators, their Maxwellians and cell problems.

Both models share the conservative form ``Q(f) = zeta theta div(M grad(f/M))``
applied axis by axis, where ``theta`` is the Maxwellian variance: ``2 kBT`` for
the dumbbell (``M = exp(-(p^2 + q^2)/(4 kBT))``) and ``kBT`` for the rod
(``M = exp(-(p^2 + omega^2)/(2 kBT))``). The factor-two asymmetry is part of
the models as stated, not a typo.

Discretization: cell-centred grid, flux form
``Q_i = (zeta theta / h^2) [W_{i+1/2} (phi_{i+1} - phi_i) - W_{i-1/2} (phi_i - phi_{i-1})]``
with ``phi = f/M`` and zero flux at both walls. The interface weights ``W``
are built so that ``Q(v M) = -zeta v M`` holds exactly on the grid; they
are a second-order approximation of ``M`` at the interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg
from scipy.special import erf

from . import geometry

MIN_CELLS = 8
Model = Literal["dumbbell", "rod"]


@dataclass(frozen=True)
class Axis:
    """One velocity axis: cell-centred grid on ``[-vmax, vmax]``."""

    name: str
    n_cells: int
    theta: float  # Maxwellian variance on this axis
    zeta: float
    vmax: float

    @property
    def h(self) -> float:
        return 2 * self.vmax / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return -self.vmax + self.h * (np.arange(self.n_cells) + 0.5)

    @property
    def maxwellian(self) -> np.ndarray:
        return np.exp(-self.nodes**2 / (2 * self.theta))

    @property
    def cell_average_maxwellian(self) -> np.ndarray:
        """Exact cell averages of ``M`` (finite-volume projection)."""
        edges = -self.vmax + self.h * np.arange(self.n_cells + 1)
        s = np.sqrt(2 * self.theta)
        cdf = 0.5 * np.sqrt(np.pi) * s * erf(edges / s)
        return np.diff(cdf) / self.h

    @property
    def weights(self) -> np.ndarray:
        """Interface weights ``W_{i+1/2}`` for the interior interfaces."""
        v, M, h = self.nodes, self.maxwellian, self.h
        W = -np.cumsum(v * M) * h / self.theta
        W = W[:-1]
        # mirror for exact symmetry; the last entry of the cumulative sum is 0
        return 0.5 * (W + W[::-1])

    def matrix(self) -> sparse.csr_matrix:
        """1D operator acting on ``f`` (not on ``f/M``)."""
        return (self.stiffness() @ sparse.diags(1.0 / self.maxwellian)).tocsr()

    def stiffness(self) -> sparse.csr_matrix:
        """``K`` with ``Q(M phi) = K phi`` in 1D; symmetric negative semidefinite."""
        n = self.n_cells
        G = sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))
        c = self.zeta * self.theta / self.h**2
        return (-c * (G.T @ sparse.diags(self.weights) @ G)).tocsr()


@dataclass(frozen=True)
class VelocityGrid:
    model: Model
    kBT: float
    axes: tuple[Axis, ...]
    pole: np.ndarray | None = None  # rod: orientation whose tangent plane holds omega

    def __post_init__(self):
        for ax in self.axes:
            if ax.n_cells < MIN_CELLS:
                raise ValueError(
                    f"axis {ax.name!r} has {ax.n_cells} cells; need at least {MIN_CELLS}"
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.n_cells for ax in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod([ax.h for ax in self.axes]))

    @property
    def names(self) -> list[str]:
        return [ax.name for ax in self.axes]

    def coordinate(self, k: int) -> np.ndarray:
        """Broadcastable array of the ``k``-th velocity coordinate."""
        shape = [1] * len(self.axes)
        shape[k] = self.axes[k].n_cells
        return self.axes[k].nodes.reshape(shape)

    def axis_index(self, name: str) -> int:
        return self.names.index(name)

    def maxwellian(self, cell_average: bool = False) -> np.ndarray:
        """Unnormalized ``M`` on the grid (point values or cell averages)."""
        out = np.ones(self.shape)
        for k, ax in enumerate(self.axes):
            m = ax.cell_average_maxwellian if cell_average else ax.maxwellian
            shape = [1] * len(self.axes)
            shape[k] = ax.n_cells
            out = out * m.reshape(shape)
        return out

    def normalization(self) -> float:
        """Exact ``C = int M`` over the untruncated space."""
        return float(np.prod([np.sqrt(2 * np.pi * ax.theta) for ax in self.axes]))

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_volume)

    def tangent_vectors(self, coords: np.ndarray) -> np.ndarray:
        """Rod: map tangent-plane coordinates (..., 2) to 3D vectors at ``pole``."""
        K = geometry.rotate_to_pole(self.pole)
        return coords[..., 0:1] * K[:, 0] + coords[..., 1:2] * K[:, 1]

    @classmethod
    def dumbbell(
        cls, d: int = 1, kBT: float = 1.0, zeta: float = 1.0, n: int = 64, width: float = 6.0
    ) -> "VelocityGrid":
        """Axes ``p_1..p_d, q_1..q_d``; variance ``2 kBT`` on each."""
        theta = 2 * kBT
        vmax = width * np.sqrt(2 * kBT)
        axes = [Axis(f"p{i + 1}", n, theta, zeta, vmax) for i in range(d)]
        axes += [Axis(f"q{i + 1}", n, theta, zeta, vmax) for i in range(d)]
        return cls("dumbbell", kBT, tuple(axes))

    @classmethod
    def rod(
        cls,
        kBT: float = 1.0,
        zeta_t: float = 1.0,
        zeta_r: float = 1.0,
        n: int = 64,
        p_dims: int = 1,
        pole: np.ndarray | None = None,
        width: float = 6.0,
    ) -> "VelocityGrid":
        """Axes ``p_1..p_k`` and the two tangent coordinates ``w1, w2`` at ``pole``."""
        vmax = width * np.sqrt(2 * kBT)
        axes = [Axis(f"p{i + 1}", n, kBT, zeta_t, vmax) for i in range(p_dims)]
        axes += [Axis("w1", n, kBT, zeta_r, vmax), Axis("w2", n, kBT, zeta_r, vmax)]
        pole = geometry.E3.copy() if pole is None else geometry.normalize(pole)
        return cls("rod", kBT, tuple(axes), pole)


def _along(A: sparse.spmatrix | np.ndarray, f: np.ndarray, k: int) -> np.ndarray:
    """Apply matrix ``A`` along axis ``k`` of ``f``."""
    g = np.moveaxis(f, k, 0)
    out = A @ g.reshape(g.shape[0], -1)
    return np.moveaxis(np.asarray(out).reshape(g.shape), 0, k)


def apply_Q(f: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"f has shape {f.shape}, grid is {grid.shape}")
    out = np.zeros_like(f)
    for k, ax in enumerate(grid.axes):
        out += _along(ax.matrix(), f, k)
    return out


def dissipation(f: np.ndarray, grid: VelocityGrid) -> float:
    """``int Q(f) f/M`` in its summation-by-parts form ``-sum zeta theta W (dphi)^2 / h``."""
    f = np.asarray(f, dtype=float)
    M = grid.maxwellian()
    phi = f / M
    total = 0.0
    for k, ax in enumerate(grid.axes):
        dphi = np.diff(phi, axis=k)
        shape = [1] * f.ndim
        shape[k] = ax.n_cells - 1
        W = ax.weights.reshape(shape)
        # remaining Maxwellian factor, constant along axis k
        shape[k] = ax.n_cells
        rest = np.take(M / ax.maxwellian.reshape(shape), [0], axis=k)
        total -= ax.zeta * ax.theta / ax.h**2 * np.sum(rest * W * dphi**2)
    return float(total * grid.cell_volume)


def dissipation_direct(f: np.ndarray, grid: VelocityGrid) -> float:
    """Plain quadrature of ``Q(f) f / M``."""
    return grid.integrate(apply_Q(f, grid) * f / grid.maxwellian())


class FredholmError(ValueError):
    """Right-hand side of a cell problem does not have zero mean."""


def _fast_solve(g: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    # M^{-1/2} Q M^{1/2} is a Kronecker sum of symmetric 1D blocks
    sq = np.sqrt(grid.maxwellian())
    rhs = g / sq
    lams, vecs = [], []
    for ax in grid.axes:
        s = 1.0 / np.sqrt(ax.maxwellian)
        S = (ax.stiffness().toarray() * s[:, None]) * s[None, :]
        lam, V = np.linalg.eigh(S)
        lam[np.argmax(lam)] = 0.0  # null vector sqrt(M_k)
        lams.append(lam)
        vecs.append(V)
    c = rhs
    for k, V in enumerate(vecs):
        c = _along(V.T, c, k)
    denom = np.zeros(grid.shape)
    for k, lam in enumerate(lams):
        shape = [1] * len(grid.axes)
        shape[k] = lam.size
        denom = denom + lam.reshape(shape)
    null = np.abs(denom) == 0.0
    c = np.where(null, 0.0, c / np.where(null, 1.0, denom))
    for k, V in enumerate(vecs):
        c = _along(V, c, k)
    return sq * c


def _direct_solve(g: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    # Q(M phi) = K phi with K symmetric; border with the constraint int M phi = 0
    N = int(np.prod(grid.shape))
    K = sparse.csr_matrix((N, N))
    M = grid.maxwellian()
    for k, ax in enumerate(grid.axes):
        ops = [sparse.identity(a.n_cells, format="csr") for a in grid.axes]
        ops[k] = ax.stiffness()
        rest = np.ones(grid.shape)
        for j, other in enumerate(grid.axes):
            if j != k:
                shape = [1] * len(grid.axes)
                shape[j] = other.n_cells
                rest = rest * other.maxwellian.reshape(shape)
        op = ops[0]
        for o in ops[1:]:
            op = sparse.kron(op, o, format="csr")
        K = K + sparse.diags(rest.ravel()) @ op
    m = M.ravel()[:, None]
    A = sparse.bmat([[K, sparse.csr_matrix(m)], [sparse.csr_matrix(m.T), None]], format="csc")
    rhs = np.concatenate([g.ravel(), [0.0]])
    sol = splinalg.spsolve(A, rhs)
    return (sol[:-1] * m[:, 0]).reshape(grid.shape)


def solve_cell_problem(
    g: np.ndarray,
    grid: VelocityGrid,
    method: Literal["fast", "direct"] = "fast",
    fredholm_tol: float = 1e-10,
) -> np.ndarray:
    """Solve ``Q(psi) = g`` with ``int psi = 0``.

    ``fast`` diagonalizes the 1D blocks (exact up to rounding); ``direct``
    solves the bordered symmetric system in ``phi = psi/M`` and is meant for
    small grids and cross-checks.
    """
    g = np.asarray(g, dtype=float)
    scale = max(grid.integrate(np.abs(g)), np.finfo(float).tiny)
    mean = grid.integrate(g)
    if abs(mean) > fredholm_tol * scale:
        raise FredholmError(f"int g = {mean:.3e}; the cell problem needs zero mean")
    if not np.any(g):
        return np.zeros_like(g)
    psi = _fast_solve(g, grid) if method == "fast" else _direct_solve(g, grid)
    M = grid.maxwellian()
    psi = psi - grid.integrate(psi) / grid.integrate(M) * M
    res = np.linalg.norm(apply_Q(psi, grid) - g)
    if res > 1e-8 * np.linalg.norm(g):
        raise RuntimeError(f"cell problem residual {res:.3e} above tolerance")
    return psi


@dataclass(frozen=True)
class CellSolutions:
    """Analytic correctors as closures of the velocity variables.

    Dumbbell: ``a(p, q)``, ``b(p, q)`` etc. take arrays (..., d). Rod:
    ``a(p, w)`` with ``w`` tangent at the orientation.
    """

    a: Callable[[np.ndarray, np.ndarray], np.ndarray]
    b: Callable[[np.ndarray, np.ndarray], np.ndarray]
    c: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d: Callable[[np.ndarray, np.ndarray], np.ndarray]
    maxwellian: Callable[[np.ndarray, np.ndarray], np.ndarray]


def maxwellian(model: Model, kBT: float, p: np.ndarray, v: np.ndarray) -> np.ndarray:
    theta = 2 * kBT if model == "dumbbell" else kBT
    e = np.sum(np.asarray(p) ** 2, axis=-1) + np.sum(np.asarray(v) ** 2, axis=-1)
    return np.exp(-e / (2 * theta))


def analytic_cell_solutions(
    model: Model, kBT: float = 1.0, zeta: float | None = None,
    zeta_t: float | None = None, zeta_r: float | None = None,
) -> CellSolutions:
    if model == "dumbbell":
        zp = zv = 1.0 if zeta is None else zeta
        theta = 2 * kBT
    else:
        zp = 1.0 if zeta_t is None else zeta_t
        zv = 1.0 if zeta_r is None else zeta_r
        theta = kBT

    def M(p, v):
        return maxwellian(model, kBT, p, v)[..., None]

    def a(p, v):
        return -np.asarray(p) * M(p, v) / zp

    def b(p, v):
        return -np.asarray(v) * M(p, v) / zv

    return CellSolutions(
        a=a,
        b=b,
        c=lambda p, v: -a(p, v) / theta,
        d=lambda p, v: -b(p, v) / theta,
        maxwellian=lambda p, v: M(p, v)[..., 0],
    )


@dataclass(frozen=True)
class MomentIdentity:
    lhs_p: np.ndarray
    lhs_omega: np.ndarray
    rhs_p: np.ndarray
    rhs_omega: np.ndarray


def gaussian_moment_identity(A: np.ndarray, n: np.ndarray, kBT: float, order: int = 8) -> MomentIdentity:
    """Both sides of the rod Gaussian moment identities.

    ``int M (p.A) p dp = kBT A int M`` and
    ``int M (w.A) w d_n w = kBT (I - n n) A int M``; the left-hand sides
    are Gauss-Hermite sums, the omega integral over the tangent plane at
    ``n`` parametrized through ``rotate_to_pole``.
    """
    A = np.asarray(A, dtype=float)
    n = geometry.normalize(n)
    x, w = np.polynomial.hermite_e.hermegauss(order)  # weight exp(-x^2/2)
    s = np.sqrt(kBT)
    # p in R^3
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3) * s
    Wp = np.einsum("i,j,k->ijk", w, w, w).ravel() * s**3
    lhs_p = np.einsum("k,k,ki->i", Wp, X @ A, X)
    int_Mp = Wp.sum()
    # omega in the tangent plane at n
    K = geometry.rotate_to_pole(n)
    Y = np.stack(np.meshgrid(x, x, indexing="ij"), -1).reshape(-1, 2) * s
    Wo = np.outer(w, w).ravel() * s**2
    om = Y @ K[:, :2].T
    lhs_o = np.einsum("k,k,ki->i", Wo, om @ A, om)
    int_Mo = Wo.sum()
    rhs_p = kBT * A * int_Mp
    rhs_o = kBT * (A - n * np.dot(n, A)) * int_Mo
    return MomentIdentity(lhs_p, lhs_o, rhs_p, rhs_o)


def velocity_moment(f: np.ndarray, grid: VelocityGrid, names: Sequence[str]) -> np.ndarray:
    """``int v_k f`` for each named axis."""
    return np.array([grid.integrate(grid.coordinate(grid.axis_index(nm)) * f) for nm in names])
