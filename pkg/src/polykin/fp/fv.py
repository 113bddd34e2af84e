"""Finite volumes with Scharfetter-Gummel fluxes on orthogonal grids.

A drift-diffusion flux ``J = v rho - D grad rho`` is discretized across a
face between cells ``L`` and ``R`` at distance ``ds`` as

    J = (D / ds) [B(-P) rho_L - B(P) rho_R],   B(x) = x / (e^x - 1),

with Peclet number ``P = (v_flow . e) ds / D + (phi_L - phi_R)``, where the
conservative part of the drift enters through the potential ``phi`` (in units
of the diffusion temperature). Stationary densities ``rho ~ exp(-phi)`` of the
potential part are reproduced exactly, and the assembled generator has
nonnegative off-diagonal entries and zero column sums.

Supported coordinate systems: ``line`` (d=1), ``radial`` (isotropic d=2 or
d=3), ``polar`` (r, phi) and ``spherical`` (r, theta, phi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import sparse

Coords = Literal["line", "radial", "polar", "spherical"]


def bernoulli(x: np.ndarray) -> np.ndarray:
    """``x / (exp(x) - 1)`` with the removable singularity at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-10
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - 0.5 * x, safe / np.expm1(safe))


@dataclass
class Faces:
    """Interior faces normal to one coordinate direction."""

    left: np.ndarray  # flat cell indices
    right: np.ndarray
    area: np.ndarray
    ds: np.ndarray
    point: np.ndarray  # Cartesian face centres (nf, d)
    normal: np.ndarray  # unit normals (nf, d)


@dataclass
class StructuredGrid:
    coords: Coords
    edges: tuple[np.ndarray, ...]
    dim: int
    faces: list[Faces] = field(init=False)

    def __post_init__(self):
        self.edges = tuple(np.asarray(e, dtype=float) for e in self.edges)
        self.faces = self._build_faces()

    # geometry -----------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(e) - 1 for e in self.edges)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def centers_1d(self, k: int) -> np.ndarray:
        e = self.edges[k]
        return 0.5 * (e[1:] + e[:-1])

    def _mesh(self, arrays):
        return np.meshgrid(*arrays, indexing="ij")

    def to_cartesian(self, *q: np.ndarray) -> np.ndarray:
        c = self.coords
        if c == "line":
            return q[0][..., None]
        if c == "radial":
            r = q[0]
            out = np.zeros(r.shape + (self.dim,))
            out[..., 0] = r
            return out
        if c == "polar":
            r, ph = q
            return np.stack([r * np.cos(ph), r * np.sin(ph)], axis=-1)
        r, th, ph = q
        st = np.sin(th)
        return np.stack([r * st * np.cos(ph), r * st * np.sin(ph), r * np.cos(th)], axis=-1)

    def basis(self, k: int, *q: np.ndarray) -> np.ndarray:
        """Unit vector of coordinate direction ``k`` at points ``q``."""
        c = self.coords
        if c in ("line", "radial"):
            shape = q[0].shape + (self.dim,)
            out = np.zeros(shape)
            out[..., 0] = 1.0
            return out
        if c == "polar":
            ph = q[1]
            if k == 0:
                return np.stack([np.cos(ph), np.sin(ph)], axis=-1)
            return np.stack([-np.sin(ph), np.cos(ph)], axis=-1)
        th, ph = q[1], q[2]
        if k == 0:
            return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1)
        if k == 1:
            return np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], -1)
        return np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], -1)

    @property
    def centers(self) -> np.ndarray:
        """Cartesian cell centres (shape + (d,))."""
        return self.to_cartesian(*self._mesh([self.centers_1d(k) for k in range(len(self.edges))]))

    @property
    def radius(self) -> np.ndarray:
        if self.coords == "line":
            return np.abs(self.centers[..., 0])
        return self._mesh([self.centers_1d(k) for k in range(len(self.edges))])[0]

    @property
    def volumes(self) -> np.ndarray:
        e = self.edges
        c = self.coords
        if c == "line":
            return np.diff(e[0])
        if c == "radial":
            r = e[0]
            unit = 2 * np.pi if self.dim == 2 else 4 * np.pi
            return unit * np.diff(r**self.dim) / self.dim
        if c == "polar":
            return np.outer(np.diff(e[0] ** 2) / 2, np.diff(e[1]))
        rr = np.diff(e[0] ** 3) / 3
        tt = -np.diff(np.cos(e[1]))
        pp = np.diff(e[2])
        return np.einsum("i,j,k->ijk", rr, tt, pp)

    def integrate(self, rho: np.ndarray) -> float:
        return float(np.sum(rho * self.volumes))

    # faces ----------------------------------------------------------------
    def _periodic(self, k: int) -> bool:
        return (self.coords == "polar" and k == 1) or (self.coords == "spherical" and k == 2)

    def _build_faces(self) -> list[Faces]:
        shape = self.shape
        idx = np.arange(self.size).reshape(shape)
        cen = [self.centers_1d(k) for k in range(len(shape))]
        out = []
        for k in range(len(shape)):
            e = self.edges[k]
            if self._periodic(k):
                left = idx
                right = np.roll(idx, -1, axis=k)
                fpos = e[1:]
                gap = np.diff(np.concatenate([cen[k], [cen[k][0] + (e[-1] - e[0])]]))
            else:
                sl = [slice(None)] * len(shape)
                sl[k] = slice(0, -1)
                left = idx[tuple(sl)]
                sl[k] = slice(1, None)
                right = idx[tuple(sl)]
                fpos = e[1:-1]
                gap = np.diff(cen[k])
            # face-centred coordinates: position along k, centres elsewhere
            q = [cen[j] for j in range(len(shape))]
            q[k] = fpos
            Q = self._mesh(q)
            G = list(self._mesh([gap if j == k else np.ones_like(cen[j]) for j in range(len(shape))]))
            area, ds = self._metric(k, Q, G[k])
            out.append(
                Faces(
                    left.ravel(), right.ravel(), area.ravel(), ds.ravel(),
                    self.to_cartesian(*Q).reshape(-1, self.dim),
                    self.basis(k, *Q).reshape(-1, self.dim),
                )
            )
        return out

    def _metric(self, k, Q, gap):
        e = self.edges
        c = self.coords
        if c == "line":
            return np.ones_like(Q[0]), gap
        if c == "radial":
            r = Q[0]
            unit = 2 * np.pi * r if self.dim == 2 else 4 * np.pi * r**2
            return unit, gap
        if c == "polar":
            r = Q[0]
            if k == 0:
                width = np.diff(e[1])[None, :] * np.ones_like(r)
                return r * width, gap
            dr = np.diff(e[0]) [:, None] * np.ones_like(r)
            return dr, r * gap
        r, th = Q[0], Q[1]
        dth = np.diff(e[1])
        dph = np.diff(e[2])
        r_in, r_out = e[0][:-1], e[0][1:]
        if k == 0:
            band = (-np.diff(np.cos(e[1])))[None, :, None] * dph[None, None, :]
            return r**2 * band * np.ones_like(r), gap
        if k == 1:
            ring = (np.diff(e[0] ** 2) / 2)[:, None, None] * dph[None, None, :]
            return np.sin(th) * ring * np.ones_like(r), r * gap
        wedge = (np.diff(e[0] ** 2) / 2)[:, None, None] * dth[None, :, None]
        return wedge * np.ones_like(r), r * np.sin(th) * gap


def drift_diffusion_operator(
    grid: StructuredGrid,
    D: float,
    potential: np.ndarray | None = None,
    velocity: Callable[[np.ndarray], np.ndarray] | None = None,
) -> sparse.csr_matrix:
    """Generator ``L`` with ``d rho/dt = L rho`` for ``J = (v - D grad phi) rho - D grad rho``.

    ``potential`` is ``phi`` at cell centres (dimensionless), ``velocity`` a
    callable returning the non-conservative drift at Cartesian points.
    """
    phi = np.zeros(grid.size) if potential is None else np.asarray(potential, dtype=float).ravel()
    rows, cols, vals = [], [], []
    diag = np.zeros(grid.size)
    for f in grid.faces:
        P = phi[f.left] - phi[f.right]
        if velocity is not None:
            v = velocity(f.point)
            P = P + np.sum(v * f.normal, axis=1) * f.ds / D
        c = f.area * D / f.ds
        out_L = c * bernoulli(-P)  # flux L -> R per unit rho_L
        in_R = c * bernoulli(P)  # flux R -> L per unit rho_R
        # d(m_L)/dt -= out_L rho_L - in_R rho_R ; d(m_R)/dt += same
        np.add.at(diag, f.left, -out_L)
        np.add.at(diag, f.right, -in_R)
        rows += [f.right, f.left]
        cols += [f.left, f.right]
        vals += [out_L, in_R]
    rows.append(np.arange(grid.size))
    cols.append(np.arange(grid.size))
    vals.append(diag)
    # assembled on masses m = V rho; convert to densities
    A = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    V = grid.volumes.ravel()
    return (sparse.diags(1.0 / V) @ A).tocsr()
