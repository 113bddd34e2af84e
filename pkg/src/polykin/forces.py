"""Spring laws, imposed linear flows and the Onsager excluded-volume potential."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import geometry
from .spectral import Harmonics, SphereGrid, funk_hecke_sine


class FENEDomainError(ValueError):
    """A FENE spring was evaluated at or beyond its maximum extension."""


@dataclass(frozen=True)
class SpringModel:
    kind: Literal["hookean", "fene"] = "hookean"
    H: float = 1.0
    n0: float | None = None

    def __post_init__(self):
        if self.kind not in ("hookean", "fene"):
            raise ValueError(f"unknown spring kind {self.kind!r}")
        if self.H <= 0:
            raise ValueError("spring constant H must be positive")
        if self.kind == "fene" and (self.n0 is None or self.n0 <= 0):
            raise ValueError("FENE spring needs a positive maximum extension n0")

    @property
    def is_fene(self) -> bool:
        return self.kind == "fene"

    def _stretch(self, n: np.ndarray) -> np.ndarray:
        r2 = np.sum(np.asarray(n, dtype=float) ** 2, axis=-1, keepdims=True)
        if self.is_fene:
            s = r2 / self.n0**2
            if np.any(s >= 1.0):
                raise FENEDomainError(f"|n| >= n0 = {self.n0}")
            return s
        return r2

    def force(self, n: np.ndarray) -> np.ndarray:
        return spring_force(n, self)

    def potential(self, n: np.ndarray) -> np.ndarray:
        return spring_potential(n, self)

    def nonlinear_force(self, n: np.ndarray) -> np.ndarray:
        """``F(n) - H n``: the part not captured by a Hookean spring."""
        n = np.asarray(n, dtype=float)
        if not self.is_fene:
            return np.zeros_like(n)
        s = self._stretch(n)
        return self.H * n * (s / (1.0 - s))

    def equilibrium_width(self, kBT: float) -> float:
        """Per-component standard deviation ``sqrt(kBT/H)`` of the Hookean law."""
        return float(np.sqrt(kBT / self.H))


def spring_force(n: np.ndarray, model: SpringModel) -> np.ndarray:
    """Hookean ``H n`` or FENE ``H n / (1 - |n|^2/n0^2)``."""
    n = np.asarray(n, dtype=float)
    if model.is_fene:
        s = model._stretch(n)
        return model.H * n / (1.0 - s)
    return model.H * n


def spring_potential(n: np.ndarray, model: SpringModel) -> np.ndarray:
    """Spring energy with ``grad U = F`` (force column of the standard table)."""
    n = np.asarray(n, dtype=float)
    s = model._stretch(n)[..., 0]
    if model.is_fene:
        return -0.5 * model.H * model.n0**2 * np.log1p(-s)
    return 0.5 * model.H * s


@dataclass(frozen=True)
class FlowField:
    """Homogeneous linear flow ``u(x) = kappa @ x`` with ``kappa[i, j] = du_i/dx_j``."""

    kappa: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.kappa, dtype=float))
        if k.shape[0] != k.shape[1]:
            raise ValueError("velocity gradient must be square")
        object.__setattr__(self, "kappa", k)

    @property
    def dim(self) -> int:
        return self.kappa.shape[0]

    @property
    def is_quiescent(self) -> bool:
        return not np.any(self.kappa)

    @classmethod
    def quiescent(cls, dim: int = 3) -> "FlowField":
        return cls(np.zeros((dim, dim)), "quiescent")

    @classmethod
    def simple_shear(cls, rate: float, dim: int = 3) -> "FlowField":
        """``u = (rate * x_2, 0, ...)``."""
        k = np.zeros((dim, dim))
        k[0, 1] = rate
        return cls(k, "shear")

    @classmethod
    def planar_extension(cls, rate: float, dim: int = 3) -> "FlowField":
        k = np.zeros((dim, dim))
        k[0, 0], k[1, 1] = rate, -rate
        return cls(k, "extension")

    def velocity(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.kappa.T


def flow_eval(flow: FlowField, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return flow.velocity(x), flow.kappa.copy()


@dataclass
class OnsagerPotential:
    """Excluded-volume potential ``U(n) = strength * int |n x n'| rho(n') dn'``.

    ``rho`` is given by its values on ``grid``. The kernel is zonal, so the
    potential is evaluated through its spherical-harmonic (Funk-Hecke)
    eigenvalues, which makes the uniform density give an exactly constant
    potential.
    """

    strength: float = 0.0
    grid: SphereGrid = field(default_factory=SphereGrid)
    l_max: int | None = None

    def __post_init__(self):
        if self.strength < 0:
            raise ValueError("Onsager strength must be non-negative")
        if self.l_max is None:
            self.l_max = self.grid.n_theta - 1
        self.harmonics = Harmonics(self.l_max, self.grid)
        self.kernel = funk_hecke_sine(self.l_max)[self.harmonics.ls]

    def _coefs(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != self.grid.shape:
            raise ValueError(
                f"density has shape {rho.shape}, quadrature grid is {self.grid.shape}"
            )
        return self.strength * self.kernel * self.harmonics.forward(rho)

    def potential_coefs(self, rho: np.ndarray) -> np.ndarray:
        return self._coefs(rho)

    def field(self, rho: np.ndarray):
        """Return ``U`` as a callable on unit vectors."""
        c = self._coefs(rho)
        return lambda n: self.harmonics.evaluate(c, geometry.normalize(n))


def onsager_potential(rho: np.ndarray, n: np.ndarray, pot: OnsagerPotential) -> float:
    if pot.strength == 0:
        return 0.0
    return float(pot.field(rho)(np.asarray(n, dtype=float)))


def onsager_torque(
    rho: np.ndarray, n: np.ndarray, pot: OnsagerPotential, h: float = geometry.DEFAULT_STEP
) -> np.ndarray:
    """Thermodynamic torque ``-R U`` at ``n``."""
    if pot.strength == 0:
        return np.zeros(3)
    U = pot.field(rho)
    return -geometry.rotational_gradient(lambda m: float(U(m)), n, h)
