"""Trajectory ensembles with scheduling-independent random streams.

Trajectories are grouped in fixed blocks of ``BLOCK`` consecutive indices.
Block ``b`` owns a Philox generator seeded from
``SeedSequence([seed, b, start_step])``
and always draws full-block arrays, trimming the tail, so the noise seen by
trajectory ``i`` depends only on ``(seed, i)``. Gaussians come from numpy's
``Generator.standard_normal`` (ziggurat). Step retries use a separate
generator keyed by ``(seed, i, step, level, path)``.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, TypeVar

import numpy as np

BLOCK = 4096
MAX_HALVINGS = 20


class NumericAbort(RuntimeError):
    def __init__(self, message: str, trajectory: int | None = None, step: int | None = None):
        super().__init__(message)
        self.trajectory = trajectory
        self.step = step


class BlockRNG:
    """Block-owned normal stream; draws ``BLOCK`` rows and keeps the first ``size``."""

    def __init__(self, seed: int, block: int, size: int, start_step: int = 0):
        self.size = size
        ss = np.random.SeedSequence([seed, block, start_step])
        self._gen = np.random.Generator(np.random.Philox(ss))

    def standard_normal(self, shape) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape))
        if shape[0] != self.size:
            raise ValueError("block stream must be drawn for the whole block")
        return self._gen.standard_normal((BLOCK,) + shape[1:])[: self.size]


def trajectory_rng(seed: int, index: int, step: int, level: int, path: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, index, step, level, path, 0x7E7])
    return np.random.Generator(np.random.Philox(ss))


S = TypeVar("S", bound="BatchState")


@dataclass
class BatchState:
    """Base for states stored as arrays with a leading trajectory axis."""

    def __len__(self) -> int:
        return len(getattr(self, dataclasses.fields(self)[0].name))

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def take(self: S, idx) -> S:
        return type(self)(**{k: v[idx].copy() for k, v in self.arrays().items()})

    def put(self, idx, other: "BatchState") -> None:
        for k, v in self.arrays().items():
            v[idx] = getattr(other, k)

    def copy(self: S) -> S:
        return type(self)(**{k: v.copy() for k, v in self.arrays().items()})

    def finite(self) -> np.ndarray:
        ok = np.ones(len(self), dtype=bool)
        for v in self.arrays().values():
            ok &= np.all(np.isfinite(v.reshape(len(v), -1)), axis=1)
        return ok

    @classmethod
    def concat(cls: type[S], parts: Sequence[S]) -> S:
        names = [f.name for f in dataclasses.fields(cls)]
        return cls(**{k: np.concatenate([getattr(p, k) for p in parts]) for k in names})


class Dynamics(Protocol):
    def step(self, state, dt: float, rng) -> "BatchState": ...

    def valid(self, state) -> np.ndarray: ...


def _accepted(dyn, old, new) -> np.ndarray:
    if hasattr(dyn, "accept"):
        return dyn.accept(old, new)
    return dyn.valid(new)


@dataclass
class Ensemble:
    state: BatchState
    seed: int
    time: float = 0.0
    steps: int = 0

    @property
    def size(self) -> int:
        return len(self.state)


class StackedRNG:
    """Row ``k`` of every draw comes from its own generator ``gens[k]``."""

    def __init__(self, gens: Sequence[np.random.Generator]):
        self.gens = list(gens)

    def standard_normal(self, shape) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape))
        return np.stack([g.standard_normal(shape[1:]) for g in self.gens])


def guarded_step(dyn: Dynamics, st, dt, rng, seed, index, step, level=0, path=None):
    """One step; rejected trajectories are redone as two half steps.

    A step is rejected when the new state leaves the valid domain, or when the
    dynamics define ``accept(old, new)`` and it returns False. Retried
    trajectories draw from generators keyed by ``(seed, i, step, level, path)``
    and are advanced together.
    """
    if path is None:
        path = np.zeros(len(index), dtype=np.int64)
    new = dyn.step(st, dt, rng)
    bad = np.flatnonzero(~_accepted(dyn, st, new))
    if bad.size == 0:
        return new
    if level >= MAX_HALVINGS:
        raise NumericAbort(
            f"step for trajectory {index[bad[0]]} still rejected after {MAX_HALVINGS} halvings",
            int(index[bad[0]]), step,
        )
    sub = st.take(bad)
    ij, pth = index[bad], path[bad]
    g = StackedRNG([trajectory_rng(seed, int(i), step, level, int(p)) for i, p in zip(ij, pth)])
    sub = guarded_step(dyn, sub, dt / 2, g, seed, ij, step, level + 1, 2 * pth)
    sub = guarded_step(dyn, sub, dt / 2, g, seed, ij, step, level + 1, 2 * pth + 1)
    new.put(bad, sub)
    return new


Observer = Callable[[float, BatchState], None]


def _advance_block(dyn, st, rng, seed, index, dt, step0, n_steps):
    for k in range(n_steps):
        st = guarded_step(dyn, st, dt, rng, seed, index, step0 + k)
        ok = st.finite()
        if not ok.all():
            j = int(np.flatnonzero(~ok)[0])
            raise NumericAbort(
                f"non-finite state in trajectory {index[j]} at step {step0 + k + 1}",
                int(index[j]), step0 + k + 1,
            )
    return st


def simulate_ensemble(
    ens: Ensemble,
    dyn: Dynamics,
    dt: float,
    t_final: float,
    observers: Sequence[Observer] = (),
    sample_times: Sequence[float] | None = None,
    threads: int = 1,
) -> Ensemble:
    """Advance every trajectory to ``t_final``; observers run at ``sample_times``.

    Sample times are rounded to the step grid. Results do not depend on
    ``threads``: blocks are independent and reassembled in index order.
    Dynamics with a ``prepare(state)`` hook (mean-field coupling) are
    synchronized every step.
    """
    if t_final < ens.time - 1e-12:
        raise ValueError("t_final precedes the ensemble time")
    n_total = int(round((t_final - ens.time) / dt)) if dt > 0 else 0
    if sample_times is None:
        sample_times = [t_final]
    marks = sorted({min(n_total, max(0, int(round((t - ens.time) / dt)))) for t in sample_times}) if dt > 0 else [0]
    sync_each_step = hasattr(dyn, "prepare")

    N = ens.size
    starts = list(range(0, N, BLOCK))
    # streams are keyed by the step count at entry, so a resumed run is
    # reproducible for a fixed schedule of calls
    rngs = [BlockRNG(ens.seed, b, min(BLOCK, N - s), ens.steps) for b, s in enumerate(starts)]
    blocks = [ens.state.take(slice(s, s + BLOCK)) for s in starts]
    index = [np.arange(s, min(s + BLOCK, N)) for s in starts]

    def emit(step):
        t = ens.time + step * dt
        full = type(ens.state).concat(blocks) if len(blocks) > 1 else blocks[0]
        for obs in observers:
            obs(t, full)
        return full

    done = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        if 0 in marks:
            emit(0)
        for mark in [m for m in marks if m > 0] + ([n_total] if n_total not in marks else []):
            while done < mark:
                chunk = 1 if sync_each_step else mark - done
                if sync_each_step:
                    dyn.prepare(type(ens.state).concat(blocks))
                args = [
                    (dyn, blocks[b], rngs[b], ens.seed, index[b], dt, ens.steps + done, chunk)
                    for b in range(len(blocks))
                ]
                if pool is None:
                    blocks = [_advance_block(*a) for a in args]
                else:
                    blocks = list(pool.map(lambda a: _advance_block(*a), args))
                done += chunk
            if mark in marks:
                emit(mark)
    finally:
        if pool is not None:
            pool.shutdown()
    state = type(ens.state).concat(blocks) if blocks else ens.state
    return Ensemble(state, ens.seed, ens.time + n_total * dt, ens.steps + n_total)
