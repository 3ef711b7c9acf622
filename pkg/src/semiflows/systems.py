"""Uniform interface over the systems the graph and limit-set tools act on.

A system maps a batch of points to time-``t`` endpoints under a family of
selections.  ODE systems are single-valued, so every selection index gives
the same flow; inclusion systems enumerate lower, upper and midpoint
selections followed by seeded random ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .inclusion import (BlowUpError, LinearOperator, SelectionPolicy, TrajectorySample, duffing_field,
                        integrate_batch)

ESCAPE_RADIUS = 1e6


class FlowSystem(Protocol):
    dim: int
    name: str

    def endpoints(self, points: np.ndarray, t: float, n_selections: int = 1,
                  seed: int = 0) -> np.ndarray:
        """Array of shape ``(n_selections, M, dim)``; escaped runs are NaN."""

    def trajectories(self, points: np.ndarray, T: float, record_every: int = 1,
                     selection: int = 0, seed: int = 0) -> list[TrajectorySample]:
        ...

    def describe(self) -> dict:
        ...


def _rk4(field_fn, p: np.ndarray, h: float) -> np.ndarray:
    k1 = field_fn(p)
    k2 = field_fn(p + 0.5 * h * k1)
    k3 = field_fn(p + 0.5 * h * k2)
    k4 = field_fn(p + h * k3)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class VectorFieldSystem:
    """Autonomous ODE ``x' = field(x)`` integrated by fixed-step RK4."""

    field_fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    name: str = "field"
    dt: float = 1e-2

    def _steps(self, t: float) -> tuple[int, float]:
        n = max(1, math.ceil(abs(t) / self.dt - 1e-9))
        return n, t / n

    def flow(self, points, t: float) -> np.ndarray:
        p = np.array(points, dtype=float)
        if t == 0:
            return p
        n, h = self._steps(t)
        alive = np.ones(p.shape[0], dtype=bool)
        for _ in range(n):
            p[alive] = _rk4(self.field_fn, p[alive], h)
            bad = ~np.all(np.isfinite(p), axis=1) | (np.max(np.abs(p), axis=1) > ESCAPE_RADIUS)
            if np.any(bad & alive):
                p[bad] = np.nan
                alive &= ~bad
        return p

    def endpoints(self, points, t: float, n_selections: int = 1, seed: int = 0) -> np.ndarray:
        return self.flow(np.atleast_2d(points), t)[None]

    def trajectories(self, points, T: float, record_every: int = 1, selection: int = 0,
                     seed: int = 0) -> list[TrajectorySample]:
        p = np.array(np.atleast_2d(points), dtype=float)
        n, h = self._steps(T)
        out = [p.copy()]
        for k in range(n):
            p = _rk4(self.field_fn, p, h)
            if (k + 1) % record_every == 0 or k == n - 1:
                out.append(p.copy())
        S = np.array(out)
        idx = list(range(0, n + 1, record_every))
        if idx[-1] != n:
            idx.append(n)
        t = h * np.array(idx, dtype=float)
        return [TrajectorySample(t, S[:, b], np.zeros((len(t) - 1, 0)), h * record_every,
                                 meta={"system": self.name, "dt": h})
                for b in range(p.shape[0])]

    def describe(self) -> dict:
        return {"kind": "vector_field", "name": self.name, "dim": self.dim, "dt": self.dt}


def duffing_system(dt: float = 1e-2) -> VectorFieldSystem:
    return VectorFieldSystem(duffing_field, 2, "duffing", dt)


def contraction_system(dim: int = 1, rate: float = 1.0, dt: float = 1e-2) -> VectorFieldSystem:
    return VectorFieldSystem(lambda p: -rate * p, dim, "contraction", dt)


def zero_system(dim: int = 1) -> VectorFieldSystem:
    return VectorFieldSystem(lambda p: np.zeros_like(p), dim, "zero", 1.0)


_FIXED = ("lower", "upper", "midpoint")


def policy_for(index: int, seed: int = 0) -> SelectionPolicy:
    """Selection number ``index``: lower, upper, midpoint, then random streams."""
    if index < len(_FIXED):
        return SelectionPolicy(_FIXED[index])
    return SelectionPolicy("random", seed=(int(seed) * 1_000_003 + index) % (1 << 63))


@dataclass(frozen=True)
class InclusionSystem:
    """Discrete inclusion ``du/dt + A u in F(u) + h`` with a fixed step."""

    A: LinearOperator
    fmap: object
    h: np.ndarray | None = None
    dt: float = 1e-3
    name: str = "inclusion"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.A.dimension

    def _steps(self, t: float) -> tuple[float, float]:
        if t <= 0:
            raise ValueError("inclusions run forward in time only")
        n = max(1, math.ceil(t / self.dt - 1e-9))
        return n * (t / n), t / n

    def endpoints(self, points, t: float, n_selections: int = 1, seed: int = 0) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        T, h = self._steps(t)
        out = np.empty((n_selections, p.shape[0], self.dim))
        for j in range(n_selections):
            try:
                trs = integrate_batch(p, T, h, self.A, self.fmap, policy_for(j, seed), self.h,
                                      record_every=max(1, round(T / h)))
                out[j] = np.array([tr.final for tr in trs])
            except BlowUpError:  # redo one by one so only the escaping runs are lost
                for b in range(p.shape[0]):
                    try:
                        tr = integrate_batch(p[b:b + 1], T, h, self.A, self.fmap,
                                             policy_for(j, seed), self.h,
                                             record_every=max(1, round(T / h)))
                        out[j, b] = tr[0].final
                    except BlowUpError:
                        out[j, b] = np.nan
        return out

    def trajectories(self, points, T: float, record_every: int = 1, selection: int = 0,
                     seed: int = 0) -> list[TrajectorySample]:
        T, h = self._steps(T)
        return integrate_batch(np.atleast_2d(points), T, h, self.A, self.fmap,
                               policy_for(selection, seed), self.h, record_every=record_every)

    def describe(self) -> dict:
        return {"kind": "inclusion", "name": self.name, "dim": self.dim, "dt": self.dt,
                "map": getattr(self.fmap, "name", "custom"), **self.meta}
