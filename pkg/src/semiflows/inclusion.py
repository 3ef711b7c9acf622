"""Discrete evolution inclusions ``du/dt + A u in F(u) + h`` and the Duffing ODE.

The linear part is taken implicitly and the set-valued part explicitly
through a selection from the interval box at the start of each step, so a
step is one symmetric tridiagonal solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, lapack

from .setvalued import Box, nemitski_apply

BLOWUP_THRESHOLD = 1e12

POLICY_KINDS = ("lower", "upper", "midpoint", "random", "scheduled")


class BlowUpError(RuntimeError):
    def __init__(self, step: int, time: float, value: float):
        super().__init__(f"state left |u| <= {BLOWUP_THRESHOLD:g} at step {step} (t={time:.6g}, "
                         f"max |u| = {value:.3g})")
        self.step = step
        self.time = time
        self.value = value


@dataclass(frozen=True)
class LinearOperator:
    """Symmetric tridiagonal matrix stored by its diagonals."""

    dimension: int
    diag: np.ndarray
    offdiag: np.ndarray
    eig_min: float
    eig_max: float
    dx: float = 1.0
    length: float | None = None

    @property
    def matrix(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1))

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``A u`` along the last axis."""
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        if self.dimension > 1:
            out[..., :-1] += self.offdiag * u[..., 1:]
            out[..., 1:] += self.offdiag * u[..., :-1]
        return out

    def norm(self) -> float:
        return max(abs(self.eig_min), abs(self.eig_max))

    @property
    def grid(self) -> np.ndarray:
        """Interior node coordinates."""
        return self.dx * np.arange(1, self.dimension + 1)

    @staticmethod
    def tridiagonal(diag, offdiag, dx: float = 1.0) -> "LinearOperator":
        d = np.asarray(diag, dtype=float)
        e = np.asarray(offdiag, dtype=float)
        if e.shape != (max(len(d) - 1, 0),):
            raise ValueError("offdiagonal must have length n-1")
        ev = eigvalsh_tridiagonal(d, e) if len(d) > 1 else d.copy()
        return LinearOperator(len(d), d, e, float(ev[0]), float(ev[-1]), dx)

    @staticmethod
    def zero(n: int) -> "LinearOperator":
        return LinearOperator(n, np.zeros(n), np.zeros(max(n - 1, 0)), 0.0, 0.0)


def assemble_laplacian(n_interior: int, length: float = 1.0) -> LinearOperator:
    """Dirichlet ``-d^2/dx^2`` on ``(0, length)`` with ``n_interior`` nodes."""
    if int(n_interior) != n_interior or n_interior < 2:
        raise ValueError(f"need at least 2 interior nodes, got {n_interior}")
    if length <= 0:
        raise ValueError("length must be positive")
    n = int(n_interior)
    dx = length / (n + 1)
    inv = 1.0 / (dx * dx)
    k = np.array([1, n])
    ev = 2.0 * inv * (1.0 - np.cos(k * np.pi / (n + 1)))
    return LinearOperator(n, np.full(n, 2.0 * inv), np.full(n - 1, -inv), float(ev[0]),
                          float(ev[1]), dx, float(length))


# --------------------------------------------------------------------------
# Selections
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionPolicy:
    kind: str = "midpoint"
    seed: int = 0
    schedule: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown selection policy {self.kind!r}")
        if self.kind == "scheduled":
            if not self.schedule:
                raise ValueError("scheduled policy needs a nonempty schedule")
            if any(not 0.0 <= w <= 1.0 for w in self.schedule):
                raise ValueError("schedule weights must lie in [0, 1]")

    def describe(self) -> dict:
        d = {"kind": self.kind, "seed": int(self.seed)}
        if self.schedule is not None:
            d["schedule"] = list(self.schedule)
        return d


def _uniform(seed: int, step_index: int, stream: int, size) -> np.ndarray:
    # counter-based: the draw depends only on (seed, step, stream), not on call order
    bg = np.random.Philox(key=int(seed) % (1 << 64),
                          counter=[0, int(step_index) % (1 << 64), int(stream) % (1 << 64), 0])
    return np.random.Generator(bg).random(size)


def selection_weights(policy: SelectionPolicy, step_index: int, shape, stream: int = 0):
    """Convex weights ``w`` such that the selection is ``lo + w (hi - lo)``."""
    k = policy.kind
    if k == "lower":
        return 0.0
    if k == "upper":
        return 1.0
    if k == "midpoint":
        return 0.5
    if k == "scheduled":
        return policy.schedule[step_index % len(policy.schedule)]
    return _uniform(policy.seed, step_index, stream, shape)


def select(box: Box, policy: SelectionPolicy, step_index: int = 0, stream: int = 0) -> np.ndarray:
    lo, hi = np.asarray(box.lo, dtype=float), np.asarray(box.hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("empty box")
    width = hi - lo
    if policy.kind == "random" and not np.any(width > 0):
        return lo.copy()
    w = selection_weights(policy, step_index, lo.shape, stream)
    # clip guards the last ulp for upper-policy selections on wide boxes
    return np.clip(lo + w * width, lo, hi)


# --------------------------------------------------------------------------
# Semi-implicit stepping
# --------------------------------------------------------------------------


class ImplicitSolver:
    """Cached factorization of ``I + dt A``."""

    def __init__(self, A: LinearOperator, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.A = A
        self.dt = float(dt)
        if A.dimension == 1:
            d, e, info = 1.0 + dt * A.diag, None, int(1.0 + dt * A.diag[0] <= 0)
        else:
            d, e, info = lapack.dpttrf(1.0 + dt * A.diag, dt * A.offdiag)
        if info != 0:
            raise np.linalg.LinAlgError(f"I + dt A is not positive definite (info={info})")
        self._d, self._e = d, e

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve along the last axis; accepts a single vector or a batch."""
        rhs = np.asarray(rhs, dtype=float)
        if self._e is None:
            return rhs / self._d[0]
        b = rhs.T if rhs.ndim == 2 else rhs
        x, info = lapack.dpttrs(self._d, self._e, b)
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal solve failed (info={info})")
        return x.T if rhs.ndim == 2 else x


def step_semi_implicit(state, dt: float, A: LinearOperator, fmap, policy: SelectionPolicy,
                       h=None, step_index: int = 0, *, solver: ImplicitSolver | None = None,
                       stream: int = 0):
    """One step of ``(I + dt A) u_next = u + dt (z + h)`` with ``z`` selected from F(u)."""
    u = np.asarray(state, dtype=float)
    if u.shape != (A.dimension,):
        raise ValueError(f"state has shape {u.shape}, operator has dimension {A.dimension}")
    z = select(nemitski_apply(fmap, u), policy, step_index, stream)
    rhs = u + dt * z
    if h is not None:
        rhs = rhs + dt * np.asarray(h, dtype=float)
    solver = solver or ImplicitSolver(A, dt)
    return solver.solve(rhs), z


@dataclass
class TrajectorySample:
    """States at uniform times plus the forcing selected on each step.

    When states are thinned (``record_every > 1``) the stored selection is
    the one applied at the step leaving each recorded state.
    """

    times: np.ndarray
    states: np.ndarray
    selections: np.ndarray
    step: float
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def check(self) -> None:
        if len(self.states) != len(self.times) or len(self.selections) != len(self.times) - 1:
            raise ValueError("inconsistent trajectory lengths")
        dt = np.diff(self.times)
        if np.any(dt <= 0):
            raise ValueError("times must be strictly increasing")
        if len(dt) and not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
            raise ValueError("times must be uniformly spaced")


def _n_steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def integrate(y0, T: float, dt: float, A: LinearOperator, fmap, policy: SelectionPolicy | None = None,
              h=None, *, record_every: int = 1, stream: int = 0,
              check_inclusion: bool = False) -> TrajectorySample:
    """Integrate a single discrete mild solution on ``[0, T]``."""
    policy = policy or SelectionPolicy()
    n = _n_steps(T, dt)
    solver = ImplicitSolver(A, dt)
    u = np.array(y0, dtype=float)
    states = [u.copy()]
    sels = []
    times = [0.0]
    hh = None if h is None else np.asarray(h, dtype=float)
    for k in range(n):
        box = nemitski_apply(fmap, u)
        z = select(box, policy, k, stream)
        if check_inclusion and not box.contains(z):
            raise AssertionError(f"selection left the box at step {k}")
        rhs = u + dt * z if hh is None else u + dt * (z + hh)
        if k % record_every == 0:
            sels.append(z)
        u = solver.solve(rhs)
        m = float(np.max(np.abs(u)))
        if not np.isfinite(m) or m > BLOWUP_THRESHOLD:
            raise BlowUpError(k + 1, (k + 1) * dt, m)
        if (k + 1) % record_every == 0:
            states.append(u.copy())
            times.append((k + 1) * dt)
    if n % record_every:
        sels.pop()
    return TrajectorySample(np.array(times), np.array(states), np.array(sels).reshape(len(sels), -1),
                            dt * record_every,
                            meta={"dt": dt, "policy": policy.describe(), "record_every": record_every,
                                  "dimension": A.dimension})


StepMonitor = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def integrate_batch(y0s, T: float, dt: float, A: LinearOperator, fmap,
                    policy: SelectionPolicy | None = None, h=None, *, record_every: int = 1,
                    monitor: StepMonitor | None = None) -> list[TrajectorySample]:
    """Integrate many initial states in lockstep with one factorization.

    Batch member ``b`` uses random stream ``b``, so it reproduces
    ``integrate(y0s[b], ..., stream=b)``.  ``monitor(k, u, z, u_next)`` is
    called on every step with the full batch arrays.
    """
    policy = policy or SelectionPolicy()
    n = _n_steps(T, dt)
    solver = ImplicitSolver(A, dt)
    u = np.array(y0s, dtype=float)
    if u.ndim != 2 or u.shape[1] != A.dimension:
        raise ValueError("y0s must have shape (batch, dimension)")
    B = u.shape[0]
    states = [u.copy()]
    sels = []
    times = [0.0]
    hh = None if h is None else np.asarray(h, dtype=float)
    for k in range(n):
        lo, hi = fmap.bounds(u)
        width = hi - lo
        if policy.kind == "random":
            if np.any(width > 0):
                w = np.stack([_uniform(policy.seed, k, b, A.dimension) for b in range(B)])
            else:
                w = 0.0
        else:
            w = selection_weights(policy, k, u.shape)
        z = np.clip(lo + w * width, lo, hi)
        rhs = u + dt * z if hh is None else u + dt * (z + hh)
        if k % record_every == 0:
            sels.append(z)
        u_next = solver.solve(rhs)
        m = float(np.max(np.abs(u_next)))
        if not np.isfinite(m) or m > BLOWUP_THRESHOLD:
            raise BlowUpError(k + 1, (k + 1) * dt, m)
        if monitor is not None:
            monitor(k, u, z, u_next)
        u = u_next
        if (k + 1) % record_every == 0:
            states.append(u.copy())
            times.append((k + 1) * dt)
    if n % record_every:
        sels.pop()
    S = np.array(states)
    Z = np.array(sels).reshape(len(sels), B, A.dimension)
    t = np.array(times)
    meta = {"dt": dt, "policy": policy.describe(), "record_every": record_every,
            "dimension": A.dimension}
    return [TrajectorySample(t, S[:, b], Z[:, b], dt * record_every, meta={**meta, "stream": b})
            for b in range(B)]


# --------------------------------------------------------------------------
# Dissipativity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DissipativityReport:
    passed: bool
    max_excess: float
    margin: float
    n_samples: int
    delta: float
    allowance: float


def verify_dissipativity(fmap, A: LinearOperator, n_samples: int = 2000, delta: float = 0.0,
                         allowance: float = 0.0, scale: float = 3.0,
                         seed: int = 0) -> DissipativityReport:
    """Sample ``(z, u) <= (eig_min - delta)|u|^2 + allowance * n`` for extreme selections.

    States are random directions with radii log-uniform in
    ``[1e-3, 10**scale]``; ``z`` is taken from both the lower and upper
    envelope.  ``max_excess`` is the largest violation (negative means
    slack) and ``margin`` the smallest slack per unit ``|u|^2``.
    """
    rng = np.random.default_rng(seed)
    n = A.dimension
    dirs = rng.standard_normal((n_samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = 10.0 ** rng.uniform(-3.0, scale, n_samples)
    u = dirs * radii[:, None]
    lo, hi = fmap.bounds(u)
    zu = np.maximum(np.sum(lo * u, axis=1), np.sum(hi * u, axis=1))
    uu = np.sum(u * u, axis=1)
    excess = zu - (A.eig_min - delta) * uu - allowance * n
    margin = float(np.min(-excess / uu))
    mx = float(np.max(excess))
    return DissipativityReport(mx <= 0.0, mx, margin, n_samples, delta, allowance)


# --------------------------------------------------------------------------
# Duffing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DuffingState:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("Duffing state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def duffing_field(p: np.ndarray) -> np.ndarray:
    x, y = p[..., 0], p[..., 1]
    return np.stack([y, x - x ** 3], axis=-1)


def duffing_energy(s) -> float | np.ndarray:
    """``y^2/2 - x^2/2 + x^4/4``; accepts a DuffingState or an array of shape (..., 2)."""
    if isinstance(s, DuffingState):
        x, y = s.x, s.y
        return 0.5 * y * y - 0.5 * x * x + 0.25 * x ** 4
    p = np.asarray(s, dtype=float)
    x, y = p[..., 0], p[..., 1]
    return 0.5 * y * y - 0.5 * x * x + 0.25 * x ** 4


def duffing_integrate(s0: DuffingState, T: float, dt: float = 1e-3) -> TrajectorySample:
    """Classical RK4 with compensated summation of the state.

    For ``T < 0`` the field is reversed and the result covers ``[T, 0]``
    in increasing time, ending at ``s0``.  Compensation keeps round-off
    below the truncation error down to ``dt ~ 5e-4``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    backward = T < 0
    n = _n_steps(abs(T), dt)
    sign = -1.0 if backward else 1.0
    xs = np.empty((n + 1, 2))
    p = s0.as_array()
    comp = np.zeros(2)
    xs[0] = p
    for k in range(n):
        k1 = sign * duffing_field(p)
        k2 = sign * duffing_field(p + 0.5 * dt * k1)
        k3 = sign * duffing_field(p + 0.5 * dt * k2)
        k4 = sign * duffing_field(p + dt * k3)
        inc = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) - comp
        new = p + inc
        comp = (new - p) - inc
        p = new
        if not np.all(np.isfinite(p)) or np.max(np.abs(p)) > BLOWUP_THRESHOLD:
            raise BlowUpError(k + 1, sign * (k + 1) * dt, float(np.max(np.abs(p))))
        xs[k + 1] = p
    t = dt * np.arange(n + 1)
    if backward:
        return TrajectorySample(-t[::-1], xs[::-1].copy(), np.zeros((n, 0)), dt,
                                meta={"system": "duffing", "dt": dt, "direction": "backward"})
    return TrajectorySample(t, xs, np.zeros((n, 0)), dt,
                            meta={"system": "duffing", "dt": dt, "direction": "forward"})


def trajectory_inclusion_residual(traj: TrajectorySample, fmap, stride: int | None = None) -> float:
    """Largest distance of a recorded selection from the box at its start state.

    Only valid for unthinned trajectories (``record_every == 1``).
    """
    if traj.meta.get("record_every", 1) != 1:
        raise ValueError("residual needs an unthinned trajectory")
    idx = np.arange(len(traj.selections))
    if stride:
        idx = idx[::stride]
    lo, hi = fmap.bounds(traj.states[idx])
    z = traj.selections[idx]
    gap = np.maximum(lo - z, 0.0) + np.maximum(z - hi, 0.0)
    return float(np.max(gap, initial=0.0))


def exact_linear_decay(y0, A: LinearOperator, dt: float, k: int) -> np.ndarray:
    """``(I + dt A)^{-k} y0`` by repeated dense solves (test oracle)."""
    M = np.eye(A.dimension) + dt * A.matrix
    y = np.asarray(y0, dtype=float)
    for _ in range(k):
        y = np.linalg.solve(M, y)
    return y


def lipschitz_growth_ok(traj_a: TrajectorySample, traj_b: TrajectorySample, c_N: float,
                        dt: float) -> bool:
    """``|y1(t) - y2(t)| <= exp(c_N t) |y1(0) - y2(0)| (1 + 10 dt)`` along both runs."""
    d0 = np.linalg.norm(traj_a.states[0] - traj_b.states[0])
    d = np.linalg.norm(traj_a.states - traj_b.states, axis=1)
    return bool(np.all(d <= np.exp(c_N * traj_a.times) * d0 * (1.0 + 10.0 * dt) + 1e-14))
