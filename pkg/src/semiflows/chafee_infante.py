"""Stationary states, energy and long-time behaviour of 1-D reaction-diffusion.

Two sign conventions are carried explicitly by ``ReactionProfile.form``:

* ``"ci"``:  ``u_t - u_xx = f(u) + h``,  energy ``int u_x^2/2 - F(u) - h u``
* ``"rd"``:  ``u_t - u_xx + f(u) = h``,  energy ``int u_x^2/2 + F(u) - h u``

with ``F' = f`` and ``F(0) = 0``.  Both are discretized on the interior
nodes of ``(0, 1)`` with homogeneous Dirichlet conditions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .inclusion import (LinearOperator, SelectionPolicy, TrajectorySample, assemble_laplacian,
                        integrate_batch)
from .setvalued import ScalarSetMap

ScalarFn = Callable[[np.ndarray], np.ndarray]

SHOOT_ESCAPE = 1e8


class ShootingBlowUp(RuntimeError):
    def __init__(self, x: float, slope: float):
        super().__init__(f"shooting from slope {slope:.6g} escaped at x={x:.6g}")
        self.x = x
        self.slope = slope


@dataclass(frozen=True)
class ReactionProfile:
    f: ScalarFn
    F: ScalarFn
    fprime0: float
    h: float | np.ndarray = 0.0
    form: str = "ci"
    fprime: ScalarFn | None = None
    name: str = "custom"
    amplitude: float = 1.0

    def __post_init__(self):
        if self.form not in ("ci", "rd"):
            raise ValueError("form must be 'ci' or 'rd'")

    @property
    def sign(self) -> float:
        """Coefficient of ``f`` in the stationary operator ``A u + sign f(u) - h``."""
        return -1.0 if self.form == "ci" else 1.0

    def derivative(self, u: np.ndarray) -> np.ndarray:
        if self.fprime is not None:
            return self.fprime(u)
        d = 1e-6 * np.maximum(1.0, np.abs(u))
        return (self.f(u + d) - self.f(u - d)) / (2 * d)

    def forcing(self, n: int) -> np.ndarray:
        h = np.asarray(self.h, dtype=float)
        return np.broadcast_to(h, (n,)) if h.ndim == 0 else h

    def check(self, grid=None, tol: float = 1e-6) -> list[str]:
        """Sampled checks of ``F' = f``, ``F(0) = 0`` and ``f'(0) > 0``."""
        u = np.linspace(-3, 3, 601) if grid is None else np.asarray(grid, dtype=float)
        problems = []
        d = 1e-7
        fd = (self.F(u + d) - self.F(u - d)) / (2 * d)
        if np.max(np.abs(fd - self.f(u)) / (1 + np.abs(self.f(u)))) > tol:
            problems.append("F is not an antiderivative of f")
        if abs(float(self.F(np.array([0.0]))[0])) > tol:
            problems.append("F(0) != 0")
        c = (self.f(np.array([1e-6])) - self.f(np.array([-1e-6])))[0] / 2e-6
        if not c > 0:
            problems.append("f'(0) is not positive")
        if abs(c - self.fprime0) > 1e-4 * max(1.0, abs(self.fprime0)):
            problems.append("fprime0 does not match the measured derivative")
        return problems


def cubic_profile(lam: float) -> ReactionProfile:
    """``f(u) = lam u - u^3`` in the ``ci`` convention."""
    return ReactionProfile(
        f=lambda u: u * (lam - u * u),
        F=lambda u: 0.5 * lam * u * u - 0.25 * u ** 4,
        fprime0=float(lam),
        fprime=lambda u: lam - 3.0 * u * u,
        name=f"cubic:lambda={lam!r}",
        amplitude=math.sqrt(max(lam, 0.0)) or 1.0,
    )


def inclusion_map(profile: ReactionProfile, clip: float | None = None) -> ScalarSetMap:
    """The right-hand side as a single-valued map for the inclusion integrator.

    Frozen beyond ``+-clip`` (default four times the amplitude) for bounded growth.
    """
    U = 4.0 * max(profile.amplitude, 1.0) if clip is None else clip
    s = -profile.sign

    def g(u):
        return s * profile.f(np.clip(np.asarray(u, dtype=float), -U, U))

    grid = np.linspace(-U, U, 4001)
    C1 = float(np.max(np.abs(g(grid))))
    return ScalarSetMap(g, g, C1, 0.0, name=profile.name, kinks=(-U, U))


# --------------------------------------------------------------------------
# Shooting
# --------------------------------------------------------------------------


def _rhs(profile: ReactionProfile, u):
    # u'' = sign f(u) - h
    return profile.sign * profile.f(u) - float(np.asarray(profile.h))


def _shoot_many(profile: ReactionProfile, slopes: np.ndarray, n_steps: int,
                keep_path: bool = False):
    """RK4 on ``u'' = sign f(u) - h`` for many initial slopes at once.

    Escaped runs report ``+-inf`` (sign of ``u`` at escape) and the escape location.
    """
    s = np.asarray(slopes, dtype=float)
    u = np.zeros_like(s)
    v = s.copy()
    hx = 1.0 / n_steps
    esc = np.full(s.shape, np.nan)
    alive = np.ones(s.shape, dtype=bool)
    path = [u.copy()] if keep_path else None
    for k in range(n_steps):
        ua, va = u[alive], v[alive]
        k1u, k1v = va, _rhs(profile, ua)
        k2u, k2v = va + 0.5 * hx * k1v, _rhs(profile, ua + 0.5 * hx * k1u)
        k3u, k3v = va + 0.5 * hx * k2v, _rhs(profile, ua + 0.5 * hx * k2u)
        k4u, k4v = va + hx * k3v, _rhs(profile, ua + hx * k3u)
        u[alive] = ua + (hx / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        v[alive] = va + (hx / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        bad = alive & ~(np.abs(u) <= SHOOT_ESCAPE)
        if np.any(bad):
            esc[bad] = (k + 1) * hx
            u[bad] = np.copysign(np.inf, np.nan_to_num(u[bad], nan=1.0))
            alive &= ~bad
        if keep_path:
            path.append(u.copy())
    return u, esc, (np.array(path) if keep_path else None)


def shoot(profile: ReactionProfile, slope: float, n_steps: int = 1000):
    """``u(1)`` and the sampled path for ``u(0) = 0``, ``u'(0) = slope``."""
    if n_steps < 100:
        raise ValueError("n_steps must be at least 100")
    u1, esc, path = _shoot_many(profile, np.array([slope]), n_steps, keep_path=True)
    if not np.isfinite(u1[0]):
        raise ShootingBlowUp(float(esc[0]), slope)
    return float(u1[0]), path[:, 0]


# --------------------------------------------------------------------------
# Equilibria
# --------------------------------------------------------------------------


@dataclass
class EquilibriumSet:
    profiles: np.ndarray
    shooting_slopes: list[float]
    residuals: list[float]
    grid: np.ndarray
    raw_residuals: list[float] = field(default_factory=list)
    flagged: list[float] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.profiles)

    def index_of_zero(self) -> int | None:
        amp = np.max(np.abs(self.profiles), axis=1)
        i = int(np.argmin(amp))
        return i if amp[i] < 1e-8 else None

    def labels(self) -> list[str]:
        out = []
        for s, p in zip(self.shooting_slopes, self.profiles):
            if np.max(np.abs(p)) < 1e-8:
                out.append("0")
            else:
                humps = 1 + int(np.sum(np.diff(np.sign(p[np.abs(p) > 1e-12])) != 0))
                out.append(("e+" if s > 0 else "e-") + (str(humps) if humps > 1 else ""))
        return out


def expected_count(fprime0: float) -> int:
    """``2n + 1`` with ``n = #{k >= 1 : k^2 pi^2 < f'(0)}``."""
    n = 0
    while ((n + 1) * math.pi) ** 2 < fprime0:
        n += 1
    return 2 * n + 1


def default_slope_max(profile: ReactionProfile) -> float:
    return 3.0 * (1.0 + math.sqrt(max(profile.fprime0, 0.0))) * profile.amplitude


def newton_polish(u, profile: ReactionProfile, A: LinearOperator, tol: float = 1e-11,
                  max_iter: int = 30) -> tuple[np.ndarray, float]:
    """Newton on ``A u + sign f(u) - h = 0`` with the tridiagonal Jacobian."""
    u = np.array(u, dtype=float)
    h = profile.forcing(A.dimension)
    s = profile.sign
    res = np.inf
    for _ in range(max_iter):
        G = A.apply(u) + s * profile.f(u) - h
        res = float(np.max(np.abs(G)))
        if res < tol:
            break
        ab = np.zeros((3, A.dimension))
        ab[0, 1:] = A.offdiag
        ab[1] = A.diag + s * profile.derivative(u)
        ab[2, :-1] = A.offdiag
        u = u - solve_banded((1, 1), ab, G)
    return u, res


def find_equilibria(profile: ReactionProfile, slope_max: float | None = None, n_scan: int = 400,
                    tol: float = 1e-8, n_interior: int = 200, n_steps: int = 400,
                    polish: bool = True) -> EquilibriumSet:
    """Scan initial slopes, bisect every sign change of ``u(1)``, map roots to the grid.

    Escapes count as signed infinities during the scan; a bracket whose
    bisection does not reach ``|u(1)| < tol`` (a pole between opposite
    escapes) is flagged and dropped.  Each root is re-shot with a step that
    lands on the interior nodes, then optionally Newton-polished onto the
    discrete equations; the pre-polish residual is kept as a diagnostic.
    """
    if np.ndim(profile.h) != 0:
        raise ValueError("shooting supports constant forcing only")
    S = default_slope_max(profile) if slope_max is None else float(slope_max)
    A = assemble_laplacian(n_interior)
    slopes = np.linspace(-S, S, n_scan + 1)
    vals, _, _ = _shoot_many(profile, slopes, n_steps)
    diagnostics = []
    exact = list(slopes[vals == 0.0])
    lo_i = []
    for i in range(n_scan):
        a, b = vals[i], vals[i + 1]
        if a != 0 and b != 0 and np.sign(a) != np.sign(b):
            lo_i.append(i)
            if i in (0, n_scan - 1):
                diagnostics.append("sign change in the outermost scan cell; slope_max may be too small")
    lo = slopes[lo_i].copy()
    hi = slopes[np.array(lo_i, dtype=int) + 1].copy()
    flo = vals[lo_i].copy()
    for _ in range(200):
        if len(lo) == 0:
            break
        mid = 0.5 * (lo + hi)
        fm, _, _ = _shoot_many(profile, mid, n_steps)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
            break
    mid = 0.5 * (lo + hi) if len(lo) else np.array([])
    fm, _, _ = _shoot_many(profile, mid, n_steps) if len(mid) else (np.array([]), None, None)
    roots, flagged = list(exact), []
    for m, v in zip(mid, fm):
        if np.isfinite(v) and abs(v) < tol:
            roots.append(float(m))
        else:
            flagged.append(float(m))
    if flagged:
        warnings.warn(f"{len(flagged)} bracket(s) did not converge (poles); excluded",
                      RuntimeWarning, stacklevel=2)
    roots.sort()
    stride = 10
    fine = stride * (n_interior + 1)
    profiles, kept, res, raw = [], [], [], []
    if roots:
        _, _, paths = _shoot_many(profile, np.array(roots), fine, keep_path=True)
        for j, r in enumerate(roots):
            u = paths[stride:stride * (n_interior + 1):stride, j]
            raw_r = stationary_residual(u, profile, A)
            if polish:
                u, _ = newton_polish(u, profile, A)
            r_final = stationary_residual(u, profile, A)
            if any(np.max(np.abs(u - p)) <= 10 * tol for p in profiles):
                continue
            profiles.append(u)
            kept.append(float(r))
            res.append(r_final)
            raw.append(raw_r)
    return EquilibriumSet(np.array(profiles).reshape(len(profiles), n_interior), kept, res,
                          A.grid, raw, flagged, diagnostics,
                          {"slope_max": S, "n_scan": n_scan, "n_steps": n_steps, "tol": tol,
                           "n_interior": n_interior, "polish": polish})


def stationary_residual(u, profile: ReactionProfile, A: LinearOperator) -> float:
    """``|A u + sign f(u) - h|_inf``."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != A.dimension:
        raise ValueError(f"profile has {u.shape[-1]} nodes, operator has {A.dimension}")
    G = A.apply(u) + profile.sign * profile.f(u) - profile.forcing(A.dimension)
    return float(np.max(np.abs(G)))


# --------------------------------------------------------------------------
# Energy
# --------------------------------------------------------------------------


def energy(u, profile: ReactionProfile, A: LinearOperator, boundary=(0.0, 0.0)):
    """Discrete energy; ``u`` may be a batch (last axis = nodes).

    ``boundary`` gives the padded end values used in the gradient term
    (homogeneous Dirichlet by default).
    """
    u = np.asarray(u, dtype=float)
    dx = A.dx
    shape = u.shape[:-1] + (1,)
    pad = np.concatenate([np.full(shape, boundary[0]), u, np.full(shape, boundary[1])], axis=-1)
    grad = 0.5 * np.sum(np.diff(pad, axis=-1) ** 2, axis=-1) / dx
    h = profile.forcing(A.dimension)
    pot = dx * np.sum(profile.sign * profile.F(u) - h * u, axis=-1)
    return grad + pot


@dataclass(frozen=True)
class EnergyReport:
    passed: bool
    max_increment: float
    threshold: float
    total_decrease: float
    energies: np.ndarray


def verify_energy_decrease(traj: TrajectorySample, profile: ReactionProfile, A: LinearOperator,
                           slack: float = 1e-6) -> EnergyReport:
    E = energy(traj.states, profile, A)
    inc = float(np.max(np.diff(E), initial=-np.inf))
    thr = slack * (1.0 + abs(float(E[0])))
    return EnergyReport(inc <= thr, inc, thr, float(E[0] - E[-1]), E)


def dissipation_ratio(u0, u1, dt: float, profile: ReactionProfile, A: LinearOperator) -> float:
    """``(E(u1) - E(u0))/dt`` divided by ``-dx |(u1 - u0)/dt|^2``; near 1 for small ``dt``."""
    dE = (energy(u1, profile, A) - energy(u0, profile, A)) / dt
    v = (np.asarray(u1) - np.asarray(u0)) / dt
    return float(dE / (-A.dx * np.sum(v * v)))


# --------------------------------------------------------------------------
# Long-time behaviour
# --------------------------------------------------------------------------


RADIUS_FRACTION = 0.45


def separation_radius(eqs: EquilibriumSet, fraction: float = RADIUS_FRACTION) -> float:
    """``fraction`` of the smallest pairwise sup distance between equilibria."""
    P = eqs.profiles
    if len(P) < 2:
        return 1.0
    d = np.max(np.abs(P[:, None, :] - P[None, :, :]), axis=-1)
    d[np.arange(len(P)), np.arange(len(P))] = np.inf
    return fraction * float(d.min())


def classify_omega(traj: TrajectorySample, eqs: EquilibriumSet, tol: float = 1e-3,
                   settle_time: float | None = None):
    """Index of the equilibrium the run settles at, or None, plus the final distance.

    Settled means the last ``max(10, 0.2 T)`` time units stay within half the
    separation radius of one equilibrium and the final sup distance is below
    ``tol``.
    """
    if eqs.count == 0:
        raise ValueError("no equilibria to classify against")
    r = separation_radius(eqs)
    T = traj.duration
    window = max(10.0, 0.2 * T) if settle_time is None else settle_time
    tail = traj.times >= traj.times[-1] - window - 1e-12
    d = np.max(np.abs(traj.states[tail][:, None, :] - eqs.profiles[None]), axis=-1)
    final = d[-1]
    i = int(np.argmin(final))
    ok = np.all(d[:, i] <= r / 2) and final[i] < tol
    return (i if ok else None), float(final[i])


def random_initial_states(n: int, n_interior: int = 200, seed: int = 0, n_modes: int = 5,
                          max_amplitude: float = 4.0) -> np.ndarray:
    """Random sine-mode combinations with sup norm uniform in ``[0.1, 1] * max_amplitude``."""
    rng = np.random.default_rng(seed)
    x = np.arange(1, n_interior + 1) / (n_interior + 1)
    k = np.arange(1, n_modes + 1)
    modes = np.sin(np.pi * k[:, None] * x[None])
    coef = rng.standard_normal((n, n_modes)) / k
    u = coef @ modes
    u /= np.max(np.abs(u), axis=1, keepdims=True)
    return u * rng.uniform(0.1, 1.0, (n, 1)) * max_amplitude


@dataclass
class ConvergenceStudy:
    classes: list[int | None]
    final_distances: list[float]
    max_increments: np.ndarray
    thresholds: np.ndarray
    initial_energies: np.ndarray
    containment_violations: dict[int, int]
    containment_checks: int
    trajectories: list[TrajectorySample]

    @property
    def unresolved(self) -> list[int]:
        return [i for i, c in enumerate(self.classes) if c is None]

    @property
    def energy_ok(self) -> bool:
        return bool(np.all(self.max_increments <= self.thresholds))


def convergence_study(profile: ReactionProfile, eqs: EquilibriumSet, y0s, T: float = 50.0,
                      dt: float = 1e-3, record_every: int = 100, tol: float = 1e-3,
                      slack: float = 1e-6, regularized: dict | None = None,
                      fmap: ScalarSetMap | None = None,
                      containment_stride: int = 1) -> ConvergenceStudy:
    """Integrate a batch, tracking energy increments and box containment on every step.

    ``regularized`` maps a level ``N`` to a regularized map whose boxes must
    contain the base map's boxes at each visited state.
    """
    n = eqs.profiles.shape[1]
    A = assemble_laplacian(n)
    fmap = fmap or inclusion_map(profile)
    y0s = np.asarray(y0s, dtype=float)
    E0 = energy(y0s, profile, A)
    state = {"E": E0.copy(), "inc": np.full(len(y0s), -np.inf), "checks": 0}
    viol = {N: 0 for N in (regularized or {})}

    def monitor(k, u, z, u_next):
        E1 = energy(u_next, profile, A)
        np.maximum(state["inc"], E1 - state["E"], out=state["inc"])
        state["E"] = E1
        if regularized and k % containment_stride == 0:
            lo, hi = fmap.bounds(u)
            for N, reg in regularized.items():
                rlo, rhi = reg.bounds(u)
                viol[N] += int(np.sum((rlo > lo) | (rhi < hi)))
            state["checks"] += u.size

    trajs = integrate_batch(y0s, T, dt, A, fmap, SelectionPolicy("midpoint"), None,
                            record_every=record_every, monitor=monitor)
    classes, dists = [], []
    for tr in trajs:
        c, d = classify_omega(tr, eqs, tol)
        classes.append(c)
        dists.append(d)
    thr = slack * (1.0 + np.abs(E0))
    return ConvergenceStudy(classes, dists, state["inc"], thr, E0, viol, state["checks"], trajs)
