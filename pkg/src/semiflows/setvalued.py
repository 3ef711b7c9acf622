"""Interval-valued scalar nonlinearities and their Lipschitz regularization.

A set-valued map ``f(u) = [lower(u), upper(u)]`` is approximated from outside
by a sequence of globally Lipschitz envelopes.  The upper branch is smoothed
with the sup-convolution

    f_N(x) = sup_y ( upper(y) - N/2 |y - x|^2 )

and then truncated outside ``[-N, N]`` by linear bridges and the caps
``D(1 + |x|)``.  The lower branch is handled by symmetry.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ScalarFn = Callable[[np.ndarray], np.ndarray]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DomainError(ValueError):
    pass


class WindowError(RuntimeError):
    """The supremum was attained at the edge of the search window."""


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Box:
    """Product of closed intervals ``[lo_i, hi_i]``."""

    lo: np.ndarray
    hi: np.ndarray

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def inflate(self, radius: float) -> "Box":
        return Box(self.lo - radius, self.hi + radius)

    def contains(self, points, tol: float = 0.0) -> bool:
        p = np.asarray(points, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def distance(self, points) -> np.ndarray:
        """Euclidean distance from ``points`` to the box along the last axis."""
        p = np.asarray(points, dtype=float)
        gap = np.maximum(self.lo - p, 0.0) + np.maximum(p - self.hi, 0.0)
        return np.sqrt(np.sum(gap * gap, axis=-1))


@dataclass(frozen=True)
class ScalarSetMap:
    """Scalar map with closed interval values ``[lower(u), upper(u)]``.

    ``lower`` must be lower semicontinuous and ``upper`` upper
    semicontinuous; both act elementwise on numpy arrays.  The growth
    constants bound ``|value| <= growth_C1 + growth_C2 |u|``.
    """

    lower: ScalarFn
    upper: ScalarFn
    growth_C1: float
    growth_C2: float
    name: str = "custom"
    jump_points: tuple[float, ...] = ()
    kinks: tuple[float, ...] = ()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Jumps and kinks; envelope searches add these to their candidate grids."""
        return tuple(sorted(set(self.jump_points) | set(self.kinks)))

    def bounds(self, u) -> tuple[np.ndarray, np.ndarray]:
        u = np.asarray(u, dtype=float)
        lo = np.asarray(self.lower(u), dtype=float)
        if self.upper is self.lower:
            return lo, lo
        return lo, np.asarray(self.upper(u), dtype=float)


def check_map(m: ScalarSetMap, grid=None, tol: float = 1e-9) -> list[str]:
    """Spot-check the invariants of ``m``; returns a list of violations.

    Semicontinuity is only probed at ``m.jump_points`` with one-sided offsets
    of 1e-3 and 1e-6, which cannot prove anything about the map in general.
    """
    if grid is None:
        grid = np.linspace(-10.0, 10.0, 20001)
    u = np.asarray(grid, dtype=float)
    lo, hi = m.bounds(u)
    problems = []
    if np.any(lo > hi + tol):
        problems.append("lower > upper at %d grid points" % int(np.sum(lo > hi + tol)))
    bound = m.growth_C1 + m.growth_C2 * np.abs(u) + tol
    if np.any(np.abs(lo) > bound) or np.any(np.abs(hi) > bound):
        problems.append("growth bound C1 + C2|u| violated")
    for p in m.jump_points:
        for off in (1e-3, 1e-6):
            side = np.array([p - off, p + off])
            lo_p, hi_p = m.bounds(np.array([p]))
            lo_s, hi_s = m.bounds(side)
            if np.any(lo_p[0] > lo_s + tol):
                problems.append(f"lower not lsc at {p}")
            if np.any(hi_p[0] < hi_s - tol):
                problems.append(f"upper not usc at {p}")
    return sorted(set(problems))


def eval_interval(m, u: float) -> tuple[float, float]:
    if not np.isfinite(u):
        raise DomainError(f"cannot evaluate set-valued map at {u!r}")
    lo, hi = m.bounds(np.array([float(u)]))
    return float(lo[0]), float(hi[0])


def nemitski_apply(m, state) -> Box:
    """Pointwise lifting of ``m`` to a state vector: a box of intervals."""
    s = np.asarray(state, dtype=float)
    lo, hi = m.bounds(s)
    return Box(lo, hi)


# --------------------------------------------------------------------------
# Moreau-Yosida sup/inf convolutions
# --------------------------------------------------------------------------


def growth_search_radius(C1: float, C2: float, N: float, x: float) -> float:
    """Radius around ``x`` containing every maximizer of ``f(y) - N/2|y-x|^2``.

    From ``N/2 d^2 <= f(y) - f(x) <= 2 C1 + 2 C2 |x| + C2 d``.
    """
    disc = C2 * C2 + 4.0 * N * (C1 + C2 * abs(x))
    return (C2 + math.sqrt(disc)) / N


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    # multiples of step, so that 0 and other round jump points are sampled exactly
    k0 = math.floor(lo / step)
    k1 = math.ceil(hi / step)
    return np.arange(k0, k1 + 1, dtype=float) * step


def moreau_yosida_upper(fbar: ScalarFn, N: float, x: float, search_radius: float,
                        step: float = 1e-4) -> float:
    """``sup_y fbar(y) - N/2 |y - x|^2`` over a dense window around ``x``.

    The grid maximum is refined by one golden-section pass over the two
    neighbouring grid cells.
    """
    if not np.isfinite(x):
        raise DomainError(f"non-finite point {x!r}")
    y = _grid(x - search_radius, x + search_radius, step)
    vals = np.asarray(fbar(y), dtype=float) - 0.5 * N * (y - x) ** 2
    j = int(np.argmax(vals))
    best = float(vals[j])
    at_x = float(np.asarray(fbar(np.array([x])), dtype=float)[0])
    if at_x >= best:
        return at_x
    if j == 0 or j == len(y) - 1:
        raise WindowError(
            f"supremum at window edge y={y[j]:.6g} (x={x:.6g}, radius={search_radius:.6g})")

    def obj(t):
        return float(np.asarray(fbar(np.array([t])), dtype=float)[0]) - 0.5 * N * (t - x) ** 2

    a, b = y[j] - step, y[j] + step
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(40):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = obj(d)
    return max(best, fc, fd)


def moreau_yosida_lower(flow: ScalarFn, N: float, x: float, search_radius: float,
                        step: float = 1e-4) -> float:
    """``inf_y flow(y) + N/2 |y - x|^2`` via the upper transform of ``-flow``."""
    return -moreau_yosida_upper(lambda y: -np.asarray(flow(y), dtype=float), N, x,
                                search_radius, step)


def _parabola_envelope(y: np.ndarray, fy: np.ndarray, a: float):
    """Upper envelope of the parabolas ``fy[j] - a (x - y[j])^2``.

    Linear-time sweep over sorted ``y``; returns the active parabola indices
    and the breakpoints between consecutive ones.
    """
    n = len(y)
    c = (a * y * y - fy).tolist()
    yl = y.tolist()
    v = [0] * n
    z = [0.0] * (n + 1)
    z[0], z[1] = -math.inf, math.inf
    k = 0
    two_a = 2.0 * a
    for q in range(1, n):
        cq, yq = c[q], yl[q]
        while True:
            p = v[k]
            s = (cq - c[p]) / (two_a * (yq - yl[p]))
            if s <= z[k] and k > 0:
                k -= 1
                continue
            break
        if s <= z[k]:
            v[0] = q
            z[1] = math.inf
            continue
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = math.inf
    return np.asarray(v[: k + 1]), np.asarray(z[1: k + 1])


def moreau_yosida_envelope(fbar: ScalarFn, N: float, xs, search_radius: float,
                           step: float = 1e-4, extra=()) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized sup-convolution at many points.

    Returns ``(values, maximizers)``.  Candidates are the multiples of
    ``step`` within ``search_radius`` of the evaluation range, the ``extra``
    points in that range (pass known kinks here, a maximizer sitting on a
    kink is otherwise missed by up to slope times ``step``), and each
    evaluation point itself.
    """
    xs = np.asarray(xs, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise DomainError("non-finite evaluation point")
    y = _grid(xs.min() - search_radius, xs.max() + search_radius, step)
    extra = np.asarray(extra, dtype=float)
    extra = extra[(extra > y[0]) & (extra < y[-1])]
    if extra.size:
        y = np.unique(np.concatenate([y, extra]))
    fy = np.asarray(fbar(y), dtype=float)
    v, z = _parabola_envelope(y, fy, 0.5 * N)
    j = v[np.searchsorted(z, xs, side="right")]
    vals = fy[j] - 0.5 * N * (y[j] - xs) ** 2
    argmax = y[j].copy()
    f_x = np.asarray(fbar(xs), dtype=float)
    own = f_x >= vals
    vals = np.where(own, f_x, vals)
    argmax = np.where(own, xs, argmax)
    edge = (~own) & ((j == 0) | (j == len(y) - 1))
    if np.any(edge):
        raise WindowError(f"supremum at window edge for {int(edge.sum())} points")
    far = np.abs(argmax - xs) > search_radius
    if np.any(far):
        raise WindowError("maximizer outside the search radius")
    return vals, argmax


def moreau_yosida_lower_envelope(flow: ScalarFn, N: float, xs, search_radius: float,
                                 step: float = 1e-4, extra=()) -> tuple[np.ndarray, np.ndarray]:
    vals, arg = moreau_yosida_envelope(lambda y: -np.asarray(flow(y), dtype=float), N, xs,
                                       search_radius, step, extra)
    return -vals, arg


# --------------------------------------------------------------------------
# Global Lipschitz truncation
# --------------------------------------------------------------------------


def lipschitz_scan(fn: ScalarFn, lo: float, hi: float, n_pairs: int = 10_000,
                   grid_step: float = 1e-3, seed: int = 0) -> float:
    """Largest observed difference quotient of ``fn`` on ``[lo, hi]``.

    Random pairs plus adjacent pairs of a uniform grid; no safety factor.
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(lo, hi, n_pairs)
    b = rng.uniform(lo, hi, n_pairs)
    keep = np.abs(a - b) > 1e-12
    a, b = a[keep], b[keep]
    slope = np.max(np.abs(fn(a) - fn(b)) / np.abs(a - b), initial=0.0)
    g = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    fg = np.asarray(fn(g), dtype=float)
    slope = max(slope, float(np.max(np.abs(np.diff(fg)) / np.diff(g), initial=0.0)))
    return float(slope)


@dataclass(frozen=True)
class TruncatedEnvelope:
    """Five-piece globally Lipschitz extension of a core function.

    ``flip=False`` gives the upper construction (caps ``D(1+|x|)``);
    ``flip=True`` mirrors it for lower envelopes (caps ``-D(1+|x|)``).
    """

    core: ScalarFn
    N: int
    D: float
    K_plus: float
    K_minus: float
    x_plus: float
    x_minus: float
    core_at_plus: float
    core_at_minus: float
    flip: bool = False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        N, D = self.N, self.D
        if x.size and np.max(np.abs(x)) <= N:
            return np.asarray(self.core(x), dtype=float)
        s = -1.0 if self.flip else 1.0
        inner = np.clip(x, -N, N)
        out = s * np.asarray(self.core(inner), dtype=float)
        out = np.where((x > N) & (x <= self.x_plus), self.core_at_plus + self.K_plus * (x - N), out)
        out = np.where(x > self.x_plus, D * (1.0 + x), out)
        out = np.where((x < -N) & (x >= self.x_minus),
                       self.core_at_minus - self.K_minus * (x + N), out)
        out = np.where(x < self.x_minus, D * (1.0 - x), out)
        return s * out


def _bridge(value_at_N: float, K: float, N: int, D: float, max_doublings: int = 64):
    """Slope and landing point of the bridge from ``value_at_N`` to the cap."""
    cap = D * (1.0 + N)
    if value_at_N > cap + 1e-12 * max(1.0, abs(cap)):
        raise ConstructionError(
            f"core value {value_at_N:.6g} exceeds the cap D(1+N)={cap:.6g}; D is too small")
    K = max(K, 1e-12)
    for _ in range(max_doublings):
        if K > D:
            gap = (cap - value_at_N) / (K - D)
            if gap <= 1.0:
                return K, N + max(gap, 0.0)
        K *= 2.0
    raise ConstructionError("no bridge slope lands the intersection inside [N, N+1]")


def truncate_to_global_lipschitz(fN: ScalarFn, N: int, D: float, *, lower: bool = False,
                                 scan_step: float = 1e-3, safety: float = 1.5,
                                 seed: int = 0) -> TruncatedEnvelope:
    """Keep ``fN`` on ``[-N, N]`` and extend it with linear bridges and caps.

    The bridge slopes start at the Lipschitz constant of ``fN`` on
    ``[-N-1, N+1]`` (scanned, times ``safety``) and double until the
    bridge meets the cap within one unit of ``+-N``.  With ``lower=True``
    the construction is mirrored so that the result lies below ``fN``.
    """
    if N < 1:
        raise ValueError("regularization level N must be >= 1")
    if D <= 0:
        raise ValueError("growth constant D must be positive")
    s = -1.0 if lower else 1.0
    core = fN

    def up(x):
        return s * np.asarray(core(x), dtype=float)

    D_next = safety * lipschitz_scan(up, -N - 1.0, N + 1.0, grid_step=scan_step, seed=seed)
    at_plus = float(up(np.array([float(N)]))[0])
    at_minus = float(up(np.array([-float(N)]))[0])
    K_plus, x_plus = _bridge(at_plus, D_next, N, D)
    K_minus, gap = _bridge(at_minus, D_next, N, D)
    return TruncatedEnvelope(core=core, N=N, D=D, K_plus=K_plus, K_minus=K_minus,
                             x_plus=x_plus, x_minus=-gap, core_at_plus=at_plus,
                             core_at_minus=at_minus, flip=lower)


# --------------------------------------------------------------------------
# Regularized maps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TabulatedFunction:
    """Piecewise-linear interpolant on a uniform grid plus a constant shift."""

    x0: float
    step: float
    values: np.ndarray
    shift: float = 0.0

    def __call__(self, x):
        # uniform grid: locate the cell arithmetically, constant beyond the ends
        v = self.values
        r = np.clip((np.asarray(x, dtype=float) - self.x0) * (1.0 / self.step), 0.0, len(v) - 1.0)
        i = np.minimum(r.astype(np.intp), len(v) - 2)
        r -= i
        r *= self._slopes[i]
        r += self._offsets[i]
        return r

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "_slopes", np.append(np.diff(v), 0.0))
        object.__setattr__(self, "_offsets", v + self.shift)


@dataclass(frozen=True)
class RegularizedMap:
    """Level-``N`` Lipschitz outer envelope ``[lower_env, upper_env]``."""

    N: int
    upper_env: ScalarFn
    lower_env: ScalarFn
    lipschitz_cN: float
    growth_D: float
    base: ScalarSetMap | None = None
    inflation: float = 0.0
    details: dict = field(default_factory=dict, compare=False)

    def bounds(self, u) -> tuple[np.ndarray, np.ndarray]:
        u = np.asarray(u, dtype=float)
        lo = np.asarray(self.lower_env(u), dtype=float) - self.inflation
        hi = np.asarray(self.upper_env(u), dtype=float) + self.inflation
        return lo, hi


def growth_constant_D(m: ScalarSetMap) -> float:
    """Constant ``D`` with ``|f_N(x)|, |g_N(x)| <= D(1 + |x|)`` for every N.

    Uses ``f_N(x) <= C1 + C2|x| + sup_d (C2 d - d^2/2)``.
    """
    C1, C2 = m.growth_C1, m.growth_C2
    return max(C1 + 0.5 * C2 * C2, C2, 1e-12)


def regularize(m: ScalarSetMap, N: int, *, table_step: float = 1e-3,
               search_step: float = 1e-4, seed: int = 0) -> RegularizedMap:
    """Build ``F_N``: sup/inf-convolved branches, tabulated on ``[-N-1, N+1]``
    and truncated to global Lipschitz functions.

    The tables are lifted by ``N (table_step^2/8 + search_step^2)`` so that
    linear interpolation between nodes never undercuts the convolution
    (which is semiconvex with constant ``N``).
    """
    if N < 1:
        raise ValueError("regularization level N must be >= 1")
    D = growth_constant_D(m)
    n_nodes = int(round(2.0 * (N + 1) / table_step))
    xs = -(N + 1.0) + table_step * np.arange(n_nodes + 1)
    R = growth_search_radius(m.growth_C1, m.growth_C2, N, N + 1.0) * 1.05 + 2 * search_step
    up_vals, _ = moreau_yosida_envelope(m.upper, N, xs, R, search_step, m.breakpoints)
    lo_vals, _ = moreau_yosida_lower_envelope(m.lower, N, xs, R, search_step, m.breakpoints)
    margin = N * (table_step ** 2 / 8.0 + search_step ** 2)
    up_tab = TabulatedFunction(float(xs[0]), table_step, up_vals, margin)
    lo_tab = TabulatedFunction(float(xs[0]), table_step, lo_vals, -margin)
    upper_env = truncate_to_global_lipschitz(up_tab, N, D, scan_step=table_step, seed=seed)
    lower_env = truncate_to_global_lipschitz(lo_tab, N, D, lower=True, scan_step=table_step,
                                             seed=seed)
    reach = max(upper_env.x_plus, -upper_env.x_minus, lower_env.x_plus, -lower_env.x_minus) + 1.0
    c_N = 1.5 * max(lipschitz_scan(upper_env, -reach, reach, grid_step=table_step, seed=seed),
                    lipschitz_scan(lower_env, -reach, reach, grid_step=table_step, seed=seed + 1))
    details = {
        "K_plus": (upper_env.K_plus, lower_env.K_plus),
        "K_minus": (upper_env.K_minus, lower_env.K_minus),
        "x_plus": (upper_env.x_plus, lower_env.x_plus),
        "x_minus": (upper_env.x_minus, lower_env.x_minus),
        "table_margin": margin,
    }
    return RegularizedMap(N=N, upper_env=upper_env, lower_env=lower_env, lipschitz_cN=c_N,
                          growth_D=D, base=m, details=details)


def inflate(reg: RegularizedMap, radius: float) -> RegularizedMap:
    """Closed ``radius``-neighbourhood of every value; Lipschitz constant unchanged."""
    if radius < 0:
        raise ValueError("inflation radius must be nonnegative")
    return replace(reg, inflation=reg.inflation + radius)


# --------------------------------------------------------------------------
# Built-in maps
# --------------------------------------------------------------------------


def heaviside() -> ScalarSetMap:
    """``f(0) = [0, 1]``, 0 to the left, 1 to the right."""
    return ScalarSetMap(
        lower=lambda u: (np.asarray(u) > 0).astype(float),
        upper=lambda u: (np.asarray(u) >= 0).astype(float),
        growth_C1=1.0, growth_C2=0.0, name="heaviside", jump_points=(0.0,))


def cubic(lam: float, clip: float | None = None) -> ScalarSetMap:
    """Single-valued ``lam*u - u^3``, frozen at its values at ``+-clip``.

    Freezing outside ``[-clip, clip]`` (default ``2 max(1, sqrt|lam|)``) gives
    the bounded growth the regularization needs; solutions of the
    Chafee-Infante problem started inside that range never leave it.
    """
    U = float(clip) if clip is not None else 2.0 * max(1.0, math.sqrt(abs(lam)))

    def f(u):
        c = np.clip(np.asarray(u, dtype=float), -U, U)
        return c * (lam - c * c)

    C1 = abs(lam * U - U ** 3)
    if lam > 0 and math.sqrt(lam / 3.0) <= U:
        C1 = max(C1, 2.0 * (lam / 3.0) ** 1.5)
    name = f"cubic:lambda={lam!r}" + (f",clip={clip!r}" if clip is not None else "")
    return ScalarSetMap(lower=f, upper=f, growth_C1=C1, growth_C2=0.0, name=name, kinks=(-U, U))


def interval_band(w: float) -> ScalarSetMap:
    if w < 0:
        raise ValueError("band half-width must be nonnegative")
    return ScalarSetMap(lower=lambda u: np.asarray(u, dtype=float) - w,
                        upper=lambda u: np.asarray(u, dtype=float) + w,
                        growth_C1=w, growth_C2=1.0, name=f"interval_band:w={w!r}")


def zero_map() -> ScalarSetMap:
    return ScalarSetMap(lower=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                        upper=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                        growth_C1=0.0, growth_C2=0.0, name="zero")


def single_valued(f: ScalarFn, C1: float, C2: float, name: str = "custom") -> ScalarSetMap:
    return ScalarSetMap(lower=f, upper=f, growth_C1=C1, growth_C2=C2, name=name)


def table_map(u: Sequence[float], lower: Sequence[float], upper: Sequence[float],
              name: str = "custom") -> ScalarSetMap:
    """Linear interpolation of tabulated bounds, constant beyond the table."""
    u = np.asarray(u, dtype=float)
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    order = np.argsort(u)
    u, lo, hi = u[order], lo[order], hi[order]
    if np.any(np.diff(u) <= 0):
        raise ValueError("table abscissae must be distinct")
    if np.any(lo > hi):
        raise ValueError("table has lower > upper")
    C1 = float(max(np.abs(lo).max(), np.abs(hi).max()))
    return ScalarSetMap(lower=lambda x: np.interp(x, u, lo), upper=lambda x: np.interp(x, u, hi),
                        growth_C1=C1, growth_C2=0.0, name=name, kinks=tuple(u.tolist()))


def _params(text: str) -> dict[str, float]:
    out = {}
    for part in filter(None, text.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {part!r}")
        out[key.strip()] = float(val)
    return out


def parse_map(spec: str, base_dir: str | Path | None = None) -> ScalarSetMap:
    """Build a map from its string id.

    ``cubic:lambda=<v>[,clip=<U>]``, ``heaviside``, ``interval_band:w=<v>``,
    ``zero`` or ``custom:<csv file with columns u,lower,upper>``.
    """
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    if kind == "heaviside":
        return heaviside()
    if kind == "zero":
        return zero_map()
    if kind == "cubic":
        p = _params(rest)
        if "lambda" not in p:
            raise ValueError("cubic map needs lambda=<value>")
        m = cubic(p["lambda"], p.get("clip"))
        return replace(m, name=spec)
    if kind == "interval_band":
        p = _params(rest)
        if "w" not in p:
            raise ValueError("interval_band map needs w=<value>")
        return replace(interval_band(p["w"]), name=spec)
    if kind == "custom":
        path = Path(rest)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or not {"u", "lower", "upper"} <= set(rows[0]):
            raise ValueError(f"{path}: expected CSV header u,lower,upper")
        return table_map([float(r["u"]) for r in rows], [float(r["lower"]) for r in rows],
                         [float(r["upper"]) for r in rows], name=spec)
    raise ValueError(f"unknown map id {spec!r}")
