"""Cell-mapped transition graphs, chain recurrence and (eps, t)-chains.

Cells of a rectangular grid are linked ``a -> b`` when the sampled time-t
image of ``a``, fattened by ``epsilon`` plus the sampling dispersion, meets
``b``.  Cells on directed cycles form the combinatorial chain-recurrent set.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .inclusion import TrajectorySample
from .io import dot_digraph


class PreconditionError(ValueError):
    pass


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class CellComplex:
    bounds: np.ndarray          # shape (dim, 2)
    resolution: tuple[int, ...]

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "resolution", tuple(int(r) for r in self.resolution))
        if b.ndim != 2 or b.shape[1] != 2 or len(self.resolution) != b.shape[0]:
            raise ValueError("bounds must be (dim, 2) with one resolution per axis")
        if np.any(b[:, 0] >= b[:, 1]):
            raise ValueError("each axis needs min < max")
        if any(r < 1 for r in self.resolution):
            raise ValueError("resolution must be positive")

    @classmethod
    def centered(cls, anchor, width: float, lo, hi) -> "CellComplex":
        """Cells of side ``width`` covering ``[lo, hi]`` with ``anchor`` at a cell center."""
        anchor, lo, hi = (np.asarray(v, dtype=float) for v in (anchor, lo, hi))
        below = np.ceil((anchor - lo) / width - 0.5)
        above = np.ceil((hi - anchor) / width - 0.5)
        start = anchor - (below + 0.5) * width
        res = (below + above + 1).astype(int)
        bounds = np.column_stack([start, start + res * width])
        return cls(bounds, tuple(res))

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def widths(self) -> np.ndarray:
        return (self.bounds[:, 1] - self.bounds[:, 0]) / np.asarray(self.resolution)

    @property
    def diameter(self) -> float:
        return float(np.sqrt(np.sum(self.widths ** 2)))

    def multi_index(self, cell):
        return np.stack(np.unravel_index(np.asarray(cell), self.resolution), axis=-1)

    def flat_index(self, multi) -> np.ndarray:
        m = np.asarray(multi)
        return np.ravel_multi_index(tuple(np.moveaxis(m, -1, 0)), self.resolution)

    def centers(self, cells=None) -> np.ndarray:
        cells = np.arange(self.n_cells) if cells is None else np.asarray(cells)
        mi = self.multi_index(cells)
        return self.bounds[:, 0] + (mi + 0.5) * self.widths

    def center(self, cell: int) -> np.ndarray:
        return self.centers([cell])[0]

    def cell_box(self, cell: int) -> tuple[np.ndarray, np.ndarray]:
        mi = self.multi_index(cell)
        lo = self.bounds[:, 0] + mi * self.widths
        return lo, lo + self.widths

    def locate(self, points) -> np.ndarray:
        """Cell id of each point, ``-1`` outside; upper faces belong to the lower cell."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (p - self.bounds[:, 0]) / self.widths
        finite = np.all(np.isfinite(rel), axis=1)
        mi = np.floor(np.where(finite[:, None], rel, -1.0)).astype(np.int64)
        res = np.asarray(self.resolution)
        on_top = (mi == res) & np.isclose(p, self.bounds[:, 1])
        mi[on_top] -= 1
        inside = np.all((mi >= 0) & (mi < res), axis=1) & np.all(np.isfinite(p), axis=1)
        out = np.full(len(p), -1, dtype=np.int64)
        if np.any(inside):
            out[inside] = self.flat_index(mi[inside])
        return out

    def distance_to_cells(self, point, cells) -> np.ndarray:
        """Euclidean distance from ``point`` to each closed cell."""
        cells = np.asarray(cells)
        lo = self.bounds[:, 0] + self.multi_index(cells) * self.widths
        gap = np.maximum(lo - point, 0.0) + np.maximum(point - (lo + self.widths), 0.0)
        return np.sqrt(np.sum(gap * gap, axis=-1))

    def sample(self, cells, k: int, rng: np.random.Generator) -> np.ndarray:
        """Center plus ``k - 1`` uniform interior points for every cell; shape (n, k, dim)."""
        cells = np.asarray(cells)
        c = self.centers(cells)
        pts = np.empty((len(cells), k, self.dim))
        pts[:, 0] = c
        if k > 1:
            off = rng.uniform(-0.5, 0.5, (len(cells), k - 1, self.dim)) * self.widths
            pts[:, 1:] = c[:, None, :] + off
        return pts

    def describe(self) -> dict:
        return {"bounds": self.bounds.tolist(), "resolution": list(self.resolution)}


@dataclass
class TransitionGraph:
    complex: CellComplex | None
    t_flow: float
    epsilon: float
    adjacency: sparse.csr_matrix
    provenance: dict = field(default_factory=dict)
    escapes: np.ndarray | None = None
    dispersion: np.ndarray | None = None
    spread: np.ndarray | None = None
    active: np.ndarray | None = None

    @classmethod
    def from_edges(cls, n: int, edges, t_flow: float = 1.0, epsilon: float = 0.0) -> "TransitionGraph":
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        adj = sparse.csr_matrix((np.ones(len(e), dtype=bool), (e[:, 0], e[:, 1])), shape=(n, n))
        adj.sum_duplicates()
        return cls(None, t_flow, epsilon, adj)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def successors(self, cell: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[cell]:a.indptr[cell + 1]]

    def edges(self) -> np.ndarray:
        coo = self.adjacency.tocoo()
        e = np.column_stack([coo.row, coo.col])
        return e[np.lexsort((e[:, 1], e[:, 0]))]

    def has_edge(self, a: int, b: int) -> bool:
        return bool(b in set(self.successors(a).tolist()))

    def to_json(self) -> dict:
        nodes = np.unique(self.edges().ravel()) if self.adjacency.nnz else np.array([], int)
        cells = []
        for c in nodes.tolist():
            entry = {"id": c}
            if self.complex is not None:
                entry["index"] = self.complex.multi_index(c).tolist()
            cells.append(entry)
        return {"cells": cells, "edges": self.edges().tolist(), "t_flow": self.t_flow,
                "epsilon": self.epsilon, "provenance": self.provenance}

    def to_dot(self) -> str:
        e = self.edges()
        nodes = np.unique(e.ravel()).tolist() if len(e) else []
        labels = None
        if self.complex is not None:
            labels = {c: ",".join(map(str, self.complex.multi_index(c).tolist())) for c in nodes}
        return dot_digraph("transition", nodes, [tuple(x) for x in e.tolist()], labels)


def _ball_edges(cx: CellComplex, src: np.ndarray, pts: np.ndarray, radius: np.ndarray):
    """Pairs (src, cell) for every cell meeting the closed ball around each point."""
    res = np.asarray(cx.resolution)
    w = cx.widths
    reach = np.ceil(np.max(radius) / w).astype(int) if len(radius) else np.zeros(cx.dim, int)
    home = np.floor((pts - cx.bounds[:, 0]) / w).astype(np.int64)
    out_src, out_dst = [], []
    for off in product(*[range(-r, r + 1) for r in reach]):
        mi = home + np.asarray(off)
        ok = np.all((mi >= 0) & (mi < res), axis=1)
        if not np.any(ok):
            continue
        lo = cx.bounds[:, 0] + mi[ok] * w
        p = pts[ok]
        gap = np.maximum(lo - p, 0.0) + np.maximum(p - (lo + w), 0.0)
        hit = np.sqrt(np.sum(gap * gap, axis=1)) <= radius[ok]
        if np.any(hit):
            out_src.append(src[ok][hit])
            out_dst.append(cx.flat_index(mi[ok][hit]))
    if not out_src:
        return np.array([], np.int64), np.array([], np.int64)
    return np.concatenate(out_src), np.concatenate(out_dst)


def build_transition_graph(system, complex: CellComplex, t_flow: float, epsilon: float,
                           n_samples: int = 8, n_selections: int = 1, seed: int = 0,
                           active=None, chunk: int = 20000) -> TransitionGraph:
    """Outer-approximate the time-``t_flow`` map on the cells of ``complex``.

    Each active cell is sampled at its center and ``n_samples - 1`` random
    points.  Its endpoints under ``n_selections`` selections are fattened by
    ``epsilon`` plus the cell's dispersion (largest nearest-neighbour gap
    among its endpoints), and every cell meeting one of those balls becomes
    an out-neighbour.  A cell with any non-finite endpoint escapes and gets
    no out-edges.
    """
    if t_flow <= 0:
        raise ValueError("t_flow must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    cx = complex
    n = cx.n_cells
    act = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    cells = np.flatnonzero(act)
    rng = np.random.default_rng(seed)
    pts = cx.sample(cells, n_samples, rng)
    flat = pts.reshape(-1, cx.dim)
    ends = np.empty((n_selections, len(flat), cx.dim))
    for s in range(0, len(flat), chunk):
        ends[:, s:s + chunk] = system.endpoints(flat[s:s + chunk], t_flow, n_selections, seed)
    E = ends.reshape(n_selections, len(cells), n_samples, cx.dim).transpose(1, 0, 2, 3)
    E = E.reshape(len(cells), n_selections * n_samples, cx.dim)
    escaped = ~np.all(np.isfinite(E), axis=(1, 2))
    m = E.shape[1]
    if m > 1:
        d = np.linalg.norm(E[:, :, None, :] - E[:, None, :, :], axis=-1)
        d[:, np.arange(m), np.arange(m)] = np.inf
        disp = np.max(np.min(d, axis=2), axis=1)
    else:
        disp = np.zeros(len(cells))
    ends_cs = ends.reshape(n_selections, len(cells), n_samples, cx.dim)
    spread = np.max(np.linalg.norm(ends_cs - ends_cs[:, :, :1, :], axis=-1), axis=(0, 2))
    disp = np.where(escaped, np.nan, disp)
    spread = np.where(escaped, np.nan, spread)
    keep = ~escaped
    src = np.repeat(cells[keep], m)
    P = E[keep].reshape(-1, cx.dim)
    rad = np.repeat(epsilon + disp[keep], m)
    left = cx.locate(P) < 0
    exits = np.unique(src[left])
    a, b = _ball_edges(cx, src, P, rad)
    adj = sparse.csr_matrix((np.ones(len(a), dtype=bool), (a, b)), shape=(n, n))
    adj.sum_duplicates()
    full_disp = np.full(n, np.nan)
    full_disp[cells] = disp
    full_spread = np.full(n, np.nan)
    full_spread[cells] = spread
    esc = np.zeros(n, dtype=bool)
    esc[cells[escaped]] = True
    prov = {"n_samples": n_samples, "n_selections": n_selections, "seed": int(seed),
            "system": system.describe(), "complex": cx.describe(),
            "n_active": int(len(cells)), "escaping_cells": np.flatnonzero(esc).tolist(),
            "cells_with_exits": exits.tolist()}
    return TransitionGraph(cx, float(t_flow), float(epsilon), adj, prov, esc, full_disp,
                           full_spread, act)


def chain_recurrent_cells(graph) -> set[int]:
    """Cells on a directed cycle: nontrivial strong components plus self-loops."""
    adj = graph.adjacency if isinstance(graph, TransitionGraph) else sparse.csr_matrix(graph)
    n = adj.shape[0]
    if n == 0:
        return set()
    _, labels = connected_components(adj, directed=True, connection="strong")
    sizes = np.bincount(labels)
    rec = sizes[labels] > 1
    rec |= np.asarray(adj.diagonal(), dtype=bool)
    return set(np.flatnonzero(rec).tolist())


@dataclass
class EpsChain:
    points: np.ndarray
    times: np.ndarray
    epsilon: float
    cells: list[int] | None = None
    note: str = ""

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if len(self.points) != len(self.times) + 1:
            raise ValueError("a chain needs one more point than times")
        if len(self.times) < 1:
            raise ValueError("a chain has at least one link")

    def to_json(self, residuals=None) -> dict:
        d = {"points": self.points.tolist(), "times": self.times.tolist(),
             "epsilon": self.epsilon, "note": self.note}
        if self.cells is not None:
            d["cells"] = list(map(int, self.cells))
        if residuals is not None:
            d["residuals"] = list(residuals)
        return d


def _bfs_path(graph: TransitionGraph, a: int, b: int, allowed=None) -> list[int] | None:
    """Shortest path of at least one edge from ``a`` to ``b``."""
    parent = {}
    q = deque()
    for s in graph.successors(a).tolist():
        if allowed is not None and not allowed[s]:
            continue
        if s not in parent:
            parent[s] = a
            q.append(s)
    while q:
        v = q.popleft()
        if v == b:
            path = [b]
            cur = b
            while True:
                cur = parent[cur]
                path.append(cur)
                if cur == a:
                    return path[::-1]
        for s in graph.successors(v).tolist():
            if allowed is not None and not allowed[s]:
                continue
            if s not in parent:
                parent[s] = v
                q.append(s)
    return None


def link_bound(graph: TransitionGraph, cell: int) -> float:
    """Worst-case distance from the next cell's center to the image of ``cell``'s center."""
    cx = graph.complex
    return graph.epsilon + 0.5 * cx.diameter + float(graph.dispersion[cell]) + float(graph.spread[cell])


def cells_to_chain(graph: TransitionGraph, path: list[int]) -> EpsChain:
    cx = graph.complex
    bound = max(link_bound(graph, c) for c in path[:-1])
    eps = max(graph.epsilon + cx.diameter, bound)
    eps = eps * (1 + 1e-9) + 1e-12
    return EpsChain(cx.centers(path), np.full(len(path) - 1, graph.t_flow), eps, list(path),
                    note="cell centers substituted for points; epsilon includes the "
                         "center-substitution and sampling-dispersion allowance")


def find_eps_chain(graph: TransitionGraph, from_cell: int, to_cell: int,
                   via=(), allowed=None) -> EpsChain | None:
    """Breadth-first cell path turned into a chain of cell centers.

    ``via`` lists cells to pass through in order.  Returns None when no path
    exists.  A cell with a self-loop yields the one-link chain ``{y, y}``.
    """
    stops = [from_cell, *via, to_cell]
    path = [from_cell]
    for a, b in zip(stops[:-1], stops[1:]):
        if a == b and graph.has_edge(a, a):
            seg = [a, a]
        else:
            seg = _bfs_path(graph, a, b, allowed)
        if seg is None:
            return None
        path.extend(seg[1:])
    return cells_to_chain(graph, path)


@dataclass(frozen=True)
class ChainReport:
    passed: bool
    residuals: list[float]
    failed_links: list[int]
    epsilon: float


def verify_chain(chain: EpsChain, system, n_selections: int = 1, seed: int = 0) -> ChainReport:
    """Re-integrate every link; residual = closest selection endpoint to the next point."""
    res = np.empty(len(chain.times))
    for t in np.unique(chain.times):
        idx = np.flatnonzero(chain.times == t)
        ends = system.endpoints(chain.points[idx], float(t), n_selections, seed)
        d = np.linalg.norm(ends - chain.points[idx + 1][None], axis=-1)
        d = np.where(np.isfinite(d), d, np.inf)
        res[idx] = np.min(d, axis=0)
    failed = np.flatnonzero(~(res < chain.epsilon)).tolist()
    return ChainReport(not failed, res.tolist(), failed, chain.epsilon)


def equilibrium_chain(x, t_x: float, t_min: float, system, epsilon: float = 1e-3,
                      tol: float | None = None, n_selections: int = 1, seed: int = 0) -> EpsChain:
    """The two-point chain ``{x, x}`` with time ``n t_x``, ``n = ceil(t_min/t_x) + 1``."""
    if t_x <= 0 or t_min <= 0:
        raise ValueError("t_x and t_min must be positive")
    x = np.asarray(x, dtype=float)
    tol = epsilon if tol is None else tol
    end = system.endpoints(x[None], t_x, n_selections, seed)[:, 0]
    drift = float(np.min(np.linalg.norm(end - x, axis=-1)))
    if not drift <= tol:
        raise PreconditionError(f"point is not near-fixed: drift {drift:.3g} after t={t_x} "
                                f"exceeds {tol:.3g}")
    n = math.ceil(t_min / t_x) + 1
    return EpsChain(np.stack([x, x]), [n * t_x], epsilon, note=f"fixed point, {n} x t_x")


@dataclass
class PseudoTrajectory:
    segments: list[tuple[float, TrajectorySample]]
    jump_sizes: list[float]
    level_max_jumps: list[float]
    level_of_jump: list[int]

    @property
    def end_time(self) -> float:
        s, tr = self.segments[-1]
        return s + tr.duration

    def jump_times(self) -> list[float]:
        return [s + tr.duration for s, tr in self.segments[:-1]]


def assemble_pseudo_trajectory(system, chain_family: list[EpsChain], n_selections: int = 1,
                               seed: int = 0, record_every: int = 1,
                               share_tol: float = 1e-9) -> PseudoTrajectory:
    """Concatenate true solution segments from every chain point.

    On each link the selection whose endpoint lands closest to the next
    chain point is kept; the remaining gap is the recorded jump.
    """
    if not chain_family:
        raise ValueError("empty chain family")
    for c1, c2 in zip(chain_family[:-1], chain_family[1:]):
        if np.linalg.norm(c1.points[-1] - c2.points[0]) > share_tol:
            raise PreconditionError("consecutive chains must share endpoints")
    segments, jumps, levels, level_max = [], [], [], []
    t0 = 0.0
    for lev, chain in enumerate(chain_family):
        worst = 0.0
        for i, t in enumerate(chain.times):
            best = None
            for s in range(n_selections):
                tr = system.trajectories(chain.points[i][None], float(t), record_every, s, seed)[0]
                if not np.all(np.isfinite(tr.states)):
                    continue
                gap = float(np.linalg.norm(chain.points[i + 1] - tr.final))
                if best is None or gap < best[0]:
                    best = (gap, tr)
            if best is None:
                raise AssemblyError(f"every selection escaped on link {i} of chain {lev}")
            gap, tr = best
            segments.append((t0, tr))
            t0 += tr.duration
            jumps.append(gap)
            levels.append(lev)
            worst = max(worst, gap)
        level_max.append(worst)
    return PseudoTrajectory(segments, jumps, level_max, levels)


@dataclass(frozen=True)
class Bridge:
    path: TrajectorySample
    xi: np.ndarray
    inflation: float


def bridge_segment(phi: TrajectorySample, b, c_N: float = 0.0, A_norm: float = 0.0) -> Bridge:
    """Tilt ``phi`` linearly so it ends at ``b``: ``phi(t) + xi (t - t0)/tbar``.

    The tilted path solves the inclusion with values inflated by
    ``(c_N + |A| + max(1, 1/tbar)) |xi|``.
    """
    tbar = phi.duration
    if tbar <= 0:
        raise ValueError("segment must have positive duration")
    xi = np.asarray(b, dtype=float) - phi.states[-1]
    s = (phi.times - phi.times[0]) / tbar
    path = TrajectorySample(phi.times.copy(), phi.states + s[:, None] * xi, phi.selections.copy(),
                            phi.step, meta={**phi.meta, "bridged": True})
    r = (c_N + A_norm + max(1.0, 1.0 / tbar)) * float(np.linalg.norm(xi))
    return Bridge(path, xi, r)


def bridge_residuals(bridge: Bridge, A, fmap, h=None) -> np.ndarray:
    """Per-step distance of the tilted path's implied forcing from the map's box.

    The implied forcing is ``(y_{k+1} - y_k)/dt + A y_{k+1} - h``, the
    selection that would make the semi-implicit step exact.
    """
    y = bridge.path.states
    dt = np.diff(bridge.path.times)[:, None]
    z = (y[1:] - y[:-1]) / dt + A.apply(y[1:])
    if h is not None:
        z = z - h
    lo, hi = fmap.bounds(y[:-1])
    gap = np.maximum(lo - z, 0.0) + np.maximum(z - hi, 0.0)
    return np.linalg.norm(gap, axis=1)
