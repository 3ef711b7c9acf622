"""Limit-set estimates, connection probing between isolated sets, cycle search."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .graph import CellComplex, TransitionGraph, _bfs_path, build_transition_graph, chain_recurrent_cells
from .inclusion import DuffingState, TrajectorySample, duffing_integrate
from .io import dot_digraph


def _norm(d: np.ndarray, kind: str) -> np.ndarray:
    return np.max(np.abs(d), axis=-1) if kind == "max" else np.linalg.norm(d, axis=-1)


def _p(kind: str) -> float:
    return np.inf if kind == "max" else 2.0


@dataclass
class OmegaEstimate:
    points: np.ndarray
    transient_cut: float
    dist_history: np.ndarray   # columns: t, distance to the estimate
    tol: float
    monotone_after_cut: bool = True

    def distance(self, states, norm: str = "l2") -> np.ndarray:
        tree = cKDTree(self.points)
        return tree.query(np.atleast_2d(states), p=_p(norm))[0]


def tol_net(states: np.ndarray, tol: float, norm: str = "l2") -> np.ndarray:
    """Greedy net: walk the states in order, keep those farther than ``tol`` from all kept."""
    states = np.atleast_2d(states)
    net = [states[0]]
    arr = states[:1]
    for s in states[1:]:
        if np.min(_norm(arr - s, norm)) > tol:
            net.append(s)
            arr = np.asarray(net)
    return np.asarray(net)


def _estimate(times, states, tail_mask, cut: float, tol: float, norm: str) -> OmegaEstimate:
    tail = states[tail_mask]
    if len(tail) == 0:
        raise ValueError("empty tail: increase the trajectory length or tail_fraction")
    net = tol_net(tail, tol, norm)
    d = cKDTree(net).query(states, p=_p(norm))[0]
    hist = np.column_stack([times, d])
    after = d[tail_mask]
    # nonincreasing within 10 tol: no later distance exceeds an earlier one by more than the slack
    ok = bool(np.all(after <= np.minimum.accumulate(after) + 10 * tol)) if len(after) else True
    return OmegaEstimate(net, float(cut), hist, tol, ok)


def estimate_omega(traj: TrajectorySample, tail_fraction: float = 0.5, tol: float = 1e-3,
                   norm: str = "l2") -> OmegaEstimate:
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    t = traj.times
    cut = t[-1] - tail_fraction * (t[-1] - t[0])
    return _estimate(t, traj.states, t >= cut - 1e-12, cut, tol, norm)


def estimate_alpha(s0: DuffingState, T: float, dt: float = 1e-3, tail_fraction: float = 0.5,
                   tol: float = 1e-3) -> OmegaEstimate:
    """Backward Duffing run on ``[-T, 0]``; the tail is the earliest part."""
    traj = duffing_integrate(s0, -abs(T), dt)
    t = traj.times
    cut = t[0] + tail_fraction * (t[-1] - t[0])
    return _estimate(t, traj.states, t <= cut + 1e-12, cut, tol, "l2")


def hausdorff(a, b, norm: str = "l2") -> float:
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    p = _p(norm)
    return float(max(cKDTree(b).query(a, p=p)[0].max(), cKDTree(a).query(b, p=p)[0].max()))


# --------------------------------------------------------------------------
# Isolated sets and connections
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    label: str
    states: np.ndarray
    radius: float


@dataclass
class IsolatedSetCatalog:
    sets: list[CatalogEntry]
    isolation_radius: float
    norm: str = "l2"

    def __post_init__(self):
        self.sets = [CatalogEntry(e.label, np.atleast_2d(np.asarray(e.states, dtype=float)),
                                  float(e.radius)) for e in self.sets]
        labels = [e.label for e in self.sets]
        if len(set(labels)) != len(labels):
            raise ValueError("catalog labels must be unique")
        for i, a in enumerate(self.sets):
            for b in self.sets[i + 1:]:
                gap = self.set_distance(a.states, b.states)
                if gap <= a.radius + b.radius:
                    raise ValueError(f"neighbourhoods of {a.label} and {b.label} overlap")

    @classmethod
    def from_points(cls, labels, points, radius: float | None = None,
                    norm: str = "l2") -> "IsolatedSetCatalog":
        """Single-point sets with a common radius (default: a third of the closest pair distance)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if radius is None:
            d = [float(_norm(pts[i] - pts[j], norm)) for i in range(len(pts))
                 for j in range(i + 1, len(pts))]
            radius = min(d) / 3.0 if d else 1.0
        return cls([CatalogEntry(str(l), p[None], radius) for l, p in zip(labels, pts)], radius, norm)

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.sets]

    def set_distance(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.min(_norm(a[:, None, :] - b[None, :, :], self.norm)))

    def distances(self, states) -> np.ndarray:
        """Distance of each state to each set; shape (n_states, n_sets)."""
        s = np.atleast_2d(states)
        return np.stack([np.min(_norm(s[:, None, :] - e.states[None], self.norm), axis=1)
                         for e in self.sets], axis=1)

    def verify(self, system, t: float = 1.0, tol: float | None = None) -> dict[str, float]:
        """Drift of each set's states after time ``t``; raises if any exceeds ``tol``."""
        out = {}
        for e in self.sets:
            end = system.endpoints(e.states, t, 1, 0)[0]
            drift = float(np.max(self.distances(end)[:, self.labels.index(e.label)]))
            out[e.label] = drift
            if tol is not None and drift > tol:
                raise ValueError(f"set {e.label} is not quasi-invariant: drift {drift:.3g}")
        return out


@dataclass
class ConnectionGraph:
    nodes: list[str]
    edges: list[tuple[str, str, int]]
    witnesses: list[dict]
    returned: dict[str, int] = field(default_factory=dict)
    unresolved: list[dict] = field(default_factory=list)

    def edge_set(self) -> set[tuple[str, str]]:
        return {(a, b) for a, b, _ in self.edges}

    def to_json(self) -> dict:
        return {"nodes": self.nodes,
                "edges": [{"from": a, "to": b, "witness": w} for a, b, w in self.edges],
                "witnesses": self.witnesses, "returned": self.returned,
                "unresolved": self.unresolved}

    def to_dot(self) -> str:
        return dot_digraph("connections", self.nodes, sorted(self.edge_set()))


def _classify_run(traj: TrajectorySample, catalog: IsolatedSetCatalog, src: int,
                  settle_time: float):
    d = catalog.distances(traj.states)
    exited = bool(np.any(d[:, src] > catalog.sets[src].radius))
    tail = traj.times >= traj.times[-1] - settle_time - 1e-12
    half = np.array([e.radius / 2.0 for e in catalog.sets])
    settled = np.flatnonzero(np.all(d[tail] <= half, axis=0))
    target = int(settled[0]) if len(settled) else None
    return exited, target, float(np.min(d[-1]))


def settle_window(T: float) -> float:
    return max(10.0, 0.2 * T)


def probe_connections(catalog: IsolatedSetCatalog, system, n_probes: int = 20,
                      probe_radius: float = 1e-2, T: float = 30.0, seed: int = 0,
                      record_every: int = 10, chunk: int = 100,
                      keep_witnesses: int = 3) -> ConnectionGraph:
    """Launch seeded perturbations from every catalog set and record where they settle.

    A probe from ``M`` witnesses ``M -> N`` when it leaves the radius of
    ``M`` and its final ``max(10, 0.2 T)`` time units stay within half the
    radius of ``N`` (``N = M`` is a homoclinic witness).  Probes that settle
    back in ``M`` without leaving count as returned; the rest are unresolved.
    """
    rng = np.random.default_rng(seed)
    graph = ConnectionGraph(catalog.labels, [], [], {l: 0 for l in catalog.labels}, [])
    settle = settle_window(T)
    seen: dict[tuple[str, str], int] = {}
    for si, entry in enumerate(catalog.sets):
        d = entry.states.shape[1]
        base_idx = np.arange(n_probes) % len(entry.states)
        v = rng.standard_normal((n_probes, d))
        v /= _norm(v, catalog.norm)[:, None]
        starts = entry.states[base_idx] + probe_radius * v
        for c0 in range(0, n_probes, chunk):
            runs = system.trajectories(starts[c0:c0 + chunk], T, record_every)
            for j, tr in enumerate(runs):
                k = c0 + j
                exited, target, final = _classify_run(tr, catalog, si, settle)
                info = {"from": entry.label, "probe": k, "seed": int(seed),
                        "initial_state": starts[k].tolist(), "T": T,
                        "record_every": record_every, "system": system.describe()}
                if target is None:
                    graph.unresolved.append({**info, "final_distance": final})
                    continue
                to = catalog.labels[target]
                if not exited and target == si:
                    graph.returned[entry.label] += 1
                    continue
                if not exited:
                    graph.unresolved.append({**info, "final_distance": final,
                                             "reason": "settled elsewhere without exit"})
                    continue
                key = (entry.label, to)
                seen[key] = seen.get(key, 0) + 1
                if seen[key] <= keep_witnesses:
                    wid = len(graph.witnesses)
                    graph.witnesses.append({**info, "to": to, "id": wid})
                    if seen[key] == 1:
                        graph.edges.append((entry.label, to, wid))
    return graph


def replay_witness(witness: dict, catalog: IsolatedSetCatalog, system) -> bool:
    """Re-integrate a stored witness and confirm exit from ``from`` and settlement in ``to``."""
    tr = system.trajectories(np.asarray(witness["initial_state"])[None], witness["T"],
                             witness["record_every"])[0]
    src = catalog.labels.index(witness["from"])
    exited, target, _ = _classify_run(tr, catalog, src, settle_window(witness["T"]))
    return exited and target is not None and catalog.labels[target] == witness["to"]


@dataclass(frozen=True)
class CyclicChainReport:
    found: bool
    cycle: list[str] | None
    witnesses: list[tuple[str, str, int]]


def find_cyclic_chain(graph: ConnectionGraph, restrict_to=None) -> CyclicChainReport:
    """A directed cycle among the connections (self-loops count), if any."""
    nodes = list(graph.nodes) if restrict_to is None else [n for n in graph.nodes if n in set(restrict_to)]
    idx = {n: i for i, n in enumerate(nodes)}
    edges = [(a, b, w) for a, b, w in graph.edges if a in idx and b in idx]
    for a, b, w in edges:
        if a == b:
            return CyclicChainReport(True, [a], [(a, b, w)])
    tg = TransitionGraph.from_edges(len(nodes), [(idx[a], idx[b]) for a, b, _ in edges])
    rec = chain_recurrent_cells(tg)
    if not rec:
        return CyclicChainReport(False, None, [])
    start = min(rec)
    path = _bfs_path(tg, start, start)
    labels = [nodes[i] for i in path[:-1]]
    wit = {(a, b): w for a, b, w in edges}
    used = [(nodes[i], nodes[j], wit[(nodes[i], nodes[j])]) for i, j in zip(path[:-1], path[1:])]
    return CyclicChainReport(True, labels, used)


def cyclic_dichotomy(omega: OmegaEstimate, catalog: IsolatedSetCatalog,
                     graph: ConnectionGraph) -> str:
    """``'single'`` if the estimate meets at most one set, else ``'cycle'`` or ``'resolution failure'``."""
    d = catalog.distances(omega.points)
    met = [catalog.labels[i] for i in range(len(catalog.sets))
           if np.any(d[:, i] <= catalog.sets[i].radius)]
    if len(met) <= 1:
        return "single"
    return "cycle" if find_cyclic_chain(graph, restrict_to=met).found else "resolution failure"


# --------------------------------------------------------------------------
# Isolation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IsolationReport:
    isolated: bool
    recurrent_cells: list[int]
    n_annulus_cells: int
    core_radius: float
    warning: str | None = None


def isolation_check(entry: CatalogEntry, system, annulus_resolution: int = 40,
                    t_flow: float = 1.0, epsilon: float | None = None, n_samples: int = 8,
                    seed: int = 0, core_radius: float | None = None) -> IsolationReport:
    """Look for chain-recurrent cells in the annulus around ``entry``.

    The grid covers the ``radius`` neighbourhood with ``annulus_resolution``
    cells per axis.  Cells whose centers lie within ``core_radius`` (default
    ``epsilon + 3`` cell diameters) of the set are its resolution-level
    neighbourhood and are excluded: fattening alone makes them recurrent.
    """
    M = entry.states
    lo = M.min(axis=0) - entry.radius
    hi = M.max(axis=0) + entry.radius
    cx = CellComplex(np.column_stack([lo, hi]), (annulus_resolution,) * M.shape[1])
    eps = cx.diameter / 4 if epsilon is None else epsilon
    core = eps + 3 * cx.diameter if core_radius is None else core_radius
    c = cx.centers()
    dist = np.min(np.linalg.norm(c[:, None, :] - M[None], axis=-1), axis=1)
    inside = dist <= entry.radius
    annulus = inside & (dist > core)
    if not np.any(annulus):
        msg = "annulus contains no cells at this resolution; check is vacuous"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return IsolationReport(True, [], 0, core, msg)
    g = build_transition_graph(system, cx, t_flow, eps, n_samples, 1, seed, active=inside)
    rec = sorted(c_ for c_ in chain_recurrent_cells(g) if annulus[c_])
    return IsolationReport(not rec, rec, int(annulus.sum()), core)
