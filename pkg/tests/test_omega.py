import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semiflows.inclusion import DuffingState, duffing_energy, duffing_integrate
from semiflows.omega import (CatalogEntry, ConnectionGraph, IsolatedSetCatalog, cyclic_dichotomy,
                             estimate_alpha, estimate_omega, find_cyclic_chain, hausdorff,
                             isolation_check, probe_connections, replay_witness, tol_net)
from semiflows.systems import contraction_system, duffing_system

pts = arrays(np.float64, st.tuples(st.integers(1, 8), st.just(2)),
             elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(a=pts, b=pts)
def test_hausdorff_matches_brute_force(a, b):
    d = np.linalg.norm(a[:, None] - b[None], axis=-1)
    assert hausdorff(a, b) == pytest.approx(max(d.min(1).max(), d.min(0).max()))
    assert hausdorff(a, b) == pytest.approx(hausdorff(b, a))
    assert hausdorff(a, a) == 0.0


@settings(max_examples=30, deadline=None)
@given(a=pts, tol=st.floats(0.01, 5.0))
def test_tol_net_covers_and_separates(a, tol):
    net = tol_net(a, tol)
    assert np.max(np.min(np.linalg.norm(a[:, None] - net[None], axis=-1), axis=1)) <= tol
    if len(net) > 1:
        d = np.linalg.norm(net[:, None] - net[None], axis=-1) + np.eye(len(net)) * 1e9
        assert d.min() > tol


def test_duffing_omega_lies_on_one_level_set():
    s0 = DuffingState(0.5, 0.0)
    om = estimate_omega(duffing_integrate(s0, 40.0, 1e-3), 0.5, 1e-3)
    V = duffing_energy(om.points)
    assert np.ptp(V) < 1e-12
    assert V[0] == pytest.approx(duffing_energy(s0), abs=1e-12)
    assert om.monotone_after_cut
    al = estimate_alpha(s0, 40.0, 1e-3, 0.5, 1e-3)
    assert hausdorff(om.points, al.points) <= 2e-3


def test_alpha_of_unstable_manifold_point_is_origin():
    a = estimate_alpha(DuffingState(1e-6, 1e-6), 20.0, 1e-3, 0.5, 1e-3)
    assert np.max(np.abs(a.points)) < 1e-6


def test_tail_fraction_validation():
    tr = duffing_integrate(DuffingState(0.5, 0.0), 1.0, 1e-2)
    with pytest.raises(ValueError):
        estimate_omega(tr, 0.0)


def test_catalog_rejects_overlap_and_duplicates():
    with pytest.raises(ValueError):
        IsolatedSetCatalog.from_points(["a", "b"], [[0.0, 0.0], [0.5, 0.0]], radius=0.3)
    with pytest.raises(ValueError):
        IsolatedSetCatalog.from_points(["a", "a"], [[0.0, 0.0], [5.0, 0.0]])
    cat = IsolatedSetCatalog.from_points(["a", "b"], [[0.0, 0.0], [3.0, 0.0]])
    assert cat.isolation_radius == pytest.approx(1.0)
    assert cat.distances(np.array([[1.0, 0.0]])).tolist() == [[1.0, 2.0]]


def test_catalog_verify_detects_drift():
    cat = IsolatedSetCatalog.from_points(["c", "off"], [[1.0, 0.0], [0.5, 0.0]], radius=0.1)
    drift = cat.verify(duffing_system(), 1.0)
    assert drift["c"] < 1e-12 and drift["off"] > 1e-3
    with pytest.raises(ValueError):
        cat.verify(duffing_system(), 1.0, tol=1e-6)


def _graph(edges):
    nodes = sorted({x for e in edges for x in e[:2]} | {"z"})
    return ConnectionGraph(nodes, [(a, b, i) for i, (a, b) in enumerate(edges)], [])


def test_find_cyclic_chain_cases():
    assert not find_cyclic_chain(_graph([("0", "e+"), ("0", "e-")])).found
    loop = find_cyclic_chain(_graph([("a", "a"), ("a", "b")]))
    assert loop.found and loop.cycle == ["a"]
    cyc = find_cyclic_chain(_graph([("a", "b"), ("b", "c"), ("c", "a"), ("c", "d")]))
    assert cyc.found and set(cyc.cycle) == {"a", "b", "c"}
    assert len(cyc.witnesses) == 3
    assert not find_cyclic_chain(_graph([("a", "b"), ("b", "a")]), restrict_to=["a", "z"]).found


def test_connection_graph_exports():
    g = _graph([("0", "e+")])
    assert '"0" -> "e+"' in g.to_dot()
    assert g.to_json()["edges"] == [{"from": "0", "to": "e+", "witness": 0}]


def test_probing_a_saddle_on_the_line():
    # x' = x - x^3 on the real line: 0 repels into the two stable points +-1
    from semiflows.systems import VectorFieldSystem

    sys1 = VectorFieldSystem(lambda p: p - p ** 3, 1, "pitchfork", dt=1e-2)
    cat = IsolatedSetCatalog.from_points(["-1", "0", "1"], [[-1.0], [0.0], [1.0]], radius=0.3)
    g = probe_connections(cat, sys1, n_probes=20, probe_radius=0.05, T=30.0, seed=4)
    assert g.edge_set() == {("0", "-1"), ("0", "1")}
    assert g.returned["1"] == 20 and g.returned["-1"] == 20
    assert all(replay_witness(w, cat, sys1) for w in g.witnesses)
    assert not find_cyclic_chain(g).found
    om = estimate_omega(sys1.trajectories(np.array([[0.3]]), 40.0)[0], 0.25, 1e-3)
    assert cyclic_dichotomy(om, cat, g) == "single"


def test_isolation_of_stable_point_and_of_a_center():
    iso = isolation_check(CatalogEntry("0", np.zeros((1, 2)), 0.5), contraction_system(2), 40)
    assert iso.isolated and iso.n_annulus_cells > 0
    center = isolation_check(CatalogEntry("c", np.array([[1.0, 0.0]]), 0.5), duffing_system(), 40)
    assert not center.isolated and center.recurrent_cells


def test_isolation_warns_when_vacuous():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = isolation_check(CatalogEntry("0", np.zeros((1, 2)), 0.01), contraction_system(2), 2)
    assert rep.isolated and rep.n_annulus_cells == 0 and rep.warning
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)
