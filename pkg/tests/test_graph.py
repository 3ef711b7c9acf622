import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiflows import setvalued as sv
from semiflows.graph import (AssemblyError, CellComplex, EpsChain, PreconditionError,
                             TransitionGraph, assemble_pseudo_trajectory, bridge_residuals,
                             bridge_segment, build_transition_graph, chain_recurrent_cells,
                             equilibrium_chain, find_eps_chain, verify_chain)
from semiflows.inclusion import LinearOperator, SelectionPolicy, assemble_laplacian, integrate
from semiflows.systems import InclusionSystem, contraction_system, duffing_system, zero_system


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 11), min_size=2, max_size=2))
def test_locate_inverts_centers(idx):
    cx = CellComplex(np.array([[-1.0, 2.0], [0.0, 1.0]]), (12, 12))
    cell = int(cx.flat_index(np.array(idx)))
    assert cx.locate(cx.center(cell)[None])[0] == cell
    lo, hi = cx.cell_box(cell)
    assert np.all(lo <= cx.center(cell)) and np.all(cx.center(cell) <= hi)


def test_locate_outside_and_upper_face():
    cx = CellComplex(np.array([[0.0, 1.0]]), (4,))
    assert cx.locate(np.array([[1.5], [-0.1], [np.nan]])).tolist() == [-1, -1, -1]
    assert cx.locate(np.array([[1.0]]))[0] == 3


def test_centered_complex_puts_anchor_at_a_center():
    anchor = np.array([1.2, 0.0])
    cx = CellComplex.centered(anchor, 0.03, [-0.15, -0.85], [1.55, 0.85])
    c = cx.center(int(cx.locate(anchor[None])[0]))
    assert np.allclose(c, anchor, atol=1e-12)
    assert np.all(cx.bounds[:, 0] <= [-0.15, -0.85]) and np.all(cx.bounds[:, 1] >= [1.55, 0.85])


def test_complex_validation():
    with pytest.raises(ValueError):
        CellComplex(np.array([[1.0, 0.0]]), (3,))
    with pytest.raises(ValueError):
        CellComplex(np.array([[0.0, 1.0]]), (0,))


def test_distance_to_cells():
    cx = CellComplex(np.array([[0.0, 2.0], [0.0, 2.0]]), (2, 2))
    d = cx.distance_to_cells(np.array([3.0, 0.5]), [0, 2])
    assert d.tolist() == pytest.approx([2.0, 1.0])


def test_chain_recurrent_cells_hand_graphs():
    cyc = TransitionGraph.from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)])
    assert chain_recurrent_cells(cyc) == {0, 1, 2}
    dag = TransitionGraph.from_edges(3, [(0, 1), (1, 2)])
    assert chain_recurrent_cells(dag) == set()
    loop = TransitionGraph.from_edges(3, [(1, 1), (0, 2)])
    assert chain_recurrent_cells(loop) == {1}
    assert chain_recurrent_cells(TransitionGraph.from_edges(0, [])) == set()


def test_contraction_graph_recurrence_is_near_origin():
    cx = CellComplex(np.array([[-1.0, 1.0], [-1.0, 1.0]]), (21, 21))
    g = build_transition_graph(contraction_system(2), cx, 1.0, cx.diameter / 4)
    rec = chain_recurrent_cells(g)
    origin = int(cx.locate(np.zeros((1, 2)))[0])
    assert origin in rec and g.has_edge(origin, origin)
    assert np.max(np.linalg.norm(cx.centers(sorted(rec)), axis=1)) < 3 * cx.diameter


def test_identity_flow_makes_every_cell_recurrent():
    cx = CellComplex(np.array([[0.0, 1.0]]), (10,))
    g = build_transition_graph(zero_system(1), cx, 1.0, 0.0, n_samples=1)
    assert chain_recurrent_cells(g) == set(range(10))


def test_escaping_cells_get_no_edges():
    class Escaper:
        def endpoints(self, points, t, n_selections=1, seed=0):
            out = np.repeat(np.asarray(points, float)[None], n_selections, axis=0)
            out[:, np.asarray(points)[:, 0] > 0.5] = np.nan
            return out

        def describe(self):
            return {"kind": "test"}

    cx = CellComplex(np.array([[0.0, 1.0]]), (4,))
    g = build_transition_graph(Escaper(), cx, 1.0, 0.0, n_samples=2)
    assert g.escapes.tolist() == [False, False, True, True]
    assert len(g.successors(3)) == 0
    assert g.edges().tolist() == [[0, 0], [1, 1]]
    assert '"1" -> "1"' in g.to_dot()
    assert [c["id"] for c in g.to_json()["cells"]] == [0, 1]


@pytest.fixture(scope="module")
def duffing_coarse():
    cx = CellComplex(np.array([[-1.8, 1.8], [-1.8, 1.8]]), (30, 30))
    sysd = duffing_system()
    return sysd, build_transition_graph(sysd, cx, 0.5, cx.diameter, seed=3)


def test_returning_chain_on_duffing_orbit_verifies(duffing_coarse):
    sysd, g = duffing_coarse
    cell = int(g.complex.locate(np.array([[1.2, 0.0]]))[0])
    ch = find_eps_chain(g, cell, cell)
    assert ch is not None and ch.cells[0] == ch.cells[-1] == cell
    assert len(ch.points) == len(ch.times) + 1
    rep = verify_chain(ch, sysd)
    assert rep.passed and max(rep.residuals) < ch.epsilon


def test_chain_through_waypoints(duffing_coarse):
    _, g = duffing_coarse
    a = int(g.complex.locate(np.array([[1.2, 0.0]]))[0])
    w = int(g.complex.locate(np.array([[0.4, 0.0]]))[0])
    ch = find_eps_chain(g, a, a, via=[w])
    assert w in ch.cells


def test_no_chain_when_unreachable():
    g = TransitionGraph.from_edges(3, [(0, 1)], t_flow=1.0, epsilon=0.1)
    g.complex = CellComplex(np.array([[0.0, 3.0]]), (3,))
    g.dispersion = np.zeros(3)
    g.spread = np.zeros(3)
    assert find_eps_chain(g, 1, 0) is None
    assert find_eps_chain(g, 0, 1).cells == [0, 1]


def test_verify_chain_flags_bad_links():
    ch = EpsChain(np.array([[1.2, 0.0], [0.0, 1.0]]), [0.5], 1e-3)
    rep = verify_chain(ch, duffing_system())
    assert not rep.passed and rep.failed_links == [0]


def test_eps_chain_shape_checks():
    with pytest.raises(ValueError):
        EpsChain(np.zeros((2, 2)), [1.0, 1.0], 0.1)


def test_equilibrium_chain():
    sysd = duffing_system()
    ch = equilibrium_chain(np.array([1.0, 0.0]), 1.0, 10.0, sysd)
    assert ch.times.tolist() == [11.0]
    assert verify_chain(ch, sysd).passed
    with pytest.raises(PreconditionError):
        equilibrium_chain(np.array([0.5, 0.0]), 1.0, 10.0, sysd)


def test_pseudo_trajectory_jumps_match_chain_gaps():
    sysd = duffing_system()
    p = np.array([[1.2, 0.0], [1.0, 0.3], [1.2, 0.0]])
    chain = EpsChain(p, [0.5, 0.5], 1.0)
    pt = assemble_pseudo_trajectory(sysd, [chain])
    ends = sysd.endpoints(p[:-1], 0.5)[0]
    assert pt.jump_sizes == pytest.approx(np.linalg.norm(ends - p[1:], axis=1).tolist())
    assert pt.end_time == pytest.approx(1.0)
    assert pt.level_of_jump == [0, 0]
    other = EpsChain(np.array([[0.0, 0.0], [0.0, 0.0]]), [0.5], 1.0)
    with pytest.raises(PreconditionError):
        assemble_pseudo_trajectory(sysd, [chain, other])


def test_assembly_fails_when_every_selection_escapes():
    class Gone:
        def trajectories(self, points, T, record_every=1, selection=0, seed=0):
            tr = integrate(np.zeros(1), 1.0, 0.5, LinearOperator.zero(1), sv.zero_map())
            tr.states[:] = np.nan
            return [tr]

    with pytest.raises(AssemblyError):
        assemble_pseudo_trajectory(Gone(), [EpsChain(np.zeros((2, 1)), [1.0], 1.0)])


def test_bridge_ends_at_target_with_bounded_residual():
    A = assemble_laplacian(10)
    reg = sv.regularize(sv.heaviside(), 2)
    phi = integrate(np.sin(np.pi * A.grid), 0.5, 1e-3, A, reg, SelectionPolicy("midpoint"))
    b = phi.final + 1e-3 * np.cos(np.pi * A.grid)
    br = bridge_segment(phi, b, reg.lipschitz_cN, A.norm())
    assert np.allclose(br.path.final, b) and np.allclose(br.path.states[0], phi.states[0])
    res = bridge_residuals(br, A, reg)
    assert np.max(res) <= br.inflation


def test_graph_on_inclusion_system():
    A = assemble_laplacian(2)
    system = InclusionSystem(A, sv.interval_band(0.1), dt=0.01)
    cx = CellComplex(np.array([[-0.5, 0.5], [-0.5, 0.5]]), (8, 8))
    g = build_transition_graph(system, cx, 0.1, cx.diameter / 2, n_samples=4, n_selections=3)
    origin = int(cx.locate(np.array([[0.01, 0.01]]))[0])
    assert origin in chain_recurrent_cells(g)
    assert g.provenance["n_selections"] == 3
