import math

import numpy as np
import pytest

from avem.mesh import Mesh, MeshError, build_initial_mesh
from avem.problems import problem_kellogg, problem_lshape
from avem.refine import refine

from conftest import corner_refinement, random_refinement, unit_square


def test_initial_mesh_rotates_newest_vertex_opposite_longest_edge():
    m = unit_square()
    for e in m.active_elements():
        el = m.elements[e]
        a, b = el.refinement_edge
        P = m.coords_array()
        # the refinement edge of each half square is the diagonal
        assert math.isclose(np.hypot(*(P[a] - P[b])), math.sqrt(2))
        assert el.newest == 0


def test_first_vertex_rule():
    m = build_initial_mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], "first")
    assert m.elements[0].newest_vertex == 0


@pytest.mark.parametrize("tris, msg", [
    ([(0, 1, 1)], "bad triangle"),
    ([(0, 2, 1)], "clockwise"),
    ([(0, 1, 3)], "degenerate"),
])
def test_build_errors(tris, msg):
    V = [(0, 0), (1, 0), (0, 1), (2, 0)]
    with pytest.raises(MeshError, match=msg):
        build_initial_mesh(V, tris)


def test_vertex_inside_edge_is_rejected():
    V = [(0, 0), (2, 0), (0, 2), (1, 0), (1, -1)]
    with pytest.raises(MeshError, match="inside edge"):
        build_initial_mesh(V, [(0, 1, 2), (0, 4, 3)])


def test_lshape_boundary_flags_and_area():
    m = problem_lshape().make_mesh()
    assert m.boundary_mask().tolist() == [True, True, True, True, True, True, True, True]
    assert math.isclose(sum(m.element_area(e) for e in m.active_elements()), 3.0)
    # the diagonal joining two boundary corners is interior
    assert not m.is_boundary_segment(0, 3)


def test_interior_midpoint_of_boundary_nodes_is_interior():
    m = problem_lshape().make_mesh()
    # bisecting across the interior diagonal (0,0)-(-1,-1) creates an interior node
    for e in m.active_elements():
        if set(m.elements[e].refinement_edge) == {0, 3}:
            refine(m, {e}, 10)
            break
    mid = [i for i, n in enumerate(m.nodes) if n.coords == (-0.5, -0.5)]
    assert mid and not m.nodes[mid[0]].on_boundary


def test_bisection_children_and_sizes():
    m = unit_square()
    h = m.element_size(0)
    c1, c2 = m.bisect(0)
    assert m.elements[0].children == (c1, c2)
    for c in (c1, c2):
        el = m.elements[c]
        assert el.generation == 1 and el.parent == 0
        assert math.isclose(m.element_size(c), h / math.sqrt(2))
        assert m.element_area(c) > 0
    # the midpoint is the newest vertex of both children
    assert m.elements[c1].newest_vertex == m.elements[c2].newest_vertex == 4


def test_hanging_node_after_single_bisection():
    m = unit_square()
    m.bisect(0)
    assert m.is_hanging(4) and m.global_index(4) == 1
    assert m.max_index() == 1
    eb = m.element_boundary(1)
    assert len(eb) == 4 and 4 in eb.nodes
    m.bisect(1)
    assert m.is_proper(4) and m.max_index() == 0


def test_element_boundary_interpolation_parameters():
    m = unit_square()
    m.bisect(0)
    eb = m.element_boundary(1)
    X = m.coords_array()[eb.nodes]
    for k, (a, b, t) in enumerate(eb.interp):
        assert np.array_equal(X[k], (1 - t) * X[a] + t * X[b])


def test_edge_neighbor():
    m = unit_square()
    eb = m.element_boundary(0)
    diag = [e for e in eb.edges if set(e) == {0, 2}][0]
    other, k = m.edge_neighbor(0, diag)
    assert other == 1
    assert m.element_boundary(1).edges[k] == diag[::-1]
    boundary = [e for e in eb.edges if set(e) != {0, 2}][0]
    assert m.edge_neighbor(0, boundary) is None
    with pytest.raises(MeshError):
        m.edge_neighbor(0, (1, 3))


def test_edge_neighbor_rejects_coarse_side():
    m = unit_square()
    m.bisect(0)
    # element 1 still has the full diagonal as a side; the finer halves are edges
    with pytest.raises(MeshError):
        m.edge_neighbor(1, (0, 2))


def test_indices_match_recomputation_and_audit(rng):
    m = problem_lshape().make_mesh()
    for step in range(6):
        random_refinement(m, 3, 1, rng)
        assert np.array_equal(m.recompute_indices(), m.global_indices())
        rep = m.audit(3, 3.0)
        assert rep["lambda_max"] <= 3
        assert rep["max_side_hanging"] <= 2**3 - 1


def test_midpoints_are_exact(rng):
    m = random_refinement(problem_kellogg().make_mesh(), 2, 5, rng)
    for n in m.nodes:
        if n.parents:
            a, b = (m.nodes[i] for i in n.parents)
            assert (n.x, n.y) == (0.5 * (a.x + b.x), 0.5 * (a.y + b.y))


def test_json_round_trip_is_bit_exact(rng):
    m = corner_refinement(problem_kellogg().make_mesh(), 10, 12)
    random_refinement(m, 10, 2, rng)
    text = m.dumps()
    m2 = Mesh.loads(text)
    assert m2.dumps() == text
    assert np.array_equal(m2.coords_array(), m.coords_array())
    assert np.array_equal(m2.global_indices(), m.global_indices())
    assert m2.active_elements() == m.active_elements()
