import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avem.mesh import MeshError
from avem.problems import problem_kellogg, problem_lshape
from avem.refine import MarkSet, dorfler_mark, make_admissible, refine

from conftest import corner_refinement, deep_chain_mesh, random_refinement, unit_square


def brute_force_indices(mesh):
    """Global indices from a geometric hanging test and plain recursion."""
    X = mesh.coords_array()
    hanging = np.zeros(mesh.n_nodes, dtype=bool)
    for e in mesh.active_elements():
        P = mesh.element_coords(e)
        for k in range(3):
            a, b = P[k], P[(k + 1) % 3]
            d = b - a
            rel = X - a
            t = rel @ d / (d @ d)
            cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
            hanging |= (t > 0) & (t < 1) & (np.abs(cross) <= 1e-14 * (d @ d))

    def lam(i):
        if not hanging[i]:
            return 0
        a, b = mesh.nodes[i].parents
        return max(lam(a), lam(b)) + 1

    return np.array([lam(i) for i in range(mesh.n_nodes)])


def test_dorfler_examples():
    assert dorfler_mark({1: 4.0, 2: 3.0, 3: 2.0, 4: 1.0}, 0.5).elements == {1, 2}
    assert dorfler_mark({7: 0.3}, 0.99).elements == {7}
    assert len(dorfler_mark({i: 1.0 for i in range(10)}, 0.5).elements) == 5
    # ties are broken by element id
    assert dorfler_mark({5: 1.0, 2: 1.0, 9: 1.0}, 0.3).elements == {2}


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1])
def test_dorfler_rejects_theta(bad):
    with pytest.raises(ValueError):
        dorfler_mark({0: 1.0}, bad)


def test_dorfler_rejects_empty_and_negative():
    with pytest.raises(ValueError):
        dorfler_mark({}, 0.5)
    with pytest.raises(ValueError):
        dorfler_mark({0: 1.0, 1: -1.0}, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=40),
       st.floats(0.01, 0.99))
def test_dorfler_property(values, theta):
    ind = dict(enumerate(values))
    ms = dorfler_mark(ind, theta)
    total = sum(values)
    chosen = sum(ind[e] for e in ms.elements)
    assert chosen >= theta * total
    # dropping the smallest member breaks the inequality
    if total > 0 and len(ms.elements) > 1:
        smallest = sorted(ms.elements, key=lambda e: (-ind[e], e))[-1]
        assert chosen - ind[smallest] < theta * total


def test_bisection_examples():
    m = unit_square()
    m.bisect(0)
    assert m.max_index() == 1
    n_before = m.n_nodes
    m.bisect(1)
    assert m.n_nodes == n_before          # midpoint reused
    assert m.max_index() == 0
    with pytest.raises(MeshError):
        m.bisect(0)
    # grandchildren of a root have a quarter of its area
    m = unit_square()
    c1, _ = m.bisect(0)
    g1, g2 = m.bisect(c1)
    assert m.element_area(g1) == m.element_area(g2) == 0.5 / 4


def test_global_index_chain_matches_brute_force():
    m = deep_chain_mesh()
    assert m.max_index() >= 5
    assert np.array_equal(brute_force_indices(m), m.global_indices())


def test_random_bisections_match_brute_force(rng):
    m = problem_lshape().make_mesh()
    for _ in range(200):
        m.bisect(int(rng.choice(m.active_elements())))
    assert np.array_equal(brute_force_indices(m), m.global_indices())


def test_make_admissible_cases():
    m = deep_chain_mesh()
    seen = set()
    while m.max_index() > 1:
        lam = m.max_index()
        x = min(m.nodes_at_index(lam))
        eid, side = m.hosts(x)[0]
        is_case_a = set(side) == set(m.elements[eid].refinement_edge)
        n = make_admissible(m, eid, x)
        assert n == (1 if is_case_a else 2)
        assert m.global_index(x) < lam
        seen.add(n)
    assert seen == {1, 2}


def test_make_admissible_rejects_non_hosted_node():
    m = unit_square()
    with pytest.raises(MeshError):
        make_admissible(m, 0, 1)


@pytest.mark.parametrize("Lambda", [0, 1, 2, 3, 10])
def test_refine_restores_admissibility(Lambda, rng):
    m = problem_lshape().make_mesh()
    for _ in range(5):
        marks = set(int(e) for e in rng.choice(m.active_elements(), 3, replace=False))
        rep = refine(m, MarkSet(marks, 0.5), Lambda)
        assert rep.lambda_max_after <= Lambda
        assert all(not m.elements[e].is_active for e in marks)
        assert m.audit(Lambda, 3.0)["lambda_max"] <= Lambda


def test_corner_cascade_lambda_one():
    m = corner_refinement(problem_kellogg().make_mesh(), 1, 15)
    assert m.max_index() <= 1
    assert m.audit(1, 4.0)["max_side_hanging"] <= 1


def test_fem_mode_stays_conforming(rng):
    m = random_refinement(unit_square(), 0, 6, rng)
    assert m.max_index() == 0 and not m.hanging_nodes()
    for e in m.active_elements():
        assert len(m.element_boundary(e)) == 3


def test_conforming_marks_need_no_completion():
    m = unit_square()
    rep = refine(m, {0, 1}, 1)
    assert rep.n_bisections_completion == 0


def test_children_partition_parent_area(rng):
    m = random_refinement(problem_kellogg().make_mesh(), 2, 4, rng)
    for el_id, el in enumerate(m.elements):
        if el.children:
            a = sum(m.element_area(c) for c in el.children)
            assert abs(a - m.element_area(el_id)) <= 1e-12 * m.element_area(el_id)
        if el.parent is not None:
            assert el_id in m.elements[el.parent].children


def test_refine_rejects_negative_lambda():
    with pytest.raises(ValueError):
        refine(unit_square(), {0}, -1)
