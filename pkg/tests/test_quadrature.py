import numpy as np
import pytest
import sympy as sp

from avem.quadrature import map_rule, monomial_integral, red_refine, triangle_rule

TRI = np.array([[0.3, -0.2], [1.7, 0.4], [0.1, 1.3]])


def sympy_integral(tri, a, b):
    """Symbolic integral of x^a y^b over a triangle via the affine map."""
    s, t = sp.symbols("s t")
    P = [sp.Rational(str(v[0])) for v in tri], [sp.Rational(str(v[1])) for v in tri]
    x = P[0][0] + (P[0][1] - P[0][0]) * s + (P[0][2] - P[0][0]) * t
    y = P[1][0] + (P[1][1] - P[1][0]) * s + (P[1][2] - P[1][0]) * t
    jac = abs((P[0][1] - P[0][0]) * (P[1][2] - P[1][0]) - (P[0][2] - P[0][0]) * (P[1][1] - P[1][0]))
    val = sp.integrate(sp.integrate(x**a * y**b * jac, (t, 0, 1 - s)), (s, 0, 1))
    return float(val)


@pytest.mark.parametrize("a,b", [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (3, 2), (0, 4)])
def test_monomial_integral_matches_symbolic(a, b):
    assert monomial_integral(TRI, a, b) == pytest.approx(sympy_integral(TRI, a, b), rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("order", [1, 2, 3, 5])
def test_rules_are_exact_to_their_degree(order):
    _, w = triangle_rule(order)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    pts, W = map_rule(TRI, order)
    for deg in range(order + 1):
        for a in range(deg + 1):
            b = deg - a
            q = np.sum(W * pts[:, 0] ** a * pts[:, 1] ** b)
            assert q == pytest.approx(monomial_integral(TRI, a, b), rel=1e-12, abs=1e-14)


def test_unknown_order():
    with pytest.raises(ValueError):
        triangle_rule(4)


def test_red_refine_tiles_the_triangle():
    sub = red_refine(TRI, 2)
    assert sub.shape == (16, 3, 2)
    _, W = map_rule(sub, 1)
    _, W0 = map_rule(TRI, 1)
    assert W.sum() == pytest.approx(W0.sum(), rel=1e-14)
    # composite integration of a degree-3 monomial stays exact
    pts, W = map_rule(sub, 3)
    assert np.sum(W * pts[..., 0] ** 2 * pts[..., 1]) == pytest.approx(monomial_integral(TRI, 2, 1), rel=1e-12)
