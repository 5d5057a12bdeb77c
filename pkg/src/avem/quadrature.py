"""Triangle quadrature and exact monomial integrals."""
from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np

__all__ = ["triangle_rule", "map_rule", "monomial_integral", "barycentric_integral", "red_refine"]


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (n, 3) and weights summing to 1 on the reference triangle.

    Supported degrees of exactness: 1, 2, 3, 5 (Strang-Fix / Dunavant rules).
    """
    if order == 1:
        pts = np.array([[1 / 3, 1 / 3, 1 / 3]])
        w = np.array([1.0])
    elif order == 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1 / 3)
    elif order == 3:
        pts = np.array([[1 / 3, 1 / 3, 1 / 3], [0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]])
        w = np.array([-27 / 48, 25 / 48, 25 / 48, 25 / 48])
    elif order == 5:
        s15 = np.sqrt(15.0)
        a1 = (6 - s15) / 21
        a2 = (6 + s15) / 21
        w1 = (155 - s15) / 1200
        w2 = (155 + s15) / 1200
        pts = np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [a1, a1, 1 - 2 * a1], [a1, 1 - 2 * a1, a1], [1 - 2 * a1, a1, a1],
            [a2, a2, 1 - 2 * a2], [a2, 1 - 2 * a2, a2], [1 - 2 * a2, a2, a2],
        ])
        w = np.array([9 / 40, w1, w1, w1, w2, w2, w2])
    else:
        raise ValueError(f"no triangle rule of order {order}")
    return pts, w


def map_rule(tri: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Physical points (..., n, 2) and weights (..., n) for triangles (..., 3, 2)."""
    bary, w = triangle_rule(order)
    tri = np.asarray(tri, dtype=float)
    pts = np.einsum("qk,...kd->...qd", bary, tri)
    d1 = tri[..., 1, :] - tri[..., 0, :]
    d2 = tri[..., 2, :] - tri[..., 0, :]
    area = 0.5 * np.abs(d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])
    return pts, area[..., None] * w


def red_refine(tri: np.ndarray, levels: int = 1) -> np.ndarray:
    """Split triangles (..., 3, 2) into 4**levels congruent subtriangles (..., k, 3, 2)."""
    tri = np.asarray(tri, dtype=float)[..., None, :, :]
    for _ in range(levels):
        a, b, c = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        sub = np.stack([
            np.stack([a, ab, ca], -2),
            np.stack([ab, b, bc], -2),
            np.stack([ca, bc, c], -2),
            np.stack([ab, bc, ca], -2),
        ], -3)
        tri = sub.reshape(*sub.shape[:-4], -1, 3, 2)
    return tri


def barycentric_integral(area: float, i: int, j: int, k: int) -> float:
    """Exact integral of l1^i l2^j l3^k over a triangle of the given area."""
    return 2.0 * area * factorial(i) * factorial(j) * factorial(k) / factorial(i + j + k + 2)


def monomial_integral(tri, a: int, b: int) -> float:
    """Exact integral of x^a y^b over the triangle with vertex rows ``tri``.

    Expands x = sum l_k x_k, y = sum l_k y_k multinomially and integrates
    each barycentric monomial in closed form.
    """
    tri = np.asarray(tri, dtype=float)
    (x0, y0), (x1, y1), (x2, y2) = tri
    area = 0.5 * abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
    total = 0.0
    for i1 in range(a + 1):
        for j1 in range(a - i1 + 1):
            k1 = a - i1 - j1
            cx = factorial(a) / (factorial(i1) * factorial(j1) * factorial(k1)) * x0**i1 * x1**j1 * x2**k1
            for i2 in range(b + 1):
                for j2 in range(b - i2 + 1):
                    k2 = b - i2 - j2
                    cy = (factorial(b) / (factorial(i2) * factorial(j2) * factorial(k2))
                          * y0**i2 * y1**j2 * y2**k2)
                    total += cx * cy * barycentric_integral(area, i1 + i2, j1 + j2, k1 + k2)
    return total
